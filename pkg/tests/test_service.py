import json
import os

import pytest
from fastapi.testclient import TestClient

from coplan.model import serialize_model
from coplan.service import canonical, create_app, replay_session

from conftest import two_route_spec


@pytest.fixture
def client():
    with TestClient(create_app()) as c:
        yield c


def make_session(client, parts=1, scale=0.002, timeout=30.0, **extra):
    body = {"model": {"palletize": parts}, "scale": scale, "timeout": timeout}
    body.update(extra)
    r = client.post("/session", json=body)
    assert r.status_code == 200, r.text
    return r.json()


def drive_to_completion(client, sid, intervene_on=None, max_frames=500):
    """Answer suggestions until the metrics frame arrives."""
    last_state = None
    metrics = None
    intervened = False
    with client.websocket_connect(f"/session/{sid}/ws") as ws:
        for _ in range(max_frames):
            frame = json.loads(ws.receive_text())
            if frame["kind"] == "metrics":
                metrics = frame["payload"]
                break
            if frame["kind"] == "error":
                raise AssertionError(f"error frame: {frame['payload']}")
            if frame["kind"] != "state":
                continue
            last_state = frame["payload"]
            p = last_state["pending"]
            if p is None or last_state["phase"] in ("done", "failed"):
                continue
            if p["agent"] == "human":
                ws.send_text(json.dumps({"kind": "action_done",
                                         "payload": {"suggestion": p["suggestion"]}}))
            elif p["agent"] == "joint":
                ws.send_text(json.dumps({"kind": "handover_confirm",
                                         "payload": {"suggestion": p["suggestion"]}}))
            elif p["agent"] == "robot":
                if (intervene_on and not intervened
                        and p["action"] == intervene_on):
                    intervened = True
                    ws.send_text(json.dumps({"kind": "intervene", "payload": {}}))
        else:
            raise AssertionError("session did not finish")
    return last_state, metrics


class TestHttpSurface:
    def test_healthz(self, client):
        r = client.get("/healthz")
        assert r.status_code == 200 and r.text == "ok"

    def test_create_with_inline_text(self, client):
        text = serialize_model(two_route_spec())
        r = client.post("/session", json={"model": {"text": text}})
        assert r.status_code == 200
        doc = r.json()
        assert doc["protocol"] == "coplan-proto/1"
        assert doc["state"]["pending"]["action"] in ("pick", "haul")

    def test_create_requires_model(self, client):
        assert client.post("/session", json={}).status_code == 422

    def test_create_invalid_model_text(self, client):
        r = client.post("/session", json={"model": {"text": "not json"}})
        assert r.status_code == 422

    def test_create_invalid_part_count(self, client):
        r = client.post("/session", json={"model": {"palletize": 0}})
        assert r.status_code == 422

    def test_create_missing_model_file(self, client):
        r = client.post("/session", json={"model": {"path": "/no/such/model.json"}})
        assert r.status_code == 404

    def test_snapshot_unknown_session(self, client):
        assert client.get("/session/deadbeef").status_code == 404

    def test_snapshot_bad_source(self, client):
        doc = make_session(client)
        r = client.get(f"/session/{doc['session']}", params={"source": "journal"})
        assert r.status_code == 422


class TestLiveSession:
    def test_compliant_run_reaches_done(self, client):
        doc = make_session(client, parts=2)
        state, metrics = drive_to_completion(client, doc["session"])
        assert state["phase"] == "done" and state["status"] == "solved"
        assert state["progress"]["placed"] == 2
        assert metrics["t_c"] > 0
        assert metrics["t_c"] == pytest.approx(
            metrics["t_m"] + metrics["t_h"] + metrics["t_r"], abs=1e-6)

    def test_intervention_switches_route(self, client):
        doc = make_session(client, parts=2)
        state, _ = drive_to_completion(client, doc["session"],
                                       intervene_on="approach-goal")
        assert state["phase"] == "done"
        assert state["interventions"] == 1
        kinds = {s["node"]: s["kind"] for s in state["progress"]["slots"]}
        assert kinds["pallet_1"] == "handover"
        assert kinds["pallet_2"] == "plain"

    def test_snapshot_equals_replay(self, client):
        doc = make_session(client, parts=2)
        drive_to_completion(client, doc["session"], intervene_on="approach-goal")
        sid = doc["session"]
        live = client.get(f"/session/{sid}").content
        replay = client.get(f"/session/{sid}", params={"source": "replay"}).content
        assert live == replay

    def test_hello_frame_restates_current_seq(self, client):
        doc = make_session(client)
        sid = doc["session"]
        with client.websocket_connect(f"/session/{sid}/ws") as ws:
            first = json.loads(ws.receive_text())
        assert first["kind"] == "state"
        snap = json.loads(client.get(f"/session/{sid}").content)
        assert first["seq"] == snap["seq"]

    def test_connect_unknown_session_rejected(self, client):
        from starlette.websockets import WebSocketDisconnect
        with pytest.raises(WebSocketDisconnect):
            with client.websocket_connect("/session/nope/ws") as ws:
                ws.receive_text()


class TestClientEventValidation:
    def test_stale_seq_rejected_without_side_effects(self, client):
        doc = make_session(client)
        sid = doc["session"]
        before = client.get(f"/session/{sid}").content
        with client.websocket_connect(f"/session/{sid}/ws") as ws:
            ws.receive_text()
            ws.send_text(json.dumps({"kind": "action_done",
                                     "payload": {"suggestion": 999}}))
            err = json.loads(ws.receive_text())
        assert err["kind"] == "error"
        assert err["payload"]["code"] == "stale-seq"
        assert client.get(f"/session/{sid}").content == before

    def test_handover_confirm_needs_joint_turn(self, client):
        doc = make_session(client)
        with client.websocket_connect(f"/session/{doc['session']}/ws") as ws:
            ws.receive_text()
            ws.send_text(json.dumps({"kind": "handover_confirm", "payload": {}}))
            err = json.loads(ws.receive_text())
        assert err["payload"]["code"] == "invalid-transition"

    def test_intervene_needs_robot_in_flight(self, client):
        doc = make_session(client)
        with client.websocket_connect(f"/session/{doc['session']}/ws") as ws:
            ws.receive_text()
            ws.send_text(json.dumps({"kind": "intervene", "payload": {}}))
            err = json.loads(ws.receive_text())
        assert err["payload"]["code"] == "invalid-transition"

    def test_unknown_kind(self, client):
        doc = make_session(client)
        with client.websocket_connect(f"/session/{doc['session']}/ws") as ws:
            ws.receive_text()
            ws.send_text(json.dumps({"kind": "dance", "payload": {}}))
            err = json.loads(ws.receive_text())
        assert err["payload"]["code"] == "protocol"

    def test_non_json_frame(self, client):
        doc = make_session(client)
        with client.websocket_connect(f"/session/{doc['session']}/ws") as ws:
            ws.receive_text()
            ws.send_text("??")
            err = json.loads(ws.receive_text())
        assert err["payload"]["code"] == "protocol"

    def test_event_after_close_rejected(self, client):
        doc = make_session(client, parts=1)
        drive_to_completion(client, doc["session"])
        with client.websocket_connect(f"/session/{doc['session']}/ws") as ws:
            ws.receive_text()
            ws.send_text(json.dumps({"kind": "action_done", "payload": {}}))
            err = json.loads(ws.receive_text())
        assert err["payload"]["code"] == "session-closed"


class TestTimeout:
    def test_unanswered_human_turn_times_out(self, client):
        doc = make_session(client, timeout=0.15)
        sid = doc["session"]
        with client.websocket_connect(f"/session/{sid}/ws") as ws:
            saw_error = None
            final = None
            for _ in range(10):
                frame = json.loads(ws.receive_text())
                if frame["kind"] == "error":
                    saw_error = frame["payload"]
                if frame["kind"] == "state":
                    final = frame["payload"]
                if saw_error and final and final["phase"] == "failed":
                    break
        assert saw_error["code"] == "timeout"
        assert final["failure_reason"] == "timeout"
        live = client.get(f"/session/{sid}").content
        replay = client.get(f"/session/{sid}", params={"source": "replay"}).content
        assert live == replay


class TestJournal:
    def test_log_dir_receives_journal(self, tmp_path, monkeypatch):
        monkeypatch.setenv("COPLAN_LOG_DIR", str(tmp_path))
        with TestClient(create_app()) as client:
            doc = make_session(client, parts=1)
            drive_to_completion(client, doc["session"])
            path = tmp_path / f"{doc['session']}.jsonl"
            assert path.exists()
            lines = [json.loads(l) for l in path.read_text().splitlines()]
            assert lines[0]["kind"] == "created"
            assert lines[0]["config"]["model_text"].startswith("{")
            kinds = {l["kind"] for l in lines[1:]}
            assert kinds == {"client", "robot_done"}

    def test_replay_session_function(self, client):
        doc = make_session(client, parts=1)
        drive_to_completion(client, doc["session"])
        app_sessions = client.app.state.sessions
        session = app_sessions[doc["session"]]
        rebuilt = replay_session(session.journal)
        assert canonical(rebuilt.snapshot_doc()) == canonical(session.snapshot_doc())
        assert rebuilt.state.phase.value == "done"
