"""Record a broadcast fixture for the operator console tests.

Runs the session service in-process, drives one K=3 palletization
session (including one intervention during an approach-goal) through a
WebSocket client, and writes the exact frames that client received,
one per line, to frontend/tests/fixtures/broadcast-k3.jsonl.  The
console test suite folds this capture through its reducer, so the
fixture must stay a verbatim wire capture: do not edit it by hand,
rerun this script instead.

Also captured, from the same finished session:
  - reconnect-hello.json: the hello frame a second, later connection
    received (the connect-time restatement at the latest seq),
  - final-snapshot.json: the canonical GET /session/{id} document.

Usage: python3 scripts/record_broadcast.py
"""

import json
import sys
from pathlib import Path

from fastapi.testclient import TestClient

from coplan.service import create_app

FIXTURES = Path(__file__).resolve().parent.parent / "frontend" / "tests" / "fixtures"

PARTS = 3
SCALE = 0.02
SEED = 5
INTERVENE_ON = "approach-goal"
MAX_FRAMES = 500


def record() -> None:
    raw_frames: list[str] = []
    with TestClient(create_app()) as client:
        r = client.post("/session", json={
            "model": {"palletize": PARTS},
            "scale": SCALE,
            "timeout": 30.0,
            "seed": SEED,
        })
        assert r.status_code == 200, r.text
        sid = r.json()["session"]

        intervened = False
        finished = False
        with client.websocket_connect(f"/session/{sid}/ws") as ws:
            for _ in range(MAX_FRAMES):
                raw = ws.receive_text()
                raw_frames.append(raw)
                frame = json.loads(raw)
                if frame["kind"] == "metrics":
                    finished = True
                    break
                if frame["kind"] == "error":
                    raise AssertionError(f"error frame: {frame['payload']}")
                if frame["kind"] != "state":
                    continue
                state = frame["payload"]
                pending = state["pending"]
                if pending is None or state["phase"] in ("done", "failed"):
                    continue
                if pending["agent"] == "human":
                    ws.send_text(json.dumps({
                        "kind": "action_done",
                        "payload": {"suggestion": pending["suggestion"]},
                    }))
                elif pending["agent"] == "joint":
                    ws.send_text(json.dumps({
                        "kind": "handover_confirm",
                        "payload": {"suggestion": pending["suggestion"]},
                    }))
                elif pending["agent"] == "robot":
                    if not intervened and pending["action"] == INTERVENE_ON:
                        intervened = True
                        ws.send_text(json.dumps({"kind": "intervene", "payload": {}}))
        assert finished, "session did not reach its metrics frame"
        assert intervened, "no robot action matched the intervention trigger"

        final_state = json.loads(raw_frames[-2])["payload"]
        assert final_state["status"] == "solved", final_state["status"]
        assert final_state["interventions"] == 1
        handover_slots = [
            s for s in final_state["progress"]["slots"] if s["kind"] == "handover"
        ]
        assert len(handover_slots) == 1, final_state["progress"]

        with client.websocket_connect(f"/session/{sid}/ws") as ws:
            hello = ws.receive_text()

        snapshot = client.get(f"/session/{sid}", params={"source": "live"})
        assert snapshot.status_code == 200

    FIXTURES.mkdir(parents=True, exist_ok=True)
    (FIXTURES / "broadcast-k3.jsonl").write_text(
        "".join(line + "\n" for line in raw_frames)
    )
    (FIXTURES / "reconnect-hello.json").write_text(hello + "\n")
    (FIXTURES / "final-snapshot.json").write_text(snapshot.text + "\n")

    bindings = set()
    for line in raw_frames:
        frame = json.loads(line)
        if frame["kind"] == "state" and frame["payload"]["pending"] is not None:
            bindings.add(frame["payload"]["pending"]["binding"])
    print(f"recorded {len(raw_frames)} frames to {FIXTURES}")
    print(f"bindings seen: {sorted(bindings)}")


if __name__ == "__main__":
    sys.exit(record())
