"""Live cooperation sessions over WebSocket + HTTP.

The service wraps the turn-taking manager in a wall-clock loop: robot
suggestions execute server-side after a scaled sleep, human and joint
suggestions wait for a client event, and a watchdog fails the session
when a human turn stays unanswered past the timeout.

Every session keeps an append-only journal of its inputs (creation
record, client events, robot completions, timeouts).  All derived
behavior -- suggestions, broadcast frames, metrics -- is a pure
function of the journal, so replaying it reconstructs the session
state exactly; snapshots are canonical JSON and byte-identical between
the live session and a replay.  Journal writes always precede
broadcasts.

Protocol ("coplan-proto/1") is documented in docs/protocol.md.
"""

from __future__ import annotations

import asyncio
import json
import os
import time
import uuid
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from fastapi.responses import PlainTextResponse

from .agents import Duration, RobotModel
from .graph import AgentKind, AndOrGraph, GraphError, build_graph, enumerate_paths
from .manager import (
    Ack,
    CooperationState,
    ManagerError,
    NoRobotActionInFlightError,
    Outcome,
    Phase,
    StaleSeqError,
    on_ack,
    on_intervention,
    start,
)
from .model import ModelError, generate_palletization, parse_model, serialize_model

PROTOCOL = "coplan-proto/1"

CLIENT_EVENT_KINDS = {"action_done", "intervene", "handover_confirm"}


class ServiceError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code
        self.message = message


def canonical(doc) -> str:
    """Newline-free canonical JSON used for frames and snapshots."""
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


@dataclass
class SessionConfig:
    model_text: str
    scale: float = 0.1
    timeout_s: float = 120.0
    seed: int = 0
    robot: dict = field(default_factory=dict)

    def to_doc(self) -> dict:
        return {
            "model_text": self.model_text,
            "scale": self.scale,
            "timeout_s": self.timeout_s,
            "seed": self.seed,
            "robot": self.robot,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "SessionConfig":
        return cls(
            model_text=doc["model_text"],
            scale=float(doc.get("scale", 0.1)),
            timeout_s=float(doc.get("timeout_s", 120.0)),
            seed=int(doc.get("seed", 0)),
            robot=dict(doc.get("robot", {})),
        )


class Session:
    """One cooperation run and its connected clients."""

    def __init__(self, session_id: str, config: SessionConfig):
        self.id = session_id
        self.config = config
        self.graph: AndOrGraph = build_graph(parse_model(config.model_text))
        enumerate_paths(self.graph)
        self.robot = RobotModel(
            durations={k: Duration.parse(v)
                       for k, v in config.robot.get("durations", {}).items()},
            grasp_failure_prob=float(config.robot.get("grasp_failure_prob", 0.0)),
        )
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(config.seed)))
        self.robot.begin_trial(rng)
        self.state: CooperationState | None = None
        self.journal: list[dict] = []
        self.seq = 0  # broadcast frame counter, strictly increasing
        self.t0 = 0.0
        self.closed = False
        self.t_h_s = 0.0
        self.t_r_s = 0.0
        self.last_t = 0.0
        self.lock = asyncio.Lock()
        self.clients: set = set()
        self._tasks: set[asyncio.Task] = set()
        self._journal_path: str | None = None
        log_dir = os.environ.get("COPLAN_LOG_DIR")
        if log_dir:
            os.makedirs(log_dir, exist_ok=True)
            self._journal_path = os.path.join(log_dir, f"{session_id}.jsonl")

    # -- journal ------------------------------------------------------

    def record(self, entry: dict) -> None:
        self.journal.append(entry)
        if self._journal_path:
            with open(self._journal_path, "a") as fh:
                fh.write(canonical(entry) + "\n")

    # -- deterministic core -------------------------------------------

    def boot(self, t0: float, record: bool = True) -> list[dict]:
        """Start the run; shared verbatim by creation and replay."""
        self.t0 = t0
        self.last_t = t0
        if record:
            self.record({
                "kind": "created", "t": t0, "session": self.id,
                "config": self.config.to_doc(),
            })
        self.state, _suggestion = start(self.graph, now=t0)
        return self._frames_after(t0)

    def apply(self, entry: dict, record: bool = True) -> list[dict]:
        """Apply one journaled input event and return the frames to send.

        ``entry`` shapes:
          {"kind": "client", "t": ..., "event": {...}}   client event
          {"kind": "robot_done", "t": ..., "seq": ..., "action": ..., "arc": ...,
           "outcome": "success"}                        server robot completion
          {"kind": "timeout", "t": ..., "seq": ...}      watchdog expiry
        """
        assert self.state is not None
        kind = entry["kind"]
        t = entry["t"]
        saved = (self.t_h_s, self.t_r_s, self.last_t, self.seq)
        try:
            if kind == "client":
                self.last_t = t
                frames = self._apply_client(entry["event"], t)
            elif kind == "robot_done":
                pending = self.state.pending
                if pending is None or pending.seq != entry["seq"]:
                    return []  # superseded in flight, nothing changes
                self.t_r_s += t - pending.issued_at
                self.last_t = t
                ack = Ack(seq=entry["seq"], action=entry["action"],
                          outcome=Outcome.SUCCESS, performed_by=AgentKind.ROBOT,
                          received_at=t, arc=entry["arc"])
                on_ack(self.state, ack, now=t)
                frames = self._frames_after(t)
            elif kind == "timeout":
                pending = self.state.pending
                if pending is None or pending.seq != entry["seq"]:
                    return []
                self.last_t = t
                self.state.phase = Phase.FAILED
                self.state.failure_reason = "timeout"
                self.state.pending = None
                frames = self._frames_after(t)
                frames.append(self._frame("error", {
                    "code": "timeout",
                    "message": "human turn exceeded the session timeout",
                }))
            else:
                raise ServiceError("protocol", f"unknown journal entry kind {kind!r}")
        except ServiceError:
            # rejected inputs leave no trace: restore the accumulators the
            # partial handling may have touched and never journal the entry
            self.t_h_s, self.t_r_s, self.last_t, self.seq = saved
            raise
        if record:
            self.record(entry)
        if self.state.phase in (Phase.DONE, Phase.FAILED):
            self.closed = True
        return frames

    def _apply_client(self, event: dict, t: float) -> list[dict]:
        state = self.state
        assert state is not None
        kind = event.get("kind")
        payload = event.get("payload") or {}
        if self.closed:
            raise ServiceError("session-closed", "session is no longer running")
        pending = state.pending
        if kind == "action_done":
            if pending is None or pending.agent is not AgentKind.HUMAN:
                raise ServiceError("invalid-transition", "no human action is pending")
            ref = payload.get("suggestion", pending.seq)
            if ref != pending.seq:
                raise ServiceError("stale-seq",
                                   f"suggestion {ref} is not pending (now {pending.seq})")
            action = payload.get("action", pending.action.name)
            arc = payload.get("arc")
            self.t_h_s += t - pending.issued_at
            ack = Ack(seq=pending.seq, action=action, outcome=Outcome.SUCCESS,
                      performed_by=AgentKind.HUMAN, received_at=t,
                      arc=arc if arc is not None else (
                          pending.arc if action == pending.action.name else None))
            try:
                on_ack(state, ack, now=t)
            except StaleSeqError as e:
                raise ServiceError("stale-seq", str(e)) from e
            except ManagerError as e:
                raise ServiceError("invalid-transition", str(e)) from e
            return self._frames_after(t)
        if kind == "handover_confirm":
            if pending is None or pending.agent is not AgentKind.JOINT:
                raise ServiceError("invalid-transition", "no joint action is pending")
            ref = payload.get("suggestion", pending.seq)
            if ref != pending.seq:
                raise ServiceError("stale-seq",
                                   f"suggestion {ref} is not pending (now {pending.seq})")
            self.t_h_s += t - pending.issued_at
            ack = Ack(seq=pending.seq, action=pending.action.name,
                      outcome=Outcome.SUCCESS, performed_by=AgentKind.JOINT,
                      received_at=t, arc=pending.arc)
            try:
                on_ack(state, ack, now=t)
            except ManagerError as e:
                raise ServiceError("invalid-transition", str(e)) from e
            return self._frames_after(t)
        if kind == "intervene":
            if pending is None or pending.agent is not AgentKind.ROBOT:
                raise ServiceError("invalid-transition", "no robot action is in flight")
            self.t_r_s += t - pending.issued_at
            try:
                on_intervention(state, now=t)
            except NoRobotActionInFlightError as e:
                raise ServiceError("invalid-transition", str(e)) from e
            return self._frames_after(t)
        raise ServiceError("protocol", f"unknown client event kind {kind!r}")

    def _frames_after(self, t: float) -> list[dict]:
        """Build the broadcast frames for the transition that just ran."""
        assert self.state is not None
        frames = []
        pending = self.state.pending
        if pending is not None:
            frames.append(self._frame("suggestion", {
                "suggestion": pending.seq,
                "arc": pending.arc,
                "action": pending.action.name,
                "agent": pending.agent.value,
                "binding": pending.binding.value,
                "issued_at": pending.issued_at,
            }))
        frames.append(self._frame("state", self.state_payload(t)))
        if self.state.phase in (Phase.DONE, Phase.FAILED):
            frames.append(self._frame("metrics", self.metrics_payload()))
        return frames

    def _frame(self, kind: str, payload: dict) -> dict:
        self.seq += 1
        return {"kind": kind, "session": self.id, "seq": self.seq, "payload": payload}

    # -- payloads ------------------------------------------------------

    def metrics_payload(self) -> dict:
        assert self.state is not None
        return {
            "t_m": self.state.timing.total,
            "t_h": self.t_h_s,
            "t_r": self.t_r_s,
            "t_c": self.last_t - self.t0,
        }

    def state_payload(self, t: float) -> dict:
        state = self.state
        assert state is not None
        g = self.graph
        status = g.status()
        pending = state.pending
        pending_doc = None
        robot_doc = None
        if pending is not None:
            pending_doc = {
                "suggestion": pending.seq,
                "arc": pending.arc,
                "action": pending.action.name,
                "agent": pending.agent.value,
                "binding": pending.binding.value,
                "issued_at": pending.issued_at,
            }
            if pending.agent is AgentKind.ROBOT:
                robot_doc = {
                    "suggestion": pending.seq,
                    "action": pending.action.name,
                    "arc": pending.arc,
                    "started_at": pending.issued_at,
                    "duration": self.robot.action_duration(pending.action.name) * self.config.scale,
                }
        slots = []
        placed = 0
        for name in sorted(g.nodes, key=lambda n: (len(n), n)):
            node = g.nodes[name]
            if node.is_leaf:
                continue
            done_arcs = [a for a in sorted(g.incoming[name]) if g.arcs[a].done]
            if done_arcs and node.solved:
                placed += 1
                slots.append({
                    "node": name, "arc": done_arcs[0],
                    "kind": "handover" if done_arcs[0].startswith("hw") else "plain",
                })
            else:
                slots.append({"node": name, "arc": None, "kind": None})
        path = state.current_path
        return {
            "protocol": PROTOCOL,
            "t": t,
            "phase": state.phase.value,
            "status": status.kind.value,
            "failure_reason": state.failure_reason,
            "pending": pending_doc,
            "robot_executing": robot_doc,
            "alternatives": [
                {"arc": arc, "action": act.name, "agent": act.agent.value}
                for arc, act in g.feasible_alternatives()
            ],
            "progress": {"placed": placed, "total": len(slots), "slots": slots},
            "path": {"arcs": list(path.path_arcs), "cost": path.cost} if path else None,
            "metrics": self.metrics_payload(),
            "solved_nodes": sorted(n for n, node in g.nodes.items() if node.solved),
            "done_arcs": sorted(a for a, arc in g.arcs.items() if arc.done),
            "suppressed_arcs": sorted(a for a, arc in g.arcs.items() if arc.suppressed),
            "interventions": state.interventions,
        }

    def snapshot_doc(self) -> dict:
        return {
            "protocol": PROTOCOL,
            "session": self.id,
            "seq": self.seq,
            "journal_len": len(self.journal),
            "state": self.state_payload(self.last_t),
            "metrics": self.metrics_payload(),
        }


def replay_session(journal: list[dict]) -> Session:
    """Rebuild a session purely from its journal."""
    if not journal or journal[0]["kind"] != "created":
        raise ServiceError("protocol", "journal must begin with a created record")
    head = journal[0]
    session = Session(head["session"], SessionConfig.from_doc(head["config"]))
    session.boot(head["t"], record=False)
    session.journal = [head]
    for entry in journal[1:]:
        session.journal.append(entry)
        try:
            session.apply(entry, record=False)
        except ServiceError:
            # rejected inputs never make it into a live journal; skip
            # defensively if one shows up
            continue
    return session


# ---------------------------------------------------------------------------
# HTTP + WebSocket app


def _model_text_from_ref(ref) -> str:
    if isinstance(ref, dict) and "palletize" in ref:
        p = ref["palletize"]
        parts = int(p.get("parts", 0)) if isinstance(p, dict) else int(p)
        try:
            return serialize_model(generate_palletization(parts))
        except ModelError as e:
            raise HTTPException(status_code=422, detail=f"model-invalid: {e}") from e
    if isinstance(ref, dict) and "text" in ref:
        text = str(ref["text"])
    elif isinstance(ref, dict) and "path" in ref:
        try:
            with open(ref["path"]) as fh:
                text = fh.read()
        except OSError as e:
            raise HTTPException(status_code=404, detail=f"model-not-found: {e}") from e
    else:
        raise HTTPException(status_code=422, detail="model reference must use palletize, text or path")
    try:
        # canonicalize early so the journal carries a stable document
        return serialize_model(parse_model(text))
    except ModelError as e:
        raise HTTPException(status_code=422, detail=f"model-invalid: {e}") from e


def create_app() -> FastAPI:
    app = FastAPI(title="coplan session service")
    sessions: dict[str, Session] = {}
    app.state.sessions = sessions

    def get_session(session_id: str) -> Session:
        session = sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail="no such session")
        return session

    async def send_frames(session: Session, frames: list[dict]) -> None:
        dead = []
        for ws in session.clients:
            for frame in frames:
                try:
                    await ws.send_text(canonical(frame))
                except Exception:
                    dead.append(ws)
                    break
        for ws in dead:
            session.clients.discard(ws)

    def spawn(session: Session, coro) -> None:
        task = asyncio.create_task(coro)
        session._tasks.add(task)
        task.add_done_callback(session._tasks.discard)

    async def after_transition(session: Session, frames: list[dict]) -> None:
        await send_frames(session, frames)
        state = session.state
        if state is None or session.closed or state.pending is None:
            return
        pending = state.pending
        if pending.agent is AgentKind.ROBOT:
            duration = session.robot.action_duration(pending.action.name) * session.config.scale
            spawn(session, robot_turn(session, pending.seq, pending.arc,
                                      pending.action.name, duration))
        else:
            spawn(session, watchdog(session, pending.seq))

    async def robot_turn(session: Session, seq: int, arc: str, action: str,
                         duration: float) -> None:
        await asyncio.sleep(duration)
        async with session.lock:
            state = session.state
            if (session.closed or state is None or state.pending is None
                    or state.pending.seq != seq):
                return
            entry = {"kind": "robot_done", "t": time.time(), "seq": seq,
                     "action": action, "arc": arc, "outcome": "success"}
            frames = session.apply(entry)
            await after_transition(session, frames)

    async def watchdog(session: Session, seq: int) -> None:
        await asyncio.sleep(session.config.timeout_s)
        async with session.lock:
            state = session.state
            if (session.closed or state is None or state.pending is None
                    or state.pending.seq != seq):
                return
            entry = {"kind": "timeout", "t": time.time(), "seq": seq}
            frames = session.apply(entry)
            await after_transition(session, frames)

    @app.get("/healthz", response_class=PlainTextResponse)
    async def healthz() -> str:
        return "ok"

    @app.post("/session")
    async def create_session(body: dict):
        model_text = _model_text_from_ref(body.get("model"))
        config = SessionConfig(
            model_text=model_text,
            scale=float(body.get("scale", 0.1)),
            timeout_s=float(body.get("timeout", 120.0)),
            seed=int(body.get("seed", 0)),
            robot=dict(body.get("robot", {})),
        )
        session_id = uuid.uuid4().hex[:12]
        try:
            session = Session(session_id, config)
        except (ModelError, GraphError) as e:
            raise HTTPException(status_code=422, detail=f"model-invalid: {e}") from e
        sessions[session_id] = session
        async with session.lock:
            frames = session.boot(time.time())
            await after_transition(session, frames)
            return {
                "protocol": PROTOCOL,
                "session": session_id,
                "state": session.state_payload(session.last_t),
            }

    @app.get("/session/{session_id}")
    async def snapshot(session_id: str, source: str = "live"):
        session = get_session(session_id)
        async with session.lock:
            if source == "replay":
                doc = replay_session(session.journal).snapshot_doc()
            elif source == "live":
                doc = session.snapshot_doc()
            else:
                raise HTTPException(status_code=422, detail="source must be live or replay")
            return PlainTextResponse(canonical(doc), media_type="application/json")

    @app.websocket("/session/{session_id}/ws")
    async def session_ws(ws: WebSocket, session_id: str):
        session = sessions.get(session_id)
        if session is None:
            await ws.close(code=4404)
            return
        await ws.accept()
        session.clients.add(ws)
        try:
            async with session.lock:
                # connect-time restatement of the current state; reuses the
                # last broadcast seq so journal replay stays seq-exact
                hello = {"kind": "state", "session": session.id,
                         "seq": session.seq,
                         "payload": session.state_payload(session.last_t)}
                await ws.send_text(canonical(hello))
            while True:
                raw = await ws.receive_text()
                try:
                    event = json.loads(raw)
                except json.JSONDecodeError:
                    await ws.send_text(canonical({
                        "kind": "error", "session": session.id, "seq": 0,
                        "payload": {"code": "protocol", "message": "frame is not JSON"},
                    }))
                    continue
                kind = event.get("kind")
                if kind not in CLIENT_EVENT_KINDS:
                    await ws.send_text(canonical({
                        "kind": "error", "session": session.id, "seq": 0,
                        "payload": {"code": "protocol",
                                    "message": f"unknown client event kind {kind!r}"},
                    }))
                    continue
                async with session.lock:
                    entry = {"kind": "client", "t": time.time(),
                             "event": {"kind": kind, "payload": event.get("payload") or {}}}
                    try:
                        frames = session.apply(entry)
                    except ServiceError as e:
                        await ws.send_text(canonical({
                            "kind": "error", "session": session.id, "seq": 0,
                            "payload": {"code": e.code, "message": e.message},
                        }))
                        continue
                    await after_transition(session, frames)
        except WebSocketDisconnect:
            pass
        finally:
            session.clients.discard(ws)

    return app
