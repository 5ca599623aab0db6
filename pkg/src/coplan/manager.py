"""Turn-taking coordination over an AND/OR graph.

The manager owns the conversation between the planner and the agents:
it issues one suggestion at a time (the next pending action of the
current minimum-cost path), folds acknowledgements back into the graph,
and re-plans whenever the situation changes.

Three ways a run can leave the straight path:

* a human performs a different feasible action than suggested -- the
  manager accepts it and re-plans through the arc that action belongs to;
* a robot action fails (or the human stops the robot) -- the current
  arc is abandoned, the best surviving path takes over, and any work
  shared verbatim with the abandoned arc is carried over;
* nothing feasible remains -- the run fails.

The manager never reads a clock.  Callers stamp every acknowledgement
and pass the issue time for the next suggestion, which keeps the same
code driving both the virtual-time simulator and the wall-clock
service.  Timeout enforcement also lives with the caller.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable

from .graph import (
    Action,
    AgentKind,
    AndOrGraph,
    ArcId,
    GraphError,
    NoViablePathError,
    PathSelection,
    StatusKind,
    optimal_path,
)


class ManagerError(Exception):
    pass


class StaleSeqError(ManagerError):
    pass


class InfeasibleActionError(ManagerError):
    pass


class ProtocolViolationError(ManagerError):
    pass


class NoRobotActionInFlightError(ManagerError):
    pass


class Binding(str, Enum):
    """How strongly a suggestion binds the addressed agent."""

    IMPOSED = "imposed"        # robot actions are commands
    SUGGESTED = "suggested"    # human actions may be overridden
    COORDINATED = "coordinated"  # joint actions need both sides

    def __str__(self) -> str:
        return self.value


_BINDING_FOR = {
    AgentKind.HUMAN: Binding.SUGGESTED,
    AgentKind.ROBOT: Binding.IMPOSED,
    AgentKind.JOINT: Binding.COORDINATED,
}


class Outcome(str, Enum):
    SUCCESS = "success"
    FAILURE = "failure"

    def __str__(self) -> str:
        return self.value


class Phase(str, Enum):
    RUNNING = "running"
    INTERVENTION = "intervention"
    DONE = "done"
    FAILED = "failed"

    def __str__(self) -> str:
        return self.value


@dataclass
class Suggestion:
    seq: int
    arc: ArcId
    action: Action
    agent: AgentKind
    binding: Binding
    issued_at: float


@dataclass
class Ack:
    """Agent response to a suggestion.

    ``arc`` may be left None when the reporter only knows the action
    name; the manager then resolves it to the unique feasible arc whose
    next pending action carries that name (lowest cost wins ties, then
    lexicographic arc name).
    """

    seq: int
    action: str
    outcome: Outcome
    performed_by: AgentKind
    received_at: float
    arc: ArcId | None = None


@dataclass
class TimingRecord:
    """Planner overhead accounting.

    One (ack time, next issue time) pair per issued follow-up
    suggestion; the total is the time agents spent waiting for the
    planner rather than acting.
    """

    gaps: list[tuple[float, float]] = field(default_factory=list)

    def add(self, acked_at: float, issued_at: float) -> None:
        if issued_at < acked_at:
            raise ManagerError("suggestion issued before the ack it follows")
        self.gaps.append((acked_at, issued_at))

    @property
    def total(self) -> float:
        return sum(issued - acked for acked, issued in self.gaps)


@dataclass
class CooperationState:
    graph: AndOrGraph
    selection: PathSelection | None = None
    pending: Suggestion | None = None
    phase: Phase = Phase.RUNNING
    timing: TimingRecord = field(default_factory=TimingRecord)
    seq: int = 0
    failure_reason: str | None = None
    # node whose transition is being re-routed while an intervention runs
    disputed_node: str | None = None
    interventions: int = 0
    events: list[dict] = field(default_factory=list)

    @property
    def current_path(self):
        return self.selection.path if self.selection else None


@dataclass
class AckResult:
    """What the manager decided after absorbing one ack."""

    phase: Phase
    suggestion: Suggestion | None
    note: str


def start(graph: AndOrGraph, now: float = 0.0) -> tuple[CooperationState, Suggestion | None]:
    """Open a cooperation run and issue the first suggestion.

    A graph that is already solved yields a Done state with nothing to
    suggest.  A graph with no viable path raises NoViablePathError.
    """
    state = CooperationState(graph=graph)
    status = graph.status()
    if status.solved:
        state.phase = Phase.DONE
        _log(state, "start", now, note="already-solved")
        return state, None
    if status.failed:
        raise NoViablePathError("graph has no feasible work to start from")
    state.selection = optimal_path(graph)
    suggestion = _issue(state, now, first=True)
    _log(state, "start", now, note="running")
    return state, suggestion


def on_ack(state: CooperationState, ack: Ack, now: float) -> AckResult:
    """Fold one acknowledgement into the run and decide what happens next.

    ``now`` is the caller's timestamp for when the manager's reaction
    (the next suggestion, if any) is issued; the interval from
    ``ack.received_at`` to ``now`` is recorded as planner overhead.
    """
    if state.phase not in (Phase.RUNNING, Phase.INTERVENTION):
        raise ProtocolViolationError(f"run is {state.phase}, not accepting acks")
    if state.pending is None:
        raise ProtocolViolationError("no suggestion is pending")
    if ack.seq != state.pending.seq:
        raise StaleSeqError(
            f"ack references suggestion {ack.seq}, pending is {state.pending.seq}"
        )
    _log(state, "ack", ack.received_at, arc=ack.arc, action=ack.action,
         outcome=str(ack.outcome), agent=str(ack.performed_by))

    if ack.outcome is Outcome.FAILURE:
        return _on_failure(state, ack, now)
    return _on_success(state, ack, now)


def on_intervention(state: CooperationState, now: float,
                    issue_at: float | None = None) -> AckResult:
    """Human stop request while the robot is acting.

    Synthesizes a failure acknowledgement for the in-flight robot
    action, which abandons the current arc and re-routes, normally onto
    the handover alternative.  Only legal while the run is in the
    running phase with a robot action pending.  ``issue_at`` stamps the
    follow-up suggestion (defaults to the stop time itself).
    """
    if state.phase is not Phase.RUNNING:
        raise NoRobotActionInFlightError(f"run is {state.phase}, nothing to stop")
    if state.pending is None or state.pending.agent is not AgentKind.ROBOT:
        raise NoRobotActionInFlightError("pending suggestion is not a robot action")
    _log(state, "stop", now, arc=state.pending.arc, action=state.pending.action.name)
    ack = Ack(
        seq=state.pending.seq,
        action=state.pending.action.name,
        outcome=Outcome.FAILURE,
        performed_by=AgentKind.ROBOT,
        received_at=now,
        arc=state.pending.arc,
    )
    return on_ack(state, ack, now if issue_at is None else issue_at)


def timing_report(state: CooperationState) -> TimingRecord:
    return state.timing


# ---------------------------------------------------------------------------
# internals


def _on_success(state: CooperationState, ack: Ack, now: float) -> AckResult:
    pending = state.pending
    assert pending is not None
    deviated = False
    arc_name = ack.arc
    action_name = ack.action
    # robots execute exactly what was imposed; a mismatched echo is a
    # protocol fault regardless of what else might be feasible
    if ack.performed_by is AgentKind.ROBOT and action_name != pending.action.name:
        raise ProtocolViolationError(
            "robot reported a different action than commanded"
        )
    if arc_name is None:
        arc_name = _resolve_arc(state.graph, action_name, pending)
    if arc_name != pending.arc or action_name != pending.action.name:
        deviated = True
        if ack.performed_by is AgentKind.ROBOT:
            raise ProtocolViolationError(
                "robot reported a different action than commanded"
            )

    arc = state.graph.arcs.get(arc_name)
    if arc is None or not arc.feasible:
        raise InfeasibleActionError(
            f"action {action_name!r} does not belong to a feasible arc"
        )
    nxt = arc.next_pending()
    if nxt is None or nxt.name != action_name:
        raise InfeasibleActionError(
            f"action {action_name!r} is not next in order on arc {arc_name}"
        )

    progress = state.graph.record_action_finished(arc_name, action_name)
    note = "deviation" if deviated else "advance"
    if progress.arc_done:
        status = state.graph.update_status({arc_name})
        note += "+arc-done"
        if state.disputed_node is not None and state.graph.nodes[state.disputed_node].solved:
            state.disputed_node = None
            if state.phase is Phase.INTERVENTION:
                state.phase = Phase.RUNNING
                note += "+intervention-closed"
        if status.solved:
            state.phase = Phase.DONE
            state.pending = None
            _log(state, "done", ack.received_at)
            return AckResult(state.phase, None, note + "+solved")
        if status.failed:
            return _fail(state, ack.received_at, "dead-end", note)
        try:
            state.selection = optimal_path(
                state.graph, require_arc=arc_name if deviated else None
            )
        except NoViablePathError:
            if deviated:
                # the deviated-onto arc leads nowhere; fall back to the
                # best global path before giving up
                try:
                    state.selection = optimal_path(state.graph)
                except NoViablePathError:
                    return _fail(state, ack.received_at, "no-viable-path", note)
            else:
                return _fail(state, ack.received_at, "no-viable-path", note)
    elif deviated:
        try:
            state.selection = optimal_path(state.graph, require_arc=arc_name)
        except NoViablePathError:
            try:
                state.selection = optimal_path(state.graph)
            except NoViablePathError:
                return _fail(state, ack.received_at, "no-viable-path", note)
    else:
        # mid-arc progress: refresh the pending view of the same path
        state.selection = PathSelection(
            state.selection.path, state.graph.pending_actions(state.selection.path)
        )

    if not state.selection.pending:  # pragma: no cover - implies root solved
        return _fail(state, ack.received_at, "no-pending-work", note)
    state.timing.add(ack.received_at, now)
    suggestion = _issue(state, now)
    return AckResult(state.phase, suggestion, note)


def _on_failure(state: CooperationState, ack: Ack, now: float) -> AckResult:
    pending = state.pending
    assert pending is not None
    if ack.performed_by in (AgentKind.HUMAN, AgentKind.JOINT):
        return _fail(state, ack.received_at, "human-action-failure", "failure")
    if pending.agent is not AgentKind.ROBOT:
        raise ProtocolViolationError(
            "robot failure reported while a non-robot action was pending"
        )
    failed_arc = pending.arc
    state.phase = Phase.INTERVENTION
    state.disputed_node = state.graph.arcs[failed_arc].parent
    state.interventions += 1
    _log(state, "intervention", ack.received_at, arc=failed_arc,
         action=ack.action, note=f"disputed={state.disputed_node}")
    status = state.graph.suppress_arc(failed_arc)
    _log(state, "abandon", ack.received_at, arc=failed_arc, action=ack.action)
    if status.failed:
        return _fail(state, ack.received_at, "robot-action-failure", "failure")
    try:
        state.selection = optimal_path(state.graph)
    except NoViablePathError:
        return _fail(state, ack.received_at, "robot-action-failure", "failure")
    # hand finished work over to alternatives that share the abandoned
    # arc's children and start with the same steps
    failed = state.graph.arcs[failed_arc]
    carried = 0
    for arc_name in state.selection.path.arc_set:
        other = state.graph.arcs[arc_name]
        if other.done or other is failed:
            continue
        if set(failed.children).intersection(other.children):
            carried += state.graph.carry_over_prefix(failed_arc, arc_name)
    if carried:
        state.selection = PathSelection(
            state.selection.path, state.graph.pending_actions(state.selection.path)
        )
    if not state.selection.pending:  # pragma: no cover - implies root solved
        return _fail(state, ack.received_at, "robot-action-failure", "failure")
    state.timing.add(ack.received_at, now)
    suggestion = _issue(state, now)
    return AckResult(state.phase, suggestion, f"intervention carried={carried}")


def _resolve_arc(graph: AndOrGraph, action_name: str, pending: Suggestion) -> ArcId:
    if pending.action.name == action_name:
        return pending.arc
    candidates = [
        (arc, act) for arc, act in graph.feasible_alternatives() if act.name == action_name
    ]
    if not candidates:
        raise InfeasibleActionError(
            f"no feasible arc offers {action_name!r} as its next action"
        )
    candidates.sort(key=lambda pair: (graph.arcs[pair[0]].weight, pair[0]))
    return candidates[0][0]


def _issue(state: CooperationState, now: float, first: bool = False) -> Suggestion | None:
    assert state.selection is not None
    if not state.selection.pending:
        return None
    arc_name, action = state.selection.pending[0]
    state.seq += 1
    suggestion = Suggestion(
        seq=state.seq,
        arc=arc_name,
        action=action,
        agent=action.agent,
        binding=_BINDING_FOR[action.agent],
        issued_at=now,
    )
    state.pending = suggestion
    _log(state, "suggest", now, seq=suggestion.seq, arc=arc_name,
         action=action.name, agent=str(action.agent), binding=str(suggestion.binding))
    return suggestion


def _fail(state: CooperationState, at: float, reason: str, note: str) -> AckResult:
    state.phase = Phase.FAILED
    state.failure_reason = reason
    state.pending = None
    _log(state, "failed", at, note=reason)
    return AckResult(state.phase, None, f"{note}+{reason}")


def _log(state: CooperationState, kind: str, at: float, **fields) -> None:
    event = {"kind": kind, "t": at}
    for key in ("seq", "arc", "action", "agent", "binding", "outcome", "note"):
        if key in fields and fields[key] is not None:
            event[key] = fields[key]
    state.events.append(event)


def event_log_lines(state: CooperationState) -> list[str]:
    """Stable one-line-per-event rendering for replay comparisons."""
    import json

    return [json.dumps(e, separators=(",", ":")) for e in state.events]
