import json

import pytest

from coplan.graph import (
    AgentKind,
    NoViablePathError,
    StatusKind,
    build_graph,
    enumerate_paths,
)
from coplan.manager import (
    Ack,
    Binding,
    InfeasibleActionError,
    NoRobotActionInFlightError,
    Outcome,
    Phase,
    ProtocolViolationError,
    StaleSeqError,
    event_log_lines,
    on_ack,
    on_intervention,
    start,
    timing_report,
)
from coplan.model import ActionSpec, ArcSpec, GraphSpec, NodeSpec, generate_palletization

import oracles
from conftest import two_route_spec


def fresh(spec):
    g = build_graph(spec)
    enumerate_paths(g)
    return g


def ok_ack(suggestion, at, action=None, arc=None, agent=None):
    return Ack(seq=suggestion.seq, action=action or suggestion.action.name,
               outcome=Outcome.SUCCESS,
               performed_by=agent or suggestion.agent,
               received_at=at, arc=arc)


def drive_compliant(graph, step_us=1_000_000, latency_us=0):
    """Ack every suggestion as given; returns (state, ack count)."""
    state, suggestion = start(graph, now=0)
    t = 0
    n = 0
    while suggestion is not None:
        t = suggestion.issued_at + step_us
        res = on_ack(state, ok_ack(suggestion, t, arc=suggestion.arc),
                     now=t + latency_us)
        n += 1
        suggestion = res.suggestion
    return state, n


class TestStartAndBindings:
    def test_first_suggestion_on_cheapest_path(self):
        g = fresh(generate_palletization(2))
        state, s = start(g, now=0)
        assert state.phase is Phase.RUNNING
        assert s.arc == "h_1" and s.action.name == "inspect"
        assert s.agent is AgentKind.HUMAN
        assert s.seq == 1 and s.issued_at == 0

    def test_binding_tracks_agent_kind(self):
        g = fresh(generate_palletization(1))
        state, s = start(g, now=0)
        seen = {}
        t = 0
        while s is not None:
            seen[s.action.name] = s.binding
            t = s.issued_at + 10
            s = on_ack(state, ok_ack(s, t, arc=s.arc), now=t).suggestion
        assert seen["inspect"] is Binding.SUGGESTED
        assert seen["approach-part"] is Binding.IMPOSED
        g2 = fresh(generate_palletization(1))
        g2.suppress_arc("h_1")
        state2, s2 = start(g2, now=0)
        bindings = {}
        t = 0
        while s2 is not None:
            bindings[s2.action.name] = s2.binding
            t = s2.issued_at + 10
            s2 = on_ack(state2, ok_ack(s2, t, arc=s2.arc), now=t).suggestion
        assert bindings["handover"] is Binding.COORDINATED

    def test_start_on_solved_graph(self):
        g = fresh(two_route_spec())
        for name in ("pick", "place"):
            g.record_action_finished("stage1", name)
        g.update_status(["stage1"])
        g.record_action_finished("stage2", "fasten")
        g.update_status(["stage2"])
        state, s = start(g, now=0)
        assert s is None and state.phase is Phase.DONE

    def test_start_on_dead_graph(self):
        g = fresh(two_route_spec())
        g.suppress_arc("stage1")
        g.suppress_arc("direct")
        with pytest.raises(NoViablePathError):
            start(g, now=0)


class TestCompliantRun:
    def test_full_palletization(self):
        g = fresh(generate_palletization(3))
        state, n = drive_compliant(g)
        assert state.phase is Phase.DONE
        assert n == 21  # 3 parts x 7 actions
        assert g.status().kind is StatusKind.SOLVED
        assert state.current_path.cost == 3.0

    def test_suggestions_follow_execution_order(self):
        g = fresh(generate_palletization(2))
        state, s = start(g, now=0)
        order = []
        t = 0
        while s is not None:
            order.append((s.arc, s.action.name))
            t = s.issued_at + 5
            s = on_ack(state, ok_ack(s, t, arc=s.arc), now=t).suggestion
        assert order[0] == ("h_1", "inspect")
        assert order[6] == ("h_1", "start-pose")
        assert order[7] == ("h_2", "inspect")
        assert len(order) == 14

    def test_seq_strictly_increasing(self):
        g = fresh(generate_palletization(2))
        state, s = start(g, now=0)
        seqs = []
        t = 0
        while s is not None:
            seqs.append(s.seq)
            t = s.issued_at + 5
            s = on_ack(state, ok_ack(s, t, arc=s.arc), now=t).suggestion
        assert seqs == list(range(1, 15))


class TestProtocolErrors:
    def test_stale_seq(self):
        g = fresh(generate_palletization(1))
        state, s = start(g, now=0)
        bad = Ack(seq=s.seq + 7, action=s.action.name, outcome=Outcome.SUCCESS,
                  performed_by=s.agent, received_at=5, arc=s.arc)
        with pytest.raises(StaleSeqError):
            on_ack(state, bad, now=5)

    def test_ack_after_done(self):
        g = fresh(generate_palletization(1))
        state, n = drive_compliant(g)
        stray = Ack(seq=99, action="inspect", outcome=Outcome.SUCCESS,
                    performed_by=AgentKind.HUMAN, received_at=99)
        with pytest.raises(ProtocolViolationError):
            on_ack(state, stray, now=99)

    def test_infeasible_action(self):
        g = fresh(generate_palletization(1))
        state, s = start(g, now=0)
        bad = ok_ack(s, 5, action="palletize")  # hw_1 offers it later, not now
        with pytest.raises(InfeasibleActionError):
            on_ack(state, bad, now=5)

    def test_robot_cannot_deviate(self):
        g = fresh(generate_palletization(1))
        state, s = start(g, now=0)
        t = 0
        while s.agent is not AgentKind.ROBOT:
            t = s.issued_at + 5
            s = on_ack(state, ok_ack(s, t, arc=s.arc), now=t).suggestion
        swapped = ok_ack(s, t + 5, action="start-pose")
        with pytest.raises(ProtocolViolationError):
            on_ack(state, swapped, now=t + 5)


def deviation_spec():
    """Root reachable by a suggested two-step route or a dearer escape."""
    return GraphSpec(
        name="deviate",
        nodes=[NodeSpec(name="floor", weight=0.0, root=False, solved=True),
               NodeSpec(name="top", weight=0.0, root=True, solved=False)],
        arcs=[
            ArcSpec(name="ladder", parent="top", children=["floor"], weight=1.0,
                    actions=[ActionSpec(name="climb", agent="human"),
                             ActionSpec(name="hoist", agent="robot")]),
            ArcSpec(name="scaffold", parent="top", children=["floor"], weight=4.0,
                    actions=[ActionSpec(name="bolt", agent="human"),
                             ActionSpec(name="lift", agent="robot"),
                             ActionSpec(name="weld", agent="human")]),
        ])


class TestDeviation:
    def test_followup_stays_on_deviated_arc(self):
        g = fresh(deviation_spec())
        state, s = start(g, now=0)
        assert s.arc == "ladder" and s.action.name == "climb"
        # human performs the scaffold route's first action instead
        res = on_ack(state, ok_ack(s, 5, action="bolt"), now=5)
        assert "deviation" in (res.note or "")
        assert res.suggestion.arc == "scaffold"
        assert res.suggestion.action.name == "lift"

    def test_replan_is_argmin_over_paths_containing_arc(self):
        g = fresh(deviation_spec())
        state, s = start(g, now=0)
        on_ack(state, ok_ack(s, 5, action="bolt"), now=5)
        onodes, oarcs = oracles.flat_state(g)
        expected = oracles.min_viable_cost(onodes, oarcs, "top",
                                           must_include="scaffold")
        assert abs(state.current_path.cost - expected) <= 1e-9

    def test_deviated_run_completes(self):
        g = fresh(deviation_spec())
        state, s = start(g, now=0)
        res = on_ack(state, ok_ack(s, 5, action="bolt"), now=5)
        s = res.suggestion
        t = 5
        while s is not None:
            t = s.issued_at + 5
            s = on_ack(state, ok_ack(s, t, arc=s.arc), now=t).suggestion
        assert state.phase is Phase.DONE
        assert set(state.current_path.path_arcs) == {"scaffold"}

    def test_ambiguous_action_resolves_to_lightest_arc(self):
        spec = GraphSpec(
            name="ambiguous",
            nodes=[NodeSpec(name="a", weight=0.0, root=False, solved=True),
                   NodeSpec(name="r", weight=0.0, root=True, solved=False)],
            arcs=[
                ArcSpec(name="beta", parent="r", children=["a"], weight=1.0,
                        actions=[ActionSpec(name="go", agent="human")]),
                ArcSpec(name="alpha", parent="r", children=["a"], weight=1.0,
                        actions=[ActionSpec(name="go", agent="human")]),
                ArcSpec(name="zcheap", parent="r", children=["a"], weight=0.5,
                        actions=[ActionSpec(name="go", agent="human"),
                                 ActionSpec(name="settle", agent="human")]),
            ])
        g = fresh(spec)
        state, s = start(g, now=0)
        assert s.arc == "zcheap"  # cheapest route suggested first
        # ack omitting the arc: matches the pending suggestion directly
        res = on_ack(state, ok_ack(s, 5), now=5)
        assert res.suggestion.arc == "zcheap"

    def test_ambiguous_deviation_prefers_weight_then_name(self):
        spec = GraphSpec(
            name="ambiguous2",
            nodes=[NodeSpec(name="a", weight=0.0, root=False, solved=True),
                   NodeSpec(name="r", weight=0.0, root=True, solved=False)],
            arcs=[
                ArcSpec(name="keep", parent="r", children=["a"], weight=0.5,
                        actions=[ActionSpec(name="steady", agent="human"),
                                 ActionSpec(name="done", agent="human")]),
                ArcSpec(name="beta", parent="r", children=["a"], weight=1.0,
                        actions=[ActionSpec(name="go", agent="human")]),
                ArcSpec(name="alpha", parent="r", children=["a"], weight=1.0,
                        actions=[ActionSpec(name="go", agent="human")]),
            ])
        g = fresh(spec)
        state, s = start(g, now=0)
        assert s.arc == "keep"
        # deviating with "go" matches alpha and beta; alpha wins the tie
        res = on_ack(state, ok_ack(s, 5, action="go"), now=5)
        assert state.phase is Phase.DONE
        assert g.arcs["alpha"].done and not g.arcs["beta"].done


class TestIntervention:
    def run_until(self, state, s, action_name):
        t = 0
        while s is not None and s.action.name != action_name:
            t = s.issued_at + 10
            s = on_ack(state, ok_ack(s, t, arc=s.arc), now=t).suggestion
        return s

    def test_robot_failure_switches_to_handover(self):
        g = fresh(generate_palletization(2))
        state, s = start(g, now=0)
        s = self.run_until(state, s, "approach-goal")
        assert s.arc == "h_1"
        fail = Ack(seq=s.seq, action=s.action.name, outcome=Outcome.FAILURE,
                   performed_by=AgentKind.ROBOT, received_at=s.issued_at + 3,
                   arc=s.arc)
        res = on_ack(state, fail, now=s.issued_at + 3)
        assert res.phase is Phase.INTERVENTION
        assert state.interventions == 1
        assert g.arcs["h_1"].suppressed
        # inspect..grasp were already done on h_1 and carry over verbatim,
        # so the handover is suggested immediately
        assert res.suggestion.arc == "hw_1"
        assert res.suggestion.action.name == "handover"
        assert res.suggestion.binding is Binding.COORDINATED

    def test_intervention_phase_closes_when_disputed_node_solves(self):
        g = fresh(generate_palletization(2))
        state, s = start(g, now=0)
        s = self.run_until(state, s, "approach-goal")
        fail = Ack(seq=s.seq, action=s.action.name, outcome=Outcome.FAILURE,
                   performed_by=AgentKind.ROBOT, received_at=100, arc=s.arc)
        res = on_ack(state, fail, now=100)
        s = res.suggestion
        phases = []
        t = 100
        while s is not None:
            phases.append((s.arc, state.phase))
            t = s.issued_at + 10
            s = on_ack(state, ok_ack(s, t, arc=s.arc), now=t).suggestion
        assert state.phase is Phase.DONE
        assert ("hw_1", Phase.INTERVENTION) in phases
        assert ("h_2", Phase.RUNNING) in phases
        assert state.current_path.cost == 5.0  # hw_1 (4) + h_2 (1)

    def test_on_intervention_wrapper(self):
        g = fresh(generate_palletization(1))
        state, s = start(g, now=0)
        with pytest.raises(NoRobotActionInFlightError):
            on_intervention(state, now=1)  # human action pending
        s = self.run_until(state, s, "approach-goal")
        res = on_intervention(state, now=s.issued_at + 2)
        assert res.phase is Phase.INTERVENTION
        assert res.suggestion.action.name == "handover"

    def test_failure_with_no_alternative_fails_run(self):
        spec = GraphSpec(
            name="single",
            nodes=[NodeSpec(name="a", weight=0.0, root=False, solved=True),
                   NodeSpec(name="r", weight=0.0, root=True, solved=False)],
            arcs=[ArcSpec(name="only", parent="r", children=["a"], weight=1.0,
                          actions=[ActionSpec(name="move", agent="robot")])])
        g = fresh(spec)
        state, s = start(g, now=0)
        fail = Ack(seq=s.seq, action="move", outcome=Outcome.FAILURE,
                   performed_by=AgentKind.ROBOT, received_at=2, arc=s.arc)
        res = on_ack(state, fail, now=2)
        assert res.phase is Phase.FAILED
        assert state.failure_reason == "robot-action-failure"

    def test_human_failure_fails_run(self):
        g = fresh(generate_palletization(1))
        state, s = start(g, now=0)
        fail = Ack(seq=s.seq, action=s.action.name, outcome=Outcome.FAILURE,
                   performed_by=AgentKind.HUMAN, received_at=2, arc=s.arc)
        res = on_ack(state, fail, now=2)
        assert res.phase is Phase.FAILED
        assert state.failure_reason == "human-action-failure"

    def test_carry_over_counts_in_note(self):
        g = fresh(generate_palletization(1))
        state, s = start(g, now=0)
        s = self.run_until(state, s, "approach-goal")
        res = on_intervention(state, now=50)
        assert "carried=4" in res.note


def thirty_action_spec():
    acts = [ActionSpec(name=f"step{i:02d}",
                       agent="human" if i % 2 == 0 else "robot")
            for i in range(30)]
    return GraphSpec(
        name="belt",
        nodes=[NodeSpec(name="raw", weight=0.0, root=False, solved=True),
               NodeSpec(name="done", weight=0.0, root=True, solved=False)],
        arcs=[ArcSpec(name="belt", parent="done", children=["raw"], weight=1.0,
                      actions=acts)])


class TestTiming:
    def test_29_gap_fixture_totals_2_49(self):
        # 30 suggestions in a row; each follow-up issued 0.086 s after the
        # previous ack -> 29 decision gaps
        g = fresh(thirty_action_spec())
        latency_us = 86_000
        state, n = drive_compliant(g, step_us=1_000_000, latency_us=latency_us)
        assert n == 30
        record = timing_report(state)
        assert len(record.gaps) == 29
        assert record.total == 29 * latency_us  # 2_494_000 us
        assert round(record.total / 1e6, 2) == 2.49

    def test_no_gap_recorded_after_terminal_ack(self):
        g = fresh(generate_palletization(1))
        state, n = drive_compliant(g, latency_us=10_000)
        assert n == 7
        assert len(timing_report(state).gaps) == 6

    def test_zero_latency_zero_total(self):
        g = fresh(generate_palletization(1))
        state, _ = drive_compliant(g, latency_us=0)
        assert timing_report(state).total == 0


class TestEventLog:
    def test_lines_parse_and_cover_run(self):
        g = fresh(generate_palletization(1))
        state, _ = drive_compliant(g)
        lines = event_log_lines(state)
        kinds = [json.loads(line)["kind"] for line in lines]
        assert kinds.count("suggest") == 7
        assert kinds.count("ack") == 7
        assert kinds[-1] == "done"

    def test_intervention_logged(self):
        g = fresh(generate_palletization(1))
        state, s = start(g, now=0)
        t = 0
        while s.action.name != "approach-goal":
            t = s.issued_at + 10
            s = on_ack(state, ok_ack(s, t, arc=s.arc), now=t).suggestion
        on_intervention(state, now=t + 5)
        kinds = [json.loads(line)["kind"] for line in event_log_lines(state)]
        assert "intervention" in kinds
