"""Discrete-event simulation of cooperation runs.

Time is virtual and counted in integer microseconds.  Durations are
specified in seconds and converted once on entry; from then on every
timestamp, every interval and every aggregate is exact integer
arithmetic, so the accounting identity

    total time == planner overhead + human time + robot time

holds to the microsecond on every turn-taking trial, and identical
seeds reproduce identical event logs byte for byte.

Accounting rules:

* the interval from issuing a suggestion to receiving its ack belongs
  to the acting agent (human intervals include the pose-recognition
  latency after a part is delivered, joint actions count as human
  time);
* the interval from an ack to the next suggestion belongs to the
  planner;
* a stopped robot action contributes only its elapsed portion.
"""

from __future__ import annotations

import csv
import json
import os
import statistics
from dataclasses import dataclass, field

import numpy as np

from .agents import (
    SILENT,
    CompliantPolicy,
    Duration,
    HumanPolicy,
    InterventionistPolicy,
    RobotModel,
    ScriptedPolicy,
    robot_execute,
)
from .graph import AgentKind, AndOrGraph, build_graph, enumerate_paths
from .manager import Ack, AckResult, Outcome, Phase, on_ack, on_intervention, start
from .model import GraphSpec, generate_palletization, parse_model


class EngineError(Exception):
    pass


class ConfigError(EngineError):
    pass


US = 1_000_000


def to_us(seconds: float) -> int:
    return int(round(seconds * US))


#: action whose completion is detected through the perception layer
PERCEIVED_ACTION = "deliver-part"

#: robot action during which an operator stop lands
TRANSPORT_ACTION = "approach-goal"


@dataclass
class SimConfig:
    model: GraphSpec
    policy: HumanPolicy = field(default_factory=CompliantPolicy)
    robot: RobotModel = field(default_factory=RobotModel)
    perception_latency: Duration = field(default_factory=lambda: Duration.const(0.0))
    manager_latency: Duration = field(default_factory=lambda: Duration.const(0.0))
    timeout_s: float = 120.0
    trials: int = 1
    seed: int = 0
    stop_fraction: float = 0.5


@dataclass
class TrialResult:
    trial: int
    status: str  # "success" or "failed"
    failure_reason: str | None
    t_m_us: int
    t_h_us: int
    t_r_us: int
    t_c_us: int
    hw_count: int
    arc_choices: list[tuple[str, str]]
    events: list[dict]

    @property
    def ok(self) -> bool:
        return self.status == "success"

    @property
    def t_m(self) -> float:
        return self.t_m_us / US

    @property
    def t_h(self) -> float:
        return self.t_h_us / US

    @property
    def t_r(self) -> float:
        return self.t_r_us / US

    @property
    def t_c(self) -> float:
        return self.t_c_us / US


@dataclass
class MetricStats:
    mean: float
    std: float | None  # sample std (n-1); None when fewer than two samples


@dataclass
class BatchSummary:
    results: list[TrialResult]
    success_rate: float
    failure_counts: dict[str, int]
    t_m: MetricStats | None
    t_h: MetricStats | None
    t_r: MetricStats | None
    t_c: MetricStats | None
    # mean over successful trials of the per-trial share of total time
    share_m: float | None
    share_h: float | None
    share_r: float | None

    @property
    def successes(self) -> list[TrialResult]:
        return [r for r in self.results if r.ok]


class Simulator:
    """Runs trials against one compiled model.

    The graph is built and its paths enumerated once; each trial resets
    the runtime flags instead of rebuilding, which keeps large batch
    runs cheap.
    """

    def __init__(self, config: SimConfig, compiled: AndOrGraph | None = None):
        self.config = config
        if compiled is None:
            compiled = build_graph(config.model)
            enumerate_paths(compiled)
        elif compiled.paths is None:
            enumerate_paths(compiled)
        self.graph = compiled

    def run_trial(self, seed, trial_index: int = 1) -> TrialResult:
        cfg = self.config
        if isinstance(seed, np.random.SeedSequence):
            rng = np.random.Generator(np.random.PCG64(seed))
        else:
            rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))

        # realize this trial's pace before any behavioral draws
        cfg.policy.begin_trial(rng)
        cfg.robot.begin_trial(rng)
        perception_us = to_us(cfg.perception_latency.realize(rng))
        latency_us = to_us(cfg.manager_latency.realize(rng))
        timeout_us = to_us(cfg.timeout_s)

        g = self.graph
        g.reset()
        events: list[dict] = []
        t_h = 0
        t_r = 0

        state, suggestion = start(g, now=0)
        if suggestion is None:
            return self._result(trial_index, "success", None, state, 0, 0, 0, events)

        guard = 0
        max_events = 20 * sum(len(a.actions) for a in g.arcs.values()) + 100
        end_us = 0
        while suggestion is not None:
            guard += 1
            if guard > max_events:  # pragma: no cover - safety net
                raise EngineError("simulation did not terminate")
            t0 = suggestion.issued_at
            part = g.arcs[suggestion.arc].parent
            events.append({
                "t_us": t0, "kind": "suggest", "seq": suggestion.seq,
                "arc": suggestion.arc, "action": suggestion.action.name,
                "agent": suggestion.agent.value, "binding": suggestion.binding.value,
            })

            if suggestion.agent is AgentKind.ROBOT:
                if (cfg.policy.wants_stop(part, suggestion.action, rng)
                        and state.phase is Phase.RUNNING):
                    full = to_us(cfg.robot.action_duration(suggestion.action.name))
                    elapsed = int(round(full * cfg.stop_fraction))
                    stop_at = t0 + elapsed
                    t_r += elapsed
                    events.append({
                        "t_us": stop_at, "kind": "stop", "seq": suggestion.seq,
                        "arc": suggestion.arc, "action": suggestion.action.name,
                    })
                    res = on_intervention(state, now=stop_at,
                                          issue_at=stop_at + latency_us)
                    end_us = stop_at
                else:
                    outcome = robot_execute(cfg.robot, suggestion.action, rng)
                    dur = to_us(outcome.duration)
                    ack_at = t0 + dur
                    t_r += dur
                    events.append({
                        "t_us": ack_at, "kind": "ack", "seq": suggestion.seq,
                        "arc": suggestion.arc, "action": suggestion.action.name,
                        "agent": "robot",
                        "outcome": "success" if outcome.success else "failure",
                    })
                    ack = Ack(seq=suggestion.seq, action=suggestion.action.name,
                              outcome=Outcome.SUCCESS if outcome.success else Outcome.FAILURE,
                              performed_by=AgentKind.ROBOT, received_at=ack_at,
                              arc=suggestion.arc)
                    res = on_ack(state, ack, now=ack_at + latency_us)
                    end_us = ack_at
            else:
                alternatives = g.feasible_alternatives()
                move = cfg.policy.decide(suggestion.action, part, alternatives, rng)
                if move == SILENT:
                    fail_at = t0 + timeout_us
                    events.append({
                        "t_us": fail_at, "kind": "timeout", "seq": suggestion.seq,
                        "arc": suggestion.arc, "action": suggestion.action.name,
                    })
                    return self._result(trial_index, "failed", "timeout", state,
                                        t_h, t_r, fail_at, events)
                dur = to_us(move.duration)
                if move.action == PERCEIVED_ACTION:
                    dur += perception_us
                ack_at = t0 + dur
                t_h += dur
                events.append({
                    "t_us": ack_at, "kind": "ack", "seq": suggestion.seq,
                    "arc": suggestion.arc, "action": move.action,
                    "agent": suggestion.agent.value, "outcome": "success",
                })
                ack = Ack(seq=suggestion.seq, action=move.action,
                          outcome=Outcome.SUCCESS, performed_by=suggestion.agent,
                          received_at=ack_at,
                          arc=suggestion.arc if not move.is_deviation else None)
                res = on_ack(state, ack, now=ack_at + latency_us)
                end_us = ack_at

            suggestion = res.suggestion
            if res.phase is Phase.FAILED:
                events.append({"t_us": end_us, "kind": "end", "status": "failed",
                               "reason": state.failure_reason})
                return self._result(trial_index, "failed",
                                    state.failure_reason or "failed",
                                    state, t_h, t_r, end_us, events)

        events.append({"t_us": end_us, "kind": "end", "status": "success"})
        return self._result(trial_index, "success", None, state, t_h, t_r, end_us, events)

    def _result(self, trial_index: int, status: str, reason: str | None, state,
                t_h: int, t_r: int, t_c: int, events: list[dict]) -> TrialResult:
        t_m = int(state.timing.total)
        choices = []
        for name in sorted(self.graph.nodes):
            node = self.graph.nodes[name]
            if node.is_leaf or not node.solved:
                continue
            done_arcs = [a for a in sorted(self.graph.incoming[name])
                         if self.graph.arcs[a].done]
            if done_arcs:
                choices.append((name, done_arcs[0]))
        hw_count = sum(1 for _, arc in choices if arc.startswith("hw"))
        return TrialResult(
            trial=trial_index, status=status, failure_reason=reason,
            t_m_us=t_m, t_h_us=t_h, t_r_us=t_r, t_c_us=t_c,
            hw_count=hw_count, arc_choices=choices, events=events,
        )

    def run_batch(self) -> BatchSummary:
        seeds = np.random.SeedSequence(self.config.seed).spawn(self.config.trials)
        results = [self.run_trial(s, i + 1) for i, s in enumerate(seeds)]
        return summarize(results)


def run_trial(config: SimConfig, seed=None) -> TrialResult:
    sim = Simulator(config)
    return sim.run_trial(config.seed if seed is None else seed)


def run_batch(config: SimConfig) -> BatchSummary:
    return Simulator(config).run_batch()


def summarize(results: list[TrialResult]) -> BatchSummary:
    ok = [r for r in results if r.ok]
    failure_counts: dict[str, int] = {}
    for r in results:
        if not r.ok:
            key = r.failure_reason or "failed"
            failure_counts[key] = failure_counts.get(key, 0) + 1

    def stats(values: list[float]) -> MetricStats | None:
        if not values:
            return None
        # statistics works in exact rationals, so identical samples give
        # a standard deviation of exactly 0.0 (constant-latency batches)
        mean = statistics.mean(values)
        if len(values) < 2:
            return MetricStats(mean, None)
        return MetricStats(mean, statistics.stdev(values))

    def share(metric: str) -> float | None:
        vals = [getattr(r, metric) / r.t_c for r in ok if r.t_c_us > 0]
        if not vals:
            return None
        return statistics.mean(vals)

    return BatchSummary(
        results=results,
        success_rate=len(ok) / len(results) if results else 0.0,
        failure_counts=failure_counts,
        t_m=stats([r.t_m for r in ok]),
        t_h=stats([r.t_h for r in ok]),
        t_r=stats([r.t_r for r in ok]),
        t_c=stats([r.t_c for r in ok]),
        share_m=share("t_m"),
        share_h=share("t_h"),
        share_r=share("t_r"),
    )


def replay_metrics(events: list[dict]) -> tuple[int, int, int, int]:
    """Recompute (t_m, t_h, t_r, t_c) in microseconds from an event log.

    Used to check that a trial's metrics are a pure function of its
    recorded events.
    """
    t_m = t_h = t_r = 0
    last_response: int | None = None
    open_suggestions: dict[int, dict] = {}
    t_c = 0
    for ev in events:
        kind = ev["kind"]
        if kind == "suggest":
            if last_response is not None:
                t_m += ev["t_us"] - last_response
            open_suggestions[ev["seq"]] = ev
        elif kind == "ack":
            sug = open_suggestions.pop(ev["seq"])
            interval = ev["t_us"] - sug["t_us"]
            if ev["agent"] == "robot":
                t_r += interval
            else:
                t_h += interval
            last_response = ev["t_us"]
            t_c = ev["t_us"]
        elif kind == "stop":
            sug = open_suggestions.pop(ev["seq"])
            t_r += ev["t_us"] - sug["t_us"]
            last_response = ev["t_us"]
            t_c = ev["t_us"]
        elif kind == "timeout":
            t_c = ev["t_us"]
    return t_m, t_h, t_r, t_c


# ---------------------------------------------------------------------------
# results export


CSV_COLUMNS = ("trial", "status", "T_m", "T_h", "T_r", "T_c", "hw_count", "failure_reason")


def _row(r: TrialResult) -> dict:
    if r.ok:
        times = {
            "T_m": f"{r.t_m_us / US:.6f}",
            "T_h": f"{r.t_h_us / US:.6f}",
            "T_r": f"{r.t_r_us / US:.6f}",
            "T_c": f"{r.t_c_us / US:.6f}",
        }
    else:
        times = {"T_m": "", "T_h": "", "T_r": "", "T_c": ""}
    return {
        "trial": r.trial,
        "status": r.status,
        **times,
        "hw_count": r.hw_count,
        "failure_reason": r.failure_reason or "",
    }


def export_results(results, path: str, fmt: str | None = None) -> None:
    """Write per-trial results as CSV or JSON lines.

    The format is taken from the file extension unless given
    explicitly.  Output is byte-stable for identical inputs: fixed
    column order, six-decimal times, empty time fields on failed rows.
    """
    if isinstance(results, BatchSummary):
        results = results.results
    if fmt is None:
        ext = os.path.splitext(path)[1].lower().lstrip(".")
        fmt = ext or "csv"
    if fmt not in ("csv", "jsonl"):
        raise ConfigError(f"unsupported export format: {fmt}")
    try:
        with open(path, "w", newline="") as fh:
            if fmt == "csv":
                writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
                writer.writeheader()
                for r in results:
                    writer.writerow(_row(r))
            else:
                for r in results:
                    row = _row(r)
                    for key in ("T_m", "T_h", "T_r", "T_c"):
                        row[key] = float(row[key]) if row[key] else None
                    fh.write(json.dumps(row, separators=(",", ":")) + "\n")
    except OSError as e:
        raise EngineError(f"cannot write results to {path}: {e}") from e


# ---------------------------------------------------------------------------
# scenario files


SCENARIO_VERSION = "coplan-scenario/1"


def load_scenario(path: str) -> SimConfig:
    """Load a scenario file describing one simulation setup.

    See docs/model-format.md for the schema.  Model references inside
    the scenario resolve relative to the scenario file's directory.
    """
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read scenario {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"scenario {path} is not valid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise ConfigError("scenario top level must be an object")
    version = doc.get("version", SCENARIO_VERSION)
    if version != SCENARIO_VERSION:
        raise ConfigError(f"unsupported scenario version {version!r}")
    return scenario_config(doc, base_dir=os.path.dirname(os.path.abspath(path)))


def scenario_config(doc: dict, base_dir: str = ".") -> SimConfig:
    model_ref = doc.get("model")
    if not isinstance(model_ref, dict):
        raise ConfigError("scenario needs a model reference")
    if "palletize" in model_ref:
        p = model_ref["palletize"]
        if isinstance(p, dict):
            model = generate_palletization(
                int(p.get("parts", 0)),
                plain_weight=float(p.get("plain_weight", 1.0)),
                handover_weight=float(p.get("handover_weight", 4.0)),
            )
        else:
            model = generate_palletization(int(p))
    elif "path" in model_ref:
        model_path = os.path.join(base_dir, model_ref["path"])
        try:
            with open(model_path) as fh:
                model = parse_model(fh.read())
        except OSError as e:
            raise ConfigError(f"cannot read model {model_path}: {e}") from e
    elif "inline" in model_ref:
        model = parse_model(json.dumps(model_ref["inline"]))
    else:
        raise ConfigError("model reference must use palletize, path or inline")

    human_durations = {
        k: Duration.parse(v) for k, v in doc.get("human_durations", {}).items()
    }
    policy = build_policy(doc.get("policy", {"kind": "compliant"}), human_durations)

    robot_doc = doc.get("robot", {})
    robot = RobotModel(
        durations={k: Duration.parse(v) for k, v in robot_doc.get("durations", {}).items()},
        grasp_failure_prob=float(robot_doc.get("grasp_failure_prob", 0.0)),
        end_effector_speed_mm_s=float(robot_doc.get("end_effector_speed_mm_s", 250.0)),
        protective_stop_force_n=float(robot_doc.get("protective_stop_force_n", 100.0)),
    )
    return SimConfig(
        model=model,
        policy=policy,
        robot=robot,
        perception_latency=Duration.parse(doc.get("perception_latency", 0.0)),
        manager_latency=Duration.parse(doc.get("manager_latency", 0.0)),
        timeout_s=float(doc.get("timeout", 120.0)),
        trials=int(doc.get("trials", 1)),
        seed=int(doc.get("seed", 0)),
        stop_fraction=float(doc.get("stop_fraction", 0.5)),
    )


def build_policy(spec: dict | str, durations: dict[str, Duration] | None = None) -> HumanPolicy:
    """Build a human policy from its scenario or CLI description.

    Accepts {"kind": ...} objects or the compact CLI strings
    ``compliant``, ``intervene:P`` and ``script:FILE``.
    """
    if isinstance(spec, str):
        if spec == "compliant":
            spec = {"kind": "compliant"}
        elif spec.startswith("intervene:"):
            spec = {"kind": "interventionist", "p": float(spec.split(":", 1)[1])}
        elif spec.startswith("script:"):
            script_path = spec.split(":", 1)[1]
            try:
                with open(script_path) as fh:
                    script = json.load(fh)
            except (OSError, json.JSONDecodeError) as e:
                raise ConfigError(f"cannot read script {script_path}: {e}") from e
            spec = {"kind": "scripted", "script": script}
        else:
            raise ConfigError(f"unknown policy: {spec!r}")
    kind = spec.get("kind", "compliant")
    if kind == "compliant":
        return CompliantPolicy(durations)
    if kind == "interventionist":
        try:
            p = float(spec["p"])
        except (KeyError, TypeError, ValueError):
            raise ConfigError("interventionist policy needs a probability p") from None
        return InterventionistPolicy(p, durations)
    if kind == "scripted":
        script = spec.get("script", [])
        if not isinstance(script, list):
            raise ConfigError("scripted policy needs a list of entries")
        return ScriptedPolicy(script, durations)
    raise ConfigError(f"unknown policy kind: {kind!r}")
