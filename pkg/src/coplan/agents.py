"""Simulated agents: human behavior policies, a robot model, and poses.

Durations are described by distributions (a constant or a uniform
range) and realized once per trial: a draw fixes the pace of that
operator/robot for the whole run, which is where trial-to-trial
variance comes from.  Within a trial the same action always takes the
same time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graph import Action, AgentKind


class AgentError(Exception):
    pass


class UnknownActionError(AgentError):
    pass


class NoFeasibleChoiceError(AgentError):
    pass


class InvalidPoseError(AgentError):
    pass


# ---------------------------------------------------------------------------
# durations


@dataclass(frozen=True)
class Duration:
    """Constant or uniform duration in seconds."""

    low: float
    high: float

    @classmethod
    def const(cls, value: float) -> "Duration":
        return cls(float(value), float(value))

    @classmethod
    def uniform(cls, low: float, high: float) -> "Duration":
        if high < low:
            raise AgentError(f"uniform range inverted: [{low}, {high}]")
        return cls(float(low), float(high))

    @classmethod
    def parse(cls, value) -> "Duration":
        """Accept a bare number, {"const": x} or {"uniform": [a, b]}."""
        if isinstance(value, Duration):
            return value
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return cls.const(value)
        if isinstance(value, dict):
            if "const" in value:
                return cls.const(value["const"])
            if "uniform" in value:
                a, b = value["uniform"]
                return cls.uniform(a, b)
        raise AgentError(f"cannot interpret duration spec: {value!r}")

    def realize(self, rng: np.random.Generator) -> float:
        if self.high == self.low:
            return self.low
        return float(rng.uniform(self.low, self.high))


def realize_table(table: dict[str, Duration], rng: np.random.Generator) -> dict[str, float]:
    """Draw one concrete duration per action name, in sorted name order."""
    return {name: table[name].realize(rng) for name in sorted(table)}


# ---------------------------------------------------------------------------
# human policies


@dataclass
class HumanMove:
    action: str
    duration: float
    is_deviation: bool = False


#: sentinel decision kinds a policy can take instead of acting
SILENT = "silent"


DEFAULT_HUMAN_DURATIONS = {
    "inspect": Duration.const(2.5),
    "deliver-part": Duration.const(2.0),
    "palletize": Duration.const(4.0),
    "handover": Duration.const(3.0),
}


class HumanPolicy:
    """Base policy: comply with every suggestion, never stop the robot."""

    kind = "compliant"

    def __init__(self, durations: dict[str, Duration] | None = None):
        self.durations = dict(DEFAULT_HUMAN_DURATIONS)
        if durations:
            self.durations.update({k: Duration.parse(v) for k, v in durations.items()})
        self._realized: dict[str, float] = {}

    def begin_trial(self, rng: np.random.Generator) -> None:
        self._realized = realize_table(self.durations, rng)

    def action_duration(self, action_name: str) -> float:
        if action_name not in self._realized:
            raise UnknownActionError(f"no duration configured for {action_name!r}")
        return self._realized[action_name]

    def decide(self, suggestion_action: Action, part: str,
               alternatives: list, rng: np.random.Generator) -> HumanMove | str:
        """React to a suggestion addressed to the human (or joint) side."""
        return HumanMove(suggestion_action.name,
                         self.action_duration(suggestion_action.name))

    def wants_stop(self, part: str, robot_action: Action,
                   rng: np.random.Generator) -> bool:
        """Whether the operator halts the robot during this action."""
        return False


class CompliantPolicy(HumanPolicy):
    pass


class InterventionistPolicy(HumanPolicy):
    """Stops the robot's transport action with probability p per part."""

    kind = "interventionist"

    def __init__(self, p: float, durations: dict[str, Duration] | None = None,
                 stop_action: str = "approach-goal"):
        super().__init__(durations)
        if not 0.0 <= p <= 1.0:
            raise AgentError(f"intervention probability out of range: {p}")
        self.p = p
        self.stop_action = stop_action
        self._decided: dict[str, bool] = {}

    def begin_trial(self, rng: np.random.Generator) -> None:
        super().begin_trial(rng)
        self._decided = {}

    def wants_stop(self, part: str, robot_action: Action,
                   rng: np.random.Generator) -> bool:
        if robot_action.name != self.stop_action:
            return False
        if part not in self._decided:
            self._decided[part] = bool(rng.random() < self.p)
        return self._decided[part]


class ScriptedPolicy(HumanPolicy):
    """Follows an explicit script of per-part moves.

    Entries: {"part": <node name>, "kind": "intervene"} stops the robot
    transport at that part; {"part": ..., "kind": "silent"} never
    answers the suggestion (the run times out there).
    """

    kind = "scripted"

    def __init__(self, script: list[dict], durations: dict[str, Duration] | None = None,
                 stop_action: str = "approach-goal"):
        super().__init__(durations)
        self.stop_action = stop_action
        self._by_part: dict[str, str] = {}
        for entry in script:
            self._by_part[str(entry["part"])] = str(entry.get("kind", "intervene"))

    def decide(self, suggestion_action: Action, part: str,
               alternatives: list, rng: np.random.Generator) -> HumanMove | str:
        if self._by_part.get(part) == SILENT:
            return SILENT
        return super().decide(suggestion_action, part, alternatives, rng)

    def wants_stop(self, part: str, robot_action: Action,
                   rng: np.random.Generator) -> bool:
        return (self._by_part.get(part) == "intervene"
                and robot_action.name == self.stop_action)


def human_decide(policy: HumanPolicy, suggestion_action: Action, part: str,
                 alternatives: list, rng: np.random.Generator) -> HumanMove | str:
    if suggestion_action.agent is AgentKind.ROBOT:
        raise AgentError("human_decide called for a robot action")
    return policy.decide(suggestion_action, part, alternatives, rng)


# ---------------------------------------------------------------------------
# robot model


DEFAULT_ROBOT_DURATIONS = {
    "approach-part": Duration.const(4.0),
    "grasp": Duration.const(1.5),
    "approach-goal": Duration.const(6.0),
    "ungrasp": Duration.const(1.0),
    "start-pose": Duration.const(5.0),
    "handover": Duration.const(3.0),
}


@dataclass
class RobotOutcome:
    success: bool
    duration: float


class RobotModel:
    """Execution model for the manipulator.

    Speed and force limits are carried as configuration of record; the
    simulation works in terms of per-action durations.  Only the grasp
    can fail, with a configurable probability.
    """

    def __init__(self, durations: dict[str, Duration] | None = None,
                 grasp_failure_prob: float = 0.0,
                 end_effector_speed_mm_s: float = 250.0,
                 protective_stop_force_n: float = 100.0):
        self.durations = dict(DEFAULT_ROBOT_DURATIONS)
        if durations:
            self.durations.update({k: Duration.parse(v) for k, v in durations.items()})
        if not 0.0 <= grasp_failure_prob <= 1.0:
            raise AgentError(f"grasp failure probability out of range: {grasp_failure_prob}")
        self.grasp_failure_prob = grasp_failure_prob
        self.end_effector_speed_mm_s = end_effector_speed_mm_s
        self.protective_stop_force_n = protective_stop_force_n
        self._realized: dict[str, float] = {}

    def begin_trial(self, rng: np.random.Generator) -> None:
        self._realized = realize_table(self.durations, rng)

    def action_duration(self, action_name: str) -> float:
        if action_name not in self._realized:
            raise UnknownActionError(f"no robot duration configured for {action_name!r}")
        return self._realized[action_name]


def robot_execute(model: RobotModel, action: Action,
                  rng: np.random.Generator) -> RobotOutcome:
    duration = model.action_duration(action.name)
    if action.name == "grasp" and model.grasp_failure_prob > 0.0:
        if rng.random() < model.grasp_failure_prob:
            return RobotOutcome(False, duration)
    return RobotOutcome(True, duration)


# ---------------------------------------------------------------------------
# poses


ORTHO_EPS = 1e-9


class Pose:
    """Rigid-body pose as a 4x4 homogeneous transform."""

    __slots__ = ("matrix",)

    def __init__(self, matrix):
        m = np.asarray(matrix, dtype=float)
        if m.shape != (4, 4):
            raise InvalidPoseError(f"expected a 4x4 matrix, got shape {m.shape}")
        if not np.allclose(m[3], (0.0, 0.0, 0.0, 1.0), rtol=0.0, atol=ORTHO_EPS):
            raise InvalidPoseError("bottom row must be [0 0 0 1]")
        r = m[:3, :3]
        if not np.allclose(r.T @ r, np.eye(3), rtol=0.0, atol=1e-8):
            raise InvalidPoseError("rotation block is not orthonormal")
        if np.linalg.det(r) < 0.0:
            raise InvalidPoseError("rotation block is a reflection (det < 0)")
        self.matrix = m

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(4))

    @classmethod
    def from_rotation_translation(cls, rotation, translation) -> "Pose":
        m = np.eye(4)
        m[:3, :3] = np.asarray(rotation, dtype=float)
        m[:3, 3] = np.asarray(translation, dtype=float)
        return cls(m)

    def compose(self, other: "Pose") -> "Pose":
        return Pose(self.matrix @ other.matrix)

    def __matmul__(self, other: "Pose") -> "Pose":
        return self.compose(other)


def pose_in_robot_frame(robot_from_tool: Pose, tool_from_camera: Pose,
                        camera_from_part: Pose) -> Pose:
    """Chain the calibration transforms to express a part in robot base frame."""
    return robot_from_tool @ tool_from_camera @ camera_from_part
