"""Cooperation planning for human-robot teams.

Collaborative tasks are modeled as AND/OR graphs of alternative
decompositions.  The package enumerates cooperation paths, picks the
cheapest viable one, runs a turn-taking manager that adapts to human
deviations and robot failures, simulates full assembly runs with
timing statistics, and serves live sessions over WebSocket.
"""

from .graph import (
    Action,
    AgentKind,
    AndOrGraph,
    ArcProgress,
    CooperationPath,
    CyclicGraphError,
    GraphError,
    GraphStatus,
    HyperArc,
    Node,
    NoViablePathError,
    PathExplosionError,
    PathSelection,
    StatusKind,
    build_graph,
    enumerate_paths,
    optimal_path,
    path_cost,
    path_equal,
    path_equivalent,
)
from .manager import (
    Ack,
    Binding,
    CooperationState,
    ManagerError,
    Outcome,
    Phase,
    StaleSeqError,
    Suggestion,
    on_ack,
    on_intervention,
    start,
    timing_report,
)
from .model import (
    GraphSpec,
    ModelError,
    generate_palletization,
    parse_model,
    serialize_model,
)
from .agents import (
    CompliantPolicy,
    Duration,
    HumanPolicy,
    InterventionistPolicy,
    Pose,
    RobotModel,
    ScriptedPolicy,
    pose_in_robot_frame,
)
from .sim import (
    BatchSummary,
    SimConfig,
    Simulator,
    TrialResult,
    export_results,
    load_scenario,
    run_batch,
    run_trial,
    summarize,
)

__version__ = "0.1.0"

__all__ = [
    "Ack",
    "Action",
    "AgentKind",
    "AndOrGraph",
    "ArcProgress",
    "BatchSummary",
    "Binding",
    "CompliantPolicy",
    "CooperationPath",
    "CooperationState",
    "CyclicGraphError",
    "Duration",
    "GraphError",
    "GraphSpec",
    "GraphStatus",
    "HumanPolicy",
    "HyperArc",
    "InterventionistPolicy",
    "ManagerError",
    "ModelError",
    "Node",
    "NoViablePathError",
    "Outcome",
    "PathExplosionError",
    "PathSelection",
    "Phase",
    "Pose",
    "RobotModel",
    "ScriptedPolicy",
    "SimConfig",
    "Simulator",
    "StaleSeqError",
    "StatusKind",
    "Suggestion",
    "TrialResult",
    "build_graph",
    "enumerate_paths",
    "export_results",
    "generate_palletization",
    "load_scenario",
    "on_ack",
    "on_intervention",
    "optimal_path",
    "parse_model",
    "path_cost",
    "path_equal",
    "path_equivalent",
    "pose_in_robot_frame",
    "run_batch",
    "run_trial",
    "serialize_model",
    "start",
    "summarize",
    "timing_report",
]
