"""Declarative cooperation model files.

A model document is JSON with a fixed shape::

    {
      "version": "coplan-model/1",
      "name": "...",
      "nodes": [{"name": ..., "weight": ..., "root": ..., "solved": ...}, ...],
      "arcs":  [{"name": ..., "parent": ..., "children": [...],
                 "weight": ..., "actions": [{"name": ..., "agent": ...}, ...]}, ...]
    }

``serialize_model`` always emits the canonical form: keys sorted, node
and arc lists sorted by name, children sorted, two-space indent, one
trailing newline, floats in shortest round-trip notation.  Parsing a
canonical document and serializing it again is byte-identical.  See
docs/model-format.md for the full contract.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .graph import AgentKind


class ModelError(Exception):
    pass


class ModelSyntaxError(ModelError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{message} (line {line}, column {col})" if line else message)
        self.line = line
        self.col = col


class DuplicateNameError(ModelError):
    pass


class UnknownAgentError(ModelError):
    pass


class MissingRootError(ModelError):
    pass


class InvalidPartCountError(ModelError):
    pass


MODEL_VERSION = "coplan-model/1"


@dataclass
class ActionSpec:
    name: str
    agent: str


@dataclass
class NodeSpec:
    name: str
    weight: float = 0.0
    root: bool = False
    solved: bool = False


@dataclass
class ArcSpec:
    name: str
    parent: str
    children: list[str] = field(default_factory=list)
    weight: float = 0.0
    actions: list[ActionSpec] = field(default_factory=list)


@dataclass
class GraphSpec:
    name: str
    nodes: list[NodeSpec] = field(default_factory=list)
    arcs: list[ArcSpec] = field(default_factory=list)


_AGENTS = {a.value for a in AgentKind}


def parse_model(text: str) -> GraphSpec:
    """Parse a model document, validating names, agents and the root flag."""
    if not text.strip():
        raise MissingRootError("empty model document has no root node")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelSyntaxError(e.msg, e.lineno, e.colno) from None
    if not isinstance(doc, dict):
        raise ModelSyntaxError("top level must be an object")
    version = doc.get("version", MODEL_VERSION)
    if version != MODEL_VERSION:
        raise ModelSyntaxError(f"unsupported model version {version!r}")

    spec = GraphSpec(name=str(doc.get("name", "")))
    seen: set[str] = set()
    for entry in _as_list(doc.get("nodes", []), "nodes"):
        name = _req_str(entry, "name", "node")
        if name in seen:
            raise DuplicateNameError(f"duplicate node name: {name}")
        seen.add(name)
        spec.nodes.append(NodeSpec(
            name=name,
            weight=_as_number(entry.get("weight", 0.0), f"node {name} weight"),
            root=bool(entry.get("root", False)),
            solved=bool(entry.get("solved", False)),
        ))
    arc_seen: set[str] = set()
    for entry in _as_list(doc.get("arcs", []), "arcs"):
        name = _req_str(entry, "name", "arc")
        if name in arc_seen:
            raise DuplicateNameError(f"duplicate arc name: {name}")
        arc_seen.add(name)
        actions = []
        for a in _as_list(entry.get("actions", []), f"arc {name} actions"):
            agent = _req_str(a, "agent", "action")
            if agent not in _AGENTS:
                raise UnknownAgentError(
                    f"unknown agent {agent!r} in arc {name} (expected one of "
                    + ", ".join(sorted(_AGENTS)) + ")"
                )
            actions.append(ActionSpec(name=_req_str(a, "name", "action"), agent=agent))
        spec.arcs.append(ArcSpec(
            name=name,
            parent=_req_str(entry, "parent", "arc"),
            children=[str(c) for c in _as_list(entry.get("children", []), f"arc {name} children")],
            weight=_as_number(entry.get("weight", 0.0), f"arc {name} weight"),
            actions=actions,
        ))
    if not any(n.root for n in spec.nodes):
        raise MissingRootError("model declares no root node")
    return spec


def serialize_model(spec: GraphSpec) -> str:
    """Render the canonical byte-stable form of a model."""
    doc = {
        "version": MODEL_VERSION,
        "name": spec.name,
        "nodes": [
            {
                "name": n.name,
                "weight": n.weight,
                "root": bool(n.root),
                "solved": bool(n.solved),
            }
            for n in sorted(spec.nodes, key=lambda n: n.name)
        ],
        "arcs": [
            {
                "name": a.name,
                "parent": a.parent,
                "children": sorted(a.children),
                "weight": a.weight,
                "actions": [{"name": act.name, "agent": act.agent} for act in a.actions],
            }
            for a in sorted(spec.arcs, key=lambda a: a.name)
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


# palletization scenario: a chain of pallet states, two candidate arcs
# per part.  The plain arc keeps the robot placing the part; the
# alternative hands the part over for the operator to place.
PLAIN_ARC_ACTIONS = (
    ("inspect", "human"),
    ("deliver-part", "human"),
    ("approach-part", "robot"),
    ("grasp", "robot"),
    ("approach-goal", "robot"),
    ("ungrasp", "robot"),
    ("start-pose", "robot"),
)
HANDOVER_ARC_ACTIONS = (
    ("inspect", "human"),
    ("deliver-part", "human"),
    ("approach-part", "robot"),
    ("grasp", "robot"),
    ("handover", "joint"),
    ("palletize", "human"),
    ("start-pose", "robot"),
)

#: transition weights: the robot-place arc is preferred over the handover arc
PLAIN_ARC_WEIGHT = 1.0
HANDOVER_ARC_WEIGHT = 4.0


def generate_palletization(parts: int, plain_weight: float = PLAIN_ARC_WEIGHT,
                           handover_weight: float = HANDOVER_ARC_WEIGHT) -> GraphSpec:
    """Build the K-part palletization model.

    States chain from the empty pallet through ``pallet_i`` (i parts
    placed) to the full pallet, which is the root.  Every part can be
    placed either by the robot (arc ``h_i``) or through a handover (arc
    ``hw_i``), so the model has exactly 2**K cooperation paths.
    """
    if parts < 1:
        raise InvalidPartCountError(f"part count must be >= 1, got {parts}")
    spec = GraphSpec(name=f"palletization-{parts}")
    spec.nodes.append(NodeSpec(name="empty-pallet", solved=True))
    for i in range(1, parts + 1):
        spec.nodes.append(NodeSpec(name=f"pallet_{i}", root=(i == parts)))
    for i in range(1, parts + 1):
        below = "empty-pallet" if i == 1 else f"pallet_{i - 1}"
        spec.arcs.append(ArcSpec(
            name=f"h_{i}", parent=f"pallet_{i}", children=[below],
            weight=plain_weight,
            actions=[ActionSpec(n, a) for n, a in PLAIN_ARC_ACTIONS],
        ))
        spec.arcs.append(ArcSpec(
            name=f"hw_{i}", parent=f"pallet_{i}", children=[below],
            weight=handover_weight,
            actions=[ActionSpec(n, a) for n, a in HANDOVER_ARC_ACTIONS],
        ))
    return spec


def _as_list(value, what: str) -> list:
    if not isinstance(value, list):
        raise ModelSyntaxError(f"{what} must be a list")
    return value


def _req_str(entry, key: str, what: str) -> str:
    if not isinstance(entry, dict) or key not in entry:
        raise ModelSyntaxError(f"{what} entry is missing {key!r}")
    return str(entry[key])


def _as_number(value, what: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ModelSyntaxError(f"{what} must be a number")
    return float(value)
