"""AND/OR graph representation of human-robot cooperation tasks.

A cooperation is modeled as a directed acyclic hypergraph.  Nodes stand
for states of the task, hyper-arcs for transitions between them.  Each
hyper-arc connects a set of child nodes to exactly one parent node and
carries an ordered list of agent actions; the arc is *done* once every
action has been performed in order.  A node is *solved* when at least
one incoming arc is done (leaves can start out solved).  Solving the
root solves the whole graph.

Two bits of online bookkeeping drive the search:

* feasibility -- an arc is feasible when all of its children are solved,
  it is not done, not suppressed, and its parent is still unsolved; a
  node is feasible when at least one feasible arc points to it.
* suppression -- once an arc completes, every other arc sharing at least
  one child with it is permanently ruled out (the alternatives competed
  for the same sub-state).  A coordinator may also suppress an arc
  directly after an execution failure.

The offline phase enumerates every leaf-to-root cooperation path; the
online phase updates flags and re-ranks the surviving paths by cost.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

if TYPE_CHECKING:  # import only for annotations, the model layer imports us
    from .model import GraphSpec

NodeId = str
ArcId = str

#: tolerance for treating two path costs as equivalent
COST_EPS = 1e-9

#: default ceiling on the number of enumerated cooperation paths
DEFAULT_PATH_CAP = 2 ** 20


class GraphError(Exception):
    """Base class for graph construction and update errors."""


class CyclicGraphError(GraphError):
    pass


class DanglingReferenceError(GraphError):
    pass


class MultipleRootsError(GraphError):
    pass


class NoRootError(GraphError):
    pass


class EmptyChildrenError(GraphError):
    pass


class InvalidInitialStateError(GraphError):
    """A non-leaf node was marked solved before any arc could be done."""


class PathExplosionError(GraphError):
    pass


class UnknownMemberError(GraphError):
    pass


class UnknownActionError(GraphError):
    pass


class OutOfOrderError(GraphError):
    pass


class ArcNotFeasibleError(GraphError):
    pass


class ArcNotDoneError(GraphError):
    pass


class NoViablePathError(GraphError):
    pass


class AgentKind(str, Enum):
    HUMAN = "human"
    ROBOT = "robot"
    JOINT = "joint"

    def __str__(self) -> str:  # keep log lines compact
        return self.value


@dataclass
class Action:
    """One step of a hyper-arc's ordered action list."""

    name: str
    agent: AgentKind
    order: int
    finished: bool = False


@dataclass
class Node:
    name: NodeId
    index: int
    weight: float = 0.0
    is_root: bool = False
    is_leaf: bool = False
    solved: bool = False
    feasible: bool = False


@dataclass
class HyperArc:
    name: ArcId
    index: int
    parent: NodeId
    children: tuple[NodeId, ...]
    weight: float
    actions: tuple[Action, ...]
    done: bool = False
    suppressed: bool = False
    feasible: bool = False

    def next_pending(self) -> Action | None:
        """Lowest-order unfinished action, or None when the arc is done."""
        for act in self.actions:
            if not act.finished:
                return act
        return None


@dataclass
class ArcProgress:
    """Result of recording one finished action on an arc."""

    arc: ArcId
    action: str
    remaining: int
    arc_done: bool


class StatusKind(str, Enum):
    IN_PROGRESS = "in-progress"
    SOLVED = "solved"
    FAILED = "failed"

    def __str__(self) -> str:
        return self.value


@dataclass
class GraphStatus:
    kind: StatusKind
    feasible_nodes: set[NodeId]
    feasible_arcs: set[ArcId]

    @property
    def solved(self) -> bool:
        return self.kind is StatusKind.SOLVED

    @property
    def failed(self) -> bool:
        return self.kind is StatusKind.FAILED


class CooperationPath:
    """One complete leaf-to-root way of solving the graph.

    Stored compactly as node/arc name sets plus the precomputed cost;
    the ordered views (execution order) are derived lazily because a
    large graph can hold hundreds of thousands of paths of which only a
    handful are ever inspected.
    """

    __slots__ = ("_graph", "node_set", "arc_set", "cost", "_arc_key", "_order")

    def __init__(self, graph: AndOrGraph, node_set: frozenset[NodeId],
                 arc_set: frozenset[ArcId], cost: float):
        self._graph = graph
        self.node_set = node_set
        self.arc_set = arc_set
        self.cost = cost
        self._arc_key = tuple(sorted(arc_set))
        self._order: tuple[tuple[NodeId, ...], tuple[ArcId, ...]] | None = None

    def _execution_order(self) -> tuple[tuple[NodeId, ...], tuple[ArcId, ...]]:
        if self._order is not None:
            return self._order
        g = self._graph
        leaves = sorted(n for n in self.node_set if g.nodes[n].is_leaf)
        reached = set(leaves)
        nodes: list[NodeId] = list(leaves)
        arcs: list[ArcId] = []
        pending = sorted(self.arc_set)
        while pending:
            for i, arc_name in enumerate(pending):
                arc = g.arcs[arc_name]
                if all(c in reached for c in arc.children):
                    arcs.append(arc_name)
                    if arc.parent not in reached:
                        reached.add(arc.parent)
                        nodes.append(arc.parent)
                    del pending[i]
                    break
            else:  # pragma: no cover - impossible on a validated acyclic path
                raise GraphError(f"path arcs do not order topologically: {pending}")
        self._order = (tuple(nodes), tuple(arcs))
        return self._order

    @property
    def path_nodes(self) -> tuple[NodeId, ...]:
        """Nodes in execution order; the last entry is always the root."""
        return self._execution_order()[0]

    @property
    def path_arcs(self) -> tuple[ArcId, ...]:
        """Arcs in a dependency-respecting execution order."""
        return self._execution_order()[1]

    @property
    def action_sequence(self) -> tuple[tuple[ArcId, Action], ...]:
        """Every action of the path, arc by arc in execution order."""
        g = self._graph
        out: list[tuple[ArcId, Action]] = []
        for arc_name in self.path_arcs:
            for act in g.arcs[arc_name].actions:
                out.append((arc_name, act))
        return tuple(out)

    def sort_key(self) -> tuple[float, tuple[ArcId, ...]]:
        return (self.cost, self._arc_key)

    def __repr__(self) -> str:
        return f"CooperationPath(cost={self.cost!r}, arcs={self._arc_key})"


@dataclass
class PathSelection:
    """An optimal path together with the work still left on it.

    ``pending`` lists (arc, action) pairs in execution order, skipping
    finished actions and arcs that no longer need to run because their
    parent node is already solved.
    """

    path: CooperationPath
    pending: tuple[tuple[ArcId, Action], ...]


class AndOrGraph:
    """Mutable AND/OR graph state plus the enumerated path table."""

    def __init__(self, name: str):
        self.name = name
        self.nodes: dict[NodeId, Node] = {}
        self.arcs: dict[ArcId, HyperArc] = {}
        self.root: NodeId = ""
        self.paths: list[CooperationPath] | None = None
        self.incoming: dict[NodeId, list[ArcId]] = {}
        self._initial_solved: set[NodeId] = set()
        # numpy mirrors, filled in by enumerate_paths
        self._node_w: np.ndarray | None = None
        self._arc_w: np.ndarray | None = None
        self._arc_done: np.ndarray | None = None
        self._arc_supp: np.ndarray | None = None
        self._inc_nodes: np.ndarray | None = None
        self._inc_arcs: np.ndarray | None = None
        self._costs: np.ndarray | None = None

    # -- flag upkeep ---------------------------------------------------

    def refresh_feasibility(self) -> None:
        """Recompute every arc and node feasibility flag from scratch."""
        for node in self.nodes.values():
            node.feasible = False
        for arc in self.arcs.values():
            arc.feasible = (
                not arc.done
                and not arc.suppressed
                and not self.nodes[arc.parent].solved
                and all(self.nodes[c].solved for c in arc.children)
            )
            if arc.feasible:
                self.nodes[arc.parent].feasible = True

    def status(self) -> GraphStatus:
        n_f, h_f = self.feasible_sets()
        if self.nodes[self.root].solved:
            kind = StatusKind.SOLVED
        elif not h_f:
            kind = StatusKind.FAILED
        else:
            kind = StatusKind.IN_PROGRESS
        return GraphStatus(kind, n_f, h_f)

    def feasible_sets(self) -> tuple[set[NodeId], set[ArcId]]:
        """Current feasible nodes and feasible arcs, from the live flags."""
        h_f = {a.name for a in self.arcs.values() if a.feasible}
        n_f = {self.arcs[a].parent for a in h_f}
        return n_f, h_f

    def feasible_alternatives(self) -> list[tuple[ArcId, Action]]:
        """Next pending action of every feasible arc, sorted by arc name."""
        out = []
        for name in sorted(self.arcs):
            arc = self.arcs[name]
            if arc.feasible:
                act = arc.next_pending()
                if act is not None:
                    out.append((name, act))
        return out

    def reset(self) -> None:
        """Return to the initial runtime state, keeping the path table."""
        for node in self.nodes.values():
            node.solved = node.name in self._initial_solved
        for arc in self.arcs.values():
            arc.done = False
            arc.suppressed = False
            for act in arc.actions:
                act.finished = False
        self.refresh_feasibility()
        if self._arc_done is not None:
            self._arc_done[:] = False
            self._arc_supp[:] = False

    # -- online updates ------------------------------------------------

    def record_action_finished(self, arc_name: ArcId, action_name: str) -> ArcProgress:
        """Mark one action of a feasible arc as finished.

        The action must be the lowest-order unfinished step of the arc;
        anything else violates the arc's temporal order.  When the last
        action finishes the arc becomes done and the caller must follow
        up with :meth:`update_status`.
        """
        arc = self.arcs.get(arc_name)
        if arc is None:
            raise UnknownMemberError(f"unknown arc: {arc_name}")
        if not arc.feasible:
            raise ArcNotFeasibleError(f"arc {arc_name} is not feasible")
        nxt = arc.next_pending()
        if nxt is None or nxt.name != action_name:
            if action_name not in {a.name for a in arc.actions}:
                raise UnknownActionError(f"arc {arc_name} has no action {action_name!r}")
            raise OutOfOrderError(
                f"action {action_name!r} is not the next pending step of {arc_name}"
                + (f" (expected {nxt.name!r})" if nxt else "")
            )
        nxt.finished = True
        remaining = sum(1 for a in arc.actions if not a.finished)
        if remaining == 0:
            arc.done = True
            arc.feasible = False
            if self._arc_done is not None:
                self._arc_done[arc.index] = True
        return ArcProgress(arc_name, action_name, remaining, arc.done)

    def update_status(self, newly_solved_arcs: Iterable[ArcId]) -> GraphStatus:
        """Fold freshly completed arcs into the graph state.

        Parents of the given arcs become solved, competing arcs that
        share a child with a completed arc are suppressed, and all
        feasibility flags plus the path cost table are re-validated.
        """
        solved_now: list[HyperArc] = []
        for name in newly_solved_arcs:
            arc = self.arcs.get(name)
            if arc is None:
                raise UnknownMemberError(f"unknown arc: {name}")
            if not arc.done:
                raise ArcNotDoneError(f"arc {name} is not done")
            solved_now.append(arc)
        for arc in solved_now:
            self.nodes[arc.parent].solved = True
            mine = set(arc.children)
            for other in self.arcs.values():
                if other is arc or other.done:
                    continue
                if mine.intersection(other.children):
                    self._suppress(other)
        self.refresh_feasibility()
        self._revalidate_costs()
        return self.status()

    def suppress_arc(self, arc_name: ArcId) -> GraphStatus:
        """Rule out an arc directly (used after an execution failure)."""
        arc = self.arcs.get(arc_name)
        if arc is None:
            raise UnknownMemberError(f"unknown arc: {arc_name}")
        self._suppress(arc)
        self.refresh_feasibility()
        return self.status()

    def _suppress(self, arc: HyperArc) -> None:
        arc.suppressed = True
        arc.feasible = False
        if self._arc_supp is not None:
            self._arc_supp[arc.index] = True

    def carry_over_prefix(self, src_arc: ArcId, dst_arc: ArcId) -> int:
        """Copy finished state for the shared leading actions of two arcs.

        Actions match only while name, agent and position agree exactly.
        Returns how many actions were carried over.
        """
        src = self.arcs.get(src_arc)
        dst = self.arcs.get(dst_arc)
        if src is None or dst is None:
            raise UnknownMemberError(f"unknown arc: {src_arc if src is None else dst_arc}")
        carried = 0
        # never let a carried prefix complete the destination on its own:
        # at least one step of the alternative must actually be executed
        limit = len(dst.actions) - 1
        for a, b in zip(src.actions, dst.actions):
            if carried >= limit or not a.finished:
                break
            if a.name != b.name or a.agent != b.agent or a.order != b.order:
                break
            if not b.finished:
                b.finished = True
            carried += 1
        return carried

    # -- offline path machinery ---------------------------------------

    def _revalidate_costs(self) -> None:
        # weights are immutable after build, so this is a consistency
        # check of the cached cost table rather than a recomputation
        if self.paths is None or self._costs is None or not len(self._costs):
            return
        node_part = self._inc_nodes @ self._node_w
        arc_part = self._inc_arcs @ self._arc_w
        if not np.allclose(node_part + arc_part, self._costs, rtol=0.0, atol=COST_EPS):
            raise GraphError("path cost table drifted from node/arc weights")

    def _ensure_paths(self, cap: int = DEFAULT_PATH_CAP) -> list[CooperationPath]:
        if self.paths is None:
            enumerate_paths(self, cap=cap)
        assert self.paths is not None
        return self.paths

    def pending_actions(self, path: CooperationPath) -> tuple[tuple[ArcId, Action], ...]:
        """Unfinished work on a path, skipping arcs whose parent is solved."""
        out: list[tuple[ArcId, Action]] = []
        for arc_name in path.path_arcs:
            arc = self.arcs[arc_name]
            if arc.done or self.nodes[arc.parent].solved:
                continue
            for act in arc.actions:
                if not act.finished:
                    out.append((arc_name, act))
        return tuple(out)

    # -- debugging -----------------------------------------------------

    def dump(self) -> str:
        """Deterministic line-oriented rendering of the full graph state."""
        lines = [f"graph {self.name} root={self.root} status={self.status().kind}"]
        for name in sorted(self.nodes):
            n = self.nodes[name]
            lines.append(
                f"node {name} root={int(n.is_root)} leaf={int(n.is_leaf)} "
                f"solved={int(n.solved)} feasible={int(n.feasible)} weight={n.weight!r}"
            )
        for name in sorted(self.arcs):
            a = self.arcs[name]
            acts = ",".join(
                f"{act.name}:{act.agent}:{int(act.finished)}" for act in a.actions
            )
            lines.append(
                f"arc {name} parent={a.parent} children={','.join(sorted(a.children))} "
                f"weight={a.weight!r} done={int(a.done)} suppressed={int(a.suppressed)} "
                f"feasible={int(a.feasible)} actions={acts}"
            )
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# construction


def build_graph(spec: "GraphSpec") -> AndOrGraph:
    """Materialize a parsed graph description into runtime state.

    Validates structure (single root, known references, acyclicity,
    non-empty child sets) and initializes every flag: leaves take their
    declared solved state, all actions start unfinished, feasibility is
    computed once.
    """
    graph = AndOrGraph(spec.name)
    for i, node_spec in enumerate(spec.nodes):
        if node_spec.name in graph.nodes:
            raise GraphError(f"duplicate node name: {node_spec.name}")
        graph.nodes[node_spec.name] = Node(
            name=node_spec.name, index=i, weight=float(node_spec.weight),
            is_root=bool(node_spec.root),
        )
    roots = [n.name for n in graph.nodes.values() if n.is_root]
    if not roots:
        raise NoRootError("no node is marked as root")
    if len(roots) > 1:
        raise MultipleRootsError(f"multiple roots: {', '.join(sorted(roots))}")
    graph.root = roots[0]

    graph.incoming = {name: [] for name in graph.nodes}
    for j, arc_spec in enumerate(spec.arcs):
        if arc_spec.name in graph.arcs:
            raise GraphError(f"duplicate arc name: {arc_spec.name}")
        if not arc_spec.children:
            raise EmptyChildrenError(f"arc {arc_spec.name} has no children")
        if arc_spec.parent not in graph.nodes:
            raise DanglingReferenceError(
                f"arc {arc_spec.name} parent {arc_spec.parent!r} is not a node"
            )
        for child in arc_spec.children:
            if child not in graph.nodes:
                raise DanglingReferenceError(
                    f"arc {arc_spec.name} child {child!r} is not a node"
                )
        if arc_spec.parent in arc_spec.children:
            raise CyclicGraphError(
                f"arc {arc_spec.name} lists its parent {arc_spec.parent!r} as a child"
            )
        actions = tuple(
            Action(name=a.name, agent=AgentKind(a.agent), order=k)
            for k, a in enumerate(arc_spec.actions)
        )
        arc = HyperArc(
            name=arc_spec.name, index=j, parent=arc_spec.parent,
            children=tuple(arc_spec.children), weight=float(arc_spec.weight),
            actions=actions,
        )
        graph.arcs[arc.name] = arc
        graph.incoming[arc.parent].append(arc.name)

    _check_acyclic(graph)

    for node in graph.nodes.values():
        node.is_leaf = not graph.incoming[node.name]
    for node_spec in spec.nodes:
        if node_spec.solved:
            node = graph.nodes[node_spec.name]
            if not node.is_leaf:
                raise InvalidInitialStateError(
                    f"non-leaf node {node.name} cannot start solved"
                )
            node.solved = True
            graph._initial_solved.add(node.name)
    if not graph._initial_solved:
        raise InvalidInitialStateError(
            "no leaf starts solved, so the graph is dead on arrival"
        )
    graph.refresh_feasibility()
    return graph


def _check_acyclic(graph: AndOrGraph) -> None:
    # Kahn's algorithm over the child -> parent dependency relation
    deps: dict[NodeId, set[NodeId]] = {}
    for name in graph.nodes:
        deps[name] = set()
        for arc_name in graph.incoming.get(name, []):
            deps[name].update(graph.arcs[arc_name].children)
    ready = [n for n, d in deps.items() if not d]
    seen = 0
    ready_set = set(ready)
    while ready:
        n = ready.pop()
        seen += 1
        for m, d in deps.items():
            if n in d:
                d.discard(n)
                if not d and m not in ready_set:
                    ready.append(m)
                    ready_set.add(m)
    if seen != len(graph.nodes):
        cyclic = sorted(n for n, d in deps.items() if d)
        raise CyclicGraphError(f"cycle detected through nodes: {', '.join(cyclic)}")


# ---------------------------------------------------------------------------
# offline enumeration


def enumerate_paths(graph: AndOrGraph, cap: int = DEFAULT_PATH_CAP) -> list[CooperationPath]:
    """Enumerate every cooperation path of the graph.

    A path picks exactly one incoming arc for the root and, recursively,
    one incoming arc for every non-leaf node those arcs require.  Only an
    initially solved leaf can terminate a branch; an unsolved leaf has no
    way to ever become solved, so nothing that depends on it counts as a
    solution.  Shared sub-structure must be resolved consistently: a node
    reached through two branches keeps a single chosen arc.  Results are
    sorted by cost, ties broken by the sorted tuple of arc names.
    """
    memo: dict[NodeId, list[dict[NodeId, ArcId]]] = {}

    def solutions(node_name: NodeId) -> list[dict[NodeId, ArcId]]:
        cached = memo.get(node_name)
        if cached is not None:
            return cached
        node = graph.nodes[node_name]
        if node.is_leaf:
            memo[node_name] = [{}] if node.solved else []
            return memo[node_name]
        result: list[dict[NodeId, ArcId]] = []
        for arc_name in sorted(graph.incoming[node_name]):
            arc = graph.arcs[arc_name]
            partials: list[dict[NodeId, ArcId]] = [{node_name: arc_name}]
            for child in sorted(set(arc.children)):
                child_sols = solutions(child)
                merged: list[dict[NodeId, ArcId]] = []
                for p in partials:
                    for s in child_sols:
                        ok = True
                        for k, v in s.items():
                            if p.get(k, v) != v:
                                ok = False
                                break
                        if ok:
                            combined = dict(p)
                            combined.update(s)
                            merged.append(combined)
                            if len(merged) + len(result) > cap:
                                raise PathExplosionError(
                                    f"more than {cap} cooperation paths"
                                )
                partials = merged
                if not partials:
                    break
            result.extend(partials)
            if len(result) > cap:
                raise PathExplosionError(f"more than {cap} cooperation paths")
        memo[node_name] = result
        return result

    raw = solutions(graph.root)
    paths: list[CooperationPath] = []
    for choice in raw:
        arc_set = frozenset(choice.values())
        node_set = set(choice.keys())
        for arc_name in arc_set:
            node_set.update(graph.arcs[arc_name].children)
        node_set.add(graph.root)
        cost = sum(graph.nodes[n].weight for n in node_set)
        cost += sum(graph.arcs[a].weight for a in arc_set)
        paths.append(CooperationPath(graph, frozenset(node_set), arc_set, cost))
    paths.sort(key=CooperationPath.sort_key)
    graph.paths = paths
    _build_incidence(graph)
    return paths


def _build_incidence(graph: AndOrGraph) -> None:
    n_paths = len(graph.paths or [])
    n_nodes = len(graph.nodes)
    n_arcs = len(graph.arcs)
    node_w = np.zeros(n_nodes)
    for node in graph.nodes.values():
        node_w[node.index] = node.weight
    arc_w = np.zeros(n_arcs)
    for arc in graph.arcs.values():
        arc_w[arc.index] = arc.weight
    graph._node_w = node_w
    graph._arc_w = arc_w
    graph._arc_done = np.zeros(n_arcs, dtype=bool)
    graph._arc_supp = np.zeros(n_arcs, dtype=bool)
    for arc in graph.arcs.values():
        graph._arc_done[arc.index] = arc.done
        graph._arc_supp[arc.index] = arc.suppressed
    inc_nodes = np.zeros((n_paths, n_nodes), dtype=np.uint8)
    inc_arcs = np.zeros((n_paths, n_arcs), dtype=np.uint8)
    for i, path in enumerate(graph.paths or []):
        for n in path.node_set:
            inc_nodes[i, graph.nodes[n].index] = 1
        for a in path.arc_set:
            inc_arcs[i, graph.arcs[a].index] = 1
    graph._inc_nodes = inc_nodes
    graph._inc_arcs = inc_arcs
    graph._costs = np.array([p.cost for p in (graph.paths or [])])


# ---------------------------------------------------------------------------
# path queries


def path_cost(graph: AndOrGraph, path: CooperationPath) -> float:
    """Sum of node and arc weights along the path."""
    for n in path.node_set:
        if n not in graph.nodes:
            raise UnknownMemberError(f"path references unknown node {n}")
    for a in path.arc_set:
        if a not in graph.arcs:
            raise UnknownMemberError(f"path references unknown arc {a}")
    return (sum(graph.nodes[n].weight for n in path.node_set)
            + sum(graph.arcs[a].weight for a in path.arc_set))


def path_equal(a: CooperationPath, b: CooperationPath) -> bool:
    """Same nodes and same arcs."""
    return a.node_set == b.node_set and a.arc_set == b.arc_set


def path_equivalent(a: CooperationPath, b: CooperationPath) -> bool:
    """Costs agree within tolerance; the routes may differ."""
    return abs(a.cost - b.cost) <= COST_EPS


def optimal_path(graph: AndOrGraph, require_arc: ArcId | None = None) -> PathSelection:
    """Minimum-cost path among those still executable.

    A path survives as long as each of its arcs is either already done
    or not suppressed.  Cost ties are broken by lexicographic arc-name
    order so re-planning is deterministic.  ``require_arc`` restricts
    the choice to paths containing that arc (used when a human deviates
    onto a different transition).
    """
    paths = graph._ensure_paths()
    if not paths:
        raise NoViablePathError("graph has no cooperation paths")
    assert graph._inc_arcs is not None
    viable_arc = graph._arc_done | ~graph._arc_supp
    dead = ~viable_arc
    if dead.any():
        mask = ~(graph._inc_arcs[:, dead].any(axis=1))
    else:
        mask = np.ones(len(paths), dtype=bool)
    if require_arc is not None:
        arc = graph.arcs.get(require_arc)
        if arc is None:
            raise UnknownMemberError(f"unknown arc: {require_arc}")
        mask &= graph._inc_arcs[:, arc.index].astype(bool)
    if not mask.any():
        raise NoViablePathError("no viable cooperation path remains")
    costs = np.where(mask, graph._costs, np.inf)
    best = costs.min()
    candidates = np.nonzero(costs <= best + COST_EPS)[0]
    chosen = min((paths[i] for i in candidates), key=CooperationPath.sort_key)
    return PathSelection(chosen, graph.pending_actions(chosen))
