import pytest

from coplan.graph import build_graph, enumerate_paths
from coplan.model import ActionSpec, ArcSpec, GraphSpec, NodeSpec


def spec_from_primitive(model):
    """Turn an oracles.random_model dict into a GraphSpec (leaves solved)."""
    child_names = set()
    for arc in model["arcs"].values():
        child_names.update(arc["children"])
    parent_names = {arc["parent"] for arc in model["arcs"].values()}
    nodes = []
    for name, weight in sorted(model["weights"].items()):
        is_leaf = name not in parent_names
        nodes.append(NodeSpec(name=name, weight=weight,
                              root=(name == model["root"]),
                              solved=is_leaf))
    arcs = []
    for name, arc in sorted(model["arcs"].items()):
        # alternate agents so manager-level tests stay meaningful
        actions = [ActionSpec(name=f"{name}-step{i}",
                              agent="human" if i % 2 == 0 else "robot")
                   for i in range(1 + len(arc["children"]) % 3)]
        arcs.append(ArcSpec(name=name, parent=arc["parent"],
                            children=sorted(arc["children"]),
                            weight=arc["weight"], actions=actions))
    return GraphSpec(name=model["name"], nodes=nodes, arcs=arcs)


def two_route_spec():
    """Tiny model with a shared child and two routes to the goal.

    base is solved; goal has a cheap direct route (direct) and a dearer
    two-stage route through mid (stage1 + stage2).  stage2 and direct
    compete; stage1 and direct share the child base.
    """
    return GraphSpec(
        name="two-route",
        nodes=[
            NodeSpec(name="base", weight=0.0, root=False, solved=True),
            NodeSpec(name="mid", weight=0.5, root=False, solved=False),
            NodeSpec(name="goal", weight=0.0, root=True, solved=False),
        ],
        arcs=[
            ArcSpec(name="direct", parent="goal", children=["base"], weight=3.0,
                    actions=[ActionSpec(name="haul", agent="robot")]),
            ArcSpec(name="stage1", parent="mid", children=["base"], weight=1.0,
                    actions=[ActionSpec(name="pick", agent="human"),
                             ActionSpec(name="place", agent="robot")]),
            ArcSpec(name="stage2", parent="goal", children=["mid"], weight=1.0,
                    actions=[ActionSpec(name="fasten", agent="human")]),
        ],
    )


@pytest.fixture
def two_route_graph():
    g = build_graph(two_route_spec())
    enumerate_paths(g)
    return g
