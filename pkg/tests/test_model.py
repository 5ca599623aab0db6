import json

import pytest

from coplan.graph import build_graph, enumerate_paths, optimal_path
from coplan.model import (
    DuplicateNameError,
    InvalidPartCountError,
    MissingRootError,
    ModelSyntaxError,
    UnknownAgentError,
    generate_palletization,
    parse_model,
    serialize_model,
)


def canonical_k2():
    with open("tests/golden/palletize_2.json") as fh:
        return fh.read()


class TestParseErrors:
    def test_empty_text(self):
        with pytest.raises(MissingRootError):
            parse_model("")

    def test_not_json(self):
        with pytest.raises(ModelSyntaxError) as e:
            parse_model("{\n  \"version\": \"coplan-model/1\",\n  huh\n}")
        assert e.value.line == 3

    def test_wrong_version(self):
        doc = json.loads(canonical_k2())
        doc["version"] = "coplan-model/9"
        with pytest.raises(ModelSyntaxError):
            parse_model(json.dumps(doc))

    def test_duplicate_node(self):
        doc = json.loads(canonical_k2())
        doc["nodes"].append(dict(doc["nodes"][0]))
        with pytest.raises(DuplicateNameError):
            parse_model(json.dumps(doc))

    def test_duplicate_arc(self):
        doc = json.loads(canonical_k2())
        doc["arcs"].append(dict(doc["arcs"][0]))
        with pytest.raises(DuplicateNameError):
            parse_model(json.dumps(doc))

    def test_unknown_agent(self):
        doc = json.loads(canonical_k2())
        doc["arcs"][0]["actions"][0]["agent"] = "android"
        with pytest.raises(UnknownAgentError):
            parse_model(json.dumps(doc))

    def test_no_root_flag(self):
        doc = json.loads(canonical_k2())
        for n in doc["nodes"]:
            n["root"] = False
        with pytest.raises(MissingRootError):
            parse_model(json.dumps(doc))

    def test_unknown_keys_tolerated(self):
        doc = json.loads(canonical_k2())
        doc["annotation"] = "extra"
        doc["nodes"][0]["color"] = "blue"
        spec = parse_model(json.dumps(doc))
        assert serialize_model(spec) == canonical_k2()


class TestCanonicalForm:
    def test_round_trip_is_identity(self):
        text = canonical_k2()
        assert serialize_model(parse_model(text)) == text

    def test_serialization_normalizes_order(self):
        doc = json.loads(canonical_k2())
        doc["nodes"].reverse()
        doc["arcs"].reverse()
        spec = parse_model(json.dumps(doc))
        assert serialize_model(spec) == canonical_k2()

    def test_trailing_newline(self):
        assert canonical_k2().endswith("}\n")

    def test_float_formatting_round_trips(self):
        doc = json.loads(canonical_k2())
        doc["arcs"][0]["weight"] = 0.1
        text1 = serialize_model(parse_model(json.dumps(doc)))
        text2 = serialize_model(parse_model(text1))
        assert text1 == text2
        assert '"weight": 0.1' in text1

    def test_golden_matches_generator(self):
        assert serialize_model(generate_palletization(2)) == canonical_k2()


class TestPalletization:
    def test_invalid_part_count(self):
        for k in (0, -3):
            with pytest.raises(InvalidPartCountError):
                generate_palletization(k)

    def test_structure(self):
        spec = generate_palletization(3)
        names = {n.name for n in spec.nodes}
        assert names == {"empty-pallet", "pallet_1", "pallet_2", "pallet_3"}
        base = next(n for n in spec.nodes if n.name == "empty-pallet")
        assert base.solved and not base.root
        top = next(n for n in spec.nodes if n.name == "pallet_3")
        assert top.root and not top.solved
        arc_names = {a.name for a in spec.arcs}
        assert arc_names == {"h_1", "h_2", "h_3", "hw_1", "hw_2", "hw_3"}

    def test_chain_children(self):
        spec = generate_palletization(3)
        arcs = {a.name: a for a in spec.arcs}
        assert arcs["h_1"].children == ["empty-pallet"]
        assert arcs["hw_2"].children == ["pallet_1"]
        assert arcs["h_3"].children == ["pallet_2"]

    def test_action_sequences(self):
        spec = generate_palletization(1)
        arcs = {a.name: a for a in spec.arcs}
        assert [(a.name, a.agent) for a in arcs["h_1"].actions] == [
            ("inspect", "human"), ("deliver-part", "human"),
            ("approach-part", "robot"), ("grasp", "robot"),
            ("approach-goal", "robot"), ("ungrasp", "robot"),
            ("start-pose", "robot")]
        assert [(a.name, a.agent) for a in arcs["hw_1"].actions] == [
            ("inspect", "human"), ("deliver-part", "human"),
            ("approach-part", "robot"), ("grasp", "robot"),
            ("handover", "joint"), ("palletize", "human"),
            ("start-pose", "robot")]

    def test_weights(self):
        spec = generate_palletization(2)
        for a in spec.arcs:
            assert a.weight == (1.0 if a.name.startswith("h_") else 4.0)
        for n in spec.nodes:
            assert n.weight == 0.0

    def test_custom_weights(self):
        spec = generate_palletization(2, plain_weight=2.0, handover_weight=9.0)
        arcs = {a.name: a for a in spec.arcs}
        assert arcs["h_1"].weight == 2.0 and arcs["hw_2"].weight == 9.0

    def test_optimal_is_all_plain(self):
        g = build_graph(generate_palletization(4))
        enumerate_paths(g)
        sel = optimal_path(g)
        assert sel.path.cost == 4.0
        assert all(a.startswith("h_") for a in sel.path.path_arcs)
