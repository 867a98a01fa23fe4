import json

import numpy as np
import pytest

from fairsearch.exceptions import GenotypeMismatch, GenotypeParseError
from fairsearch.space import (
    PRIMITIVES,
    ArchParams,
    CellKind,
    DiscretizeRule,
    GatingMode,
    Genotype,
    OperationKind,
    discretize,
    genotype_parse,
    genotype_serialize,
    genotype_to_dot,
)


def random_genotype(rng) -> Genotype:
    return Genotype.from_ops(
        [PRIMITIVES[i] for i in rng.integers(0, 8, size=14)],
        [PRIMITIVES[i] for i in rng.integers(0, 8, size=14)],
        gating_mode=GatingMode.SIGMOID,
        discretize_rule=DiscretizeRule.THRESHOLD,
        threshold=0.5,
        config_hash="0123456789abcdef",
    )


def test_none_wins_when_largest():
    alpha = np.ones((14, 8))
    alpha[:, 0] = 3.0
    genotype = discretize(ArchParams(alpha_normal=alpha))
    assert set(genotype.ops(CellKind.NORMAL)) == {OperationKind.NONE}
    assert genotype.retained(CellKind.NORMAL) == []


def test_ties_pick_lowest_index():
    genotype = discretize(ArchParams())
    assert genotype == Genotype.empty()


def test_argmax_picks_largest(rng):
    alpha = rng.standard_normal((14, 8))
    alpha[5] = [0, 0, 0, 0, 0, 0, 4.0, 0]
    genotype = discretize(ArchParams(alpha_reduce=alpha))
    assert genotype.reduce[5].op == OperationKind.DIL_CONV_3X3
    assert genotype.reduce[5].source == 0
    assert genotype.reduce[5].target == 4


def test_argmax_invariant_under_monotone_transform(rng):
    alpha = rng.standard_normal((14, 8))
    base = discretize(ArchParams(alpha_normal=alpha))
    moved = discretize(ArchParams(alpha_normal=np.exp(alpha) * 3 + 1))
    assert base.ops(CellKind.NORMAL) == moved.ops(CellKind.NORMAL)


def test_threshold_selects_gate_above():
    gates = np.full((14, 8), 0.05)
    gates[0, :3] = [0.1, 0.9, 0.4]
    alpha = np.log(gates / (1 - gates))
    genotype = discretize(
        ArchParams(alpha_normal=alpha),
        DiscretizeRule.THRESHOLD,
        GatingMode.SIGMOID,
    )
    assert genotype.normal[0].op == OperationKind.MAX_POOL_3X3
    assert genotype.ops(CellKind.NORMAL)[1:] == [OperationKind.NONE] * 13
    assert genotype.threshold == 0.5


def test_threshold_ignores_none_gate():
    alpha = np.full((14, 8), -3.0)
    alpha[:, 0] = 5.0
    genotype = discretize(
        ArchParams(alpha_normal=alpha), DiscretizeRule.THRESHOLD
    )
    assert genotype.retained(CellKind.NORMAL) == []


def test_top2_keeps_two_inputs_per_node(rng):
    genotype = discretize(
        ArchParams(alpha_normal=rng.standard_normal((14, 8))),
        DiscretizeRule.DARTS_TOP2,
    )
    retained = genotype.retained(CellKind.NORMAL)
    assert len(retained) == 8
    targets = [edge.target for _, edge in retained]
    assert all(targets.count(node) == 2 for node in (2, 3, 4, 5))
    assert all(edge.op != OperationKind.NONE for _, edge in retained)
    assert genotype.threshold is None


def test_round_trip_empty():
    genotype = Genotype.empty()
    assert genotype_parse(genotype_serialize(genotype)) == genotype


def test_round_trip_random(rng):
    for _ in range(25):
        genotype = random_genotype(rng)
        assert genotype_parse(genotype_serialize(genotype)) == genotype


def test_serialized_schema():
    payload = json.loads(genotype_serialize(Genotype.empty()))
    assert payload["version"] == 1
    assert payload["gating_mode"] == "softmax"
    assert payload["discretize_rule"] == "argmax"
    assert payload["normal"][0] == {"from": 0, "to": 2, "op": "none"}
    assert len(payload["reduce"]) == 14


def test_parse_unknown_op_names_token():
    payload = json.loads(genotype_serialize(Genotype.empty()))
    payload["normal"][3]["op"] = "conv_7x7"
    with pytest.raises(GenotypeParseError, match="normal\\[3\\].*conv_7x7"):
        genotype_parse(json.dumps(payload))


def test_parse_reports_position():
    with pytest.raises(GenotypeParseError, match="line 2"):
        genotype_parse('{\n  "version": }')


@pytest.mark.parametrize(
    "change, message",
    [
        (lambda p: p.pop("reduce"), "reduce"),
        (lambda p: p["normal"][0].pop("to"), "'to'"),
        (lambda p: p.update(version=2), "version 2"),
        (lambda p: p["normal"].pop(), "expected"),
    ],
)
def test_parse_rejects_malformed(change, message):
    payload = json.loads(genotype_serialize(Genotype.empty()))
    change(payload)
    with pytest.raises(GenotypeParseError, match=message):
        genotype_parse(json.dumps(payload))


def test_from_ops_checks_length():
    with pytest.raises(GenotypeMismatch):
        Genotype.from_ops([OperationKind.NONE] * 3, [OperationKind.NONE])


def test_dot_of_empty_genotype():
    dot = genotype_to_dot(Genotype.empty())
    assert dot.startswith("digraph normal_cell")
    assert dot.count("label=") == 7
    assert "->" not in dot


def test_dot_edge_count_matches_retained(rng):
    genotype = random_genotype(rng)
    for kind in CellKind:
        dot = genotype_to_dot(genotype, kind)
        assert dot.count("->") == len(genotype.retained(kind))


def test_dot_single_edge():
    ops = [OperationKind.NONE] * 14
    ops[2] = OperationKind.SKIP_CONNECT
    dot = genotype_to_dot(Genotype.from_ops(ops, ops), CellKind.REDUCE)
    assert dot.count("->") == 1
    assert "label=skip_connect" in dot
