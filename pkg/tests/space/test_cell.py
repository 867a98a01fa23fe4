import pytest

from fairsearch.exceptions import InvalidArgument
from fairsearch.space import (
    NUM_EDGES,
    PRIMITIVES,
    CellSpec,
    OperationKind,
    canonical_primitives,
)


def test_operation_set_and_order():
    assert [kind.value for kind in PRIMITIVES] == [
        "none",
        "max_pool_3x3",
        "avg_pool_3x3",
        "skip_connect",
        "sep_conv_3x3",
        "sep_conv_5x5",
        "dil_conv_3x3",
        "dil_conv_5x5",
    ]


def test_edge_count():
    assert NUM_EDGES == 14 == sum(2 + k for k in range(4))


def test_edges_end_at_intermediate_nodes():
    edges = CellSpec.edges()
    assert edges[:2] == [(0, 2), (1, 2)]
    assert edges[-1] == (4, 5)
    assert {target for _, target in edges} == {2, 3, 4, 5}
    assert len(set(edges)) == len(edges)


def test_incoming_edges():
    assert CellSpec.incoming(2) == [0, 1]
    assert CellSpec.incoming(5) == [9, 10, 11, 12, 13]
    assert CellSpec.intermediate_nodes() == [2, 3, 4, 5]


def test_canonical_primitives_sorts():
    kinds = canonical_primitives(["skip_connect", "none"])
    assert kinds == (OperationKind.NONE, OperationKind.SKIP_CONNECT)


@pytest.mark.parametrize(
    "names", [[], ["conv_7x7"], ["none", "none"]], ids=str
)
def test_canonical_primitives_rejects(names):
    with pytest.raises(InvalidArgument):
        canonical_primitives(names)
