from fairsearch.space.arch import (
    ArchParams,
    mixed_edge,
    mixed_edge_sigmoid,
    mixed_edge_softmax,
)
from fairsearch.space.cell import NUM_EDGES, CellSpec
from fairsearch.space.genotype import (
    CellEdge,
    Genotype,
    discretize,
    genotype_parse,
    genotype_serialize,
    genotype_to_dot,
)
from fairsearch.space.operations import (
    PRIMITIVES,
    CellKind,
    DiscretizeRule,
    GatingMode,
    OperationKind,
    canonical_primitives,
)

__all__ = [
    "OperationKind",
    "PRIMITIVES",
    "GatingMode",
    "CellKind",
    "DiscretizeRule",
    "canonical_primitives",
    "CellSpec",
    "NUM_EDGES",
    "ArchParams",
    "mixed_edge",
    "mixed_edge_softmax",
    "mixed_edge_sigmoid",
    "CellEdge",
    "Genotype",
    "discretize",
    "genotype_serialize",
    "genotype_parse",
    "genotype_to_dot",
]
