import json
import logging
from typing import Any, Dict, List, Optional, Tuple

import graphviz
import numpy as np
from pydantic import BaseModel, Field

from fairsearch.exceptions import GenotypeMismatch, GenotypeParseError
from fairsearch.space.arch import ArchParams
from fairsearch.space.cell import OUTPUT_NODE, CellSpec
from fairsearch.space.operations import (
    CellKind,
    DiscretizeRule,
    GatingMode,
    OperationKind,
)
from fairsearch.tensor.functional import stable_sigmoid
from fairsearch.utils.pydantic import (
    IS_PYDANTIC_V2,
    get_model_dump,
    parse_model,
)

if IS_PYDANTIC_V2:
    from pydantic import ConfigDict

logger = logging.getLogger(__name__)

GENOTYPE_VERSION = 1
DEFAULT_THRESHOLD = 0.5


class CellEdge(BaseModel):
    source: int = Field(alias="from")
    target: int = Field(alias="to")
    op: OperationKind

    if IS_PYDANTIC_V2:
        model_config = ConfigDict(populate_by_name=True)
    else:

        class Config:
            allow_population_by_field_name = True


class Genotype(BaseModel):
    """
    Discrete cell description: one entry per edge and cell kind, 'none'
    marking an absent edge
    """

    version: int = GENOTYPE_VERSION
    gating_mode: GatingMode = GatingMode.SOFTMAX
    discretize_rule: DiscretizeRule = DiscretizeRule.ARGMAX
    threshold: Optional[float] = None
    config_hash: Optional[str] = None
    normal: List[CellEdge]
    reduce: List[CellEdge]

    def cell(self, kind: CellKind) -> List[CellEdge]:
        return self.reduce if kind == CellKind.REDUCE else self.normal

    def ops(self, kind: CellKind) -> List[OperationKind]:
        return [edge.op for edge in self.cell(kind)]

    def retained(self, kind: CellKind) -> List[Tuple[int, CellEdge]]:
        return [
            (index, edge)
            for index, edge in enumerate(self.cell(kind))
            if edge.op != OperationKind.NONE
        ]

    def check(self) -> "Genotype":
        """
        Every cell edge must appear exactly once, in cell edge order

        :return: Genotype - self
        """
        expected = CellSpec.edges()
        for kind in CellKind:
            found = [(edge.source, edge.target) for edge in self.cell(kind)]
            if found != expected:
                raise GenotypeMismatch(
                    f"{kind.value} cell lists edges {found}, "
                    f"expected {expected}"
                )
        return self

    @classmethod
    def from_ops(
        cls,
        normal: List[OperationKind],
        reduce: List[OperationKind],
        **metadata: Any,
    ) -> "Genotype":
        edges = CellSpec.edges()
        if len(normal) != len(edges) or len(reduce) != len(edges):
            raise GenotypeMismatch(
                f"Expected {len(edges)} operations per cell, got "
                f"{len(normal)} normal and {len(reduce)} reduce"
            )
        return cls(
            normal=[
                CellEdge(source=s, target=t, op=op)
                for (s, t), op in zip(edges, normal)
            ],
            reduce=[
                CellEdge(source=s, target=t, op=op)
                for (s, t), op in zip(edges, reduce)
            ],
            **metadata,
        )

    @classmethod
    def empty(cls, **metadata: Any) -> "Genotype":
        nones = [OperationKind.NONE] * CellSpec.num_edges()
        return cls.from_ops(nones, list(nones), **metadata)


def _argmax_ops(
    alpha: np.ndarray, primitives: Tuple[OperationKind, ...]
) -> List[OperationKind]:
    # np.argmax returns the first maximal index, the lowest canonical one
    return [primitives[int(np.argmax(row))] for row in alpha]


def _threshold_ops(
    alpha: np.ndarray,
    primitives: Tuple[OperationKind, ...],
    threshold: float,
) -> List[OperationKind]:
    gates = stable_sigmoid(alpha.astype(np.float64))
    candidates = [
        position
        for position, kind in enumerate(primitives)
        if kind != OperationKind.NONE
    ]
    ops = []
    for row in gates:
        if not candidates:
            ops.append(OperationKind.NONE)
            continue
        best = max(candidates, key=lambda position: (row[position], -position))
        ops.append(
            primitives[best] if row[best] > threshold else OperationKind.NONE
        )
    return ops


def _edge_weights(alpha: np.ndarray, gating: GatingMode) -> np.ndarray:
    alpha = alpha.astype(np.float64)
    if gating == GatingMode.SIGMOID:
        return stable_sigmoid(alpha)
    shifted = np.exp(alpha - alpha.max(axis=1, keepdims=True))
    return shifted / shifted.sum(axis=1, keepdims=True)


def _top2_ops(
    alpha: np.ndarray,
    primitives: Tuple[OperationKind, ...],
    gating: GatingMode,
) -> List[OperationKind]:
    weights = _edge_weights(alpha, gating)
    candidates = [
        position
        for position, kind in enumerate(primitives)
        if kind != OperationKind.NONE
    ]
    ops = [OperationKind.NONE] * len(alpha)
    if not candidates:
        return ops
    for node in CellSpec.intermediate_nodes():
        scored = []
        for edge in CellSpec.incoming(node):
            best = max(
                candidates,
                key=lambda position: (weights[edge][position], -position),
            )
            scored.append((weights[edge][best], edge, best))
        scored.sort(key=lambda item: (-item[0], item[1]))
        for _, edge, best in scored[:2]:
            ops[edge] = primitives[best]
    return ops


def discretize(
    arch: ArchParams,
    rule: DiscretizeRule = DiscretizeRule.ARGMAX,
    gating: GatingMode = GatingMode.SOFTMAX,
    threshold: float = DEFAULT_THRESHOLD,
    config_hash: Optional[str] = None,
) -> Genotype:
    """
    Turn architecture parameters into a genotype

    :param arch: ArchParams - attention weights
    :param rule: DiscretizeRule - argmax over all operations ('none'
    included), sigmoid threshold, or the two strongest non-none inputs
    per node
    :param gating: GatingMode - gating used during the search, recorded
    and used to weight edges for the top-2 rule
    :param threshold: float - gate threshold of the threshold rule
    :param config_hash: Optional[str] - hash of the producing config
    :return: Genotype
    """
    per_kind = {}
    for kind in CellKind:
        alpha = arch.for_cell(kind).data
        if rule == DiscretizeRule.ARGMAX:
            per_kind[kind] = _argmax_ops(alpha, arch.primitives)
        elif rule == DiscretizeRule.THRESHOLD:
            per_kind[kind] = _threshold_ops(alpha, arch.primitives, threshold)
        else:
            per_kind[kind] = _top2_ops(alpha, arch.primitives, gating)
    return Genotype.from_ops(
        per_kind[CellKind.NORMAL],
        per_kind[CellKind.REDUCE],
        gating_mode=gating,
        discretize_rule=rule,
        threshold=threshold if rule == DiscretizeRule.THRESHOLD else None,
        config_hash=config_hash,
    )


def genotype_serialize(genotype: Genotype) -> str:
    return json.dumps(get_model_dump(genotype, by_alias=True), indent=2) + "\n"


def _check_entries(payload: Dict[str, Any]) -> None:
    known = {kind.value for kind in OperationKind}
    for kind in CellKind:
        entries = payload.get(kind.value)
        if not isinstance(entries, list):
            raise GenotypeParseError(
                f"field '{kind.value}' must be a list of edges"
            )
        for position, entry in enumerate(entries):
            if not isinstance(entry, dict):
                raise GenotypeParseError(
                    f"{kind.value}[{position}] must be an object"
                )
            for field in ("from", "to", "op"):
                if field not in entry:
                    raise GenotypeParseError(
                        f"{kind.value}[{position}] misses field '{field}'"
                    )
            if entry["op"] not in known:
                raise GenotypeParseError(
                    f"{kind.value}[{position}].op: unknown operation "
                    f"{entry['op']!r}"
                )


def genotype_parse(text: str) -> Genotype:
    """
    Parse the JSON form written by :func:`genotype_serialize`

    :param text: str - serialized genotype
    :return: Genotype
    """
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as e:
        raise GenotypeParseError(
            f"line {e.lineno} column {e.colno}: {e.msg}"
        ) from e
    if not isinstance(payload, dict):
        raise GenotypeParseError("genotype must be a JSON object")
    _check_entries(payload)
    try:
        genotype = parse_model(Genotype, payload)
    except ValueError as e:
        raise GenotypeParseError(str(e)) from e
    if genotype.version != GENOTYPE_VERSION:
        raise GenotypeParseError(
            f"unsupported genotype version {genotype.version}"
        )
    try:
        return genotype.check()
    except GenotypeMismatch as e:
        raise GenotypeParseError(str(e)) from e


_NODE_LABELS = {0: "c_{k-2}", 1: "c_{k-1}", OUTPUT_NODE: "c_{k}"}


def genotype_to_dot(
    genotype: Genotype, kind: CellKind = CellKind.NORMAL
) -> str:
    """
    DOT text of one cell: seven nodes and one labeled edge per retained
    operation

    :param genotype: Genotype
    :param kind: CellKind - which cell to draw
    :return: str - digraph source
    """
    graph = graphviz.Digraph(
        name=f"{kind.value}_cell",
        graph_attr={"rankdir": "LR"},
        node_attr={"shape": "rect", "style": "filled"},
    )
    for node in range(OUTPUT_NODE + 1):
        graph.node(str(node), label=_NODE_LABELS.get(node, str(node)))
    for _, edge in genotype.retained(kind):
        graph.edge(str(edge.source), str(edge.target), label=edge.op.value)
    return graph.source
