import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from fairsearch.exceptions import ShapeMismatch
from fairsearch.space.cell import NUM_EDGES
from fairsearch.space.operations import (
    PRIMITIVES,
    CellKind,
    GatingMode,
    OperationKind,
)
from fairsearch.tensor import (
    Tensor,
    activation,
    parameter,
    weighted_sum,
)

logger = logging.getLogger(__name__)


class ArchParams:
    """
    Architecture parameters (attention weights) of the two cell kinds.

    One matrix per cell kind, shaped [edges x operations] and shared by
    every cell of that kind.
    """

    def __init__(
        self,
        primitives: Sequence[OperationKind] = PRIMITIVES,
        alpha_normal: Optional[np.ndarray] = None,
        alpha_reduce: Optional[np.ndarray] = None,
    ):
        self.primitives: Tuple[OperationKind, ...] = tuple(primitives)
        shape = (NUM_EDGES, len(self.primitives))
        self.alpha_normal = parameter(
            self._checked(alpha_normal, shape, CellKind.NORMAL),
            name="alpha_normal",
        )
        self.alpha_reduce = parameter(
            self._checked(alpha_reduce, shape, CellKind.REDUCE),
            name="alpha_reduce",
        )

    @staticmethod
    def _checked(
        values: Optional[np.ndarray], shape: Tuple[int, int], kind: CellKind
    ) -> np.ndarray:
        if values is None:
            return np.zeros(shape)
        values = np.asarray(values)
        if values.shape != shape:
            raise ShapeMismatch(
                f"alpha_{kind.value} has shape {values.shape}, "
                f"expected {shape}"
            )
        return values

    @property
    def num_ops(self) -> int:
        return len(self.primitives)

    def parameters(self) -> List[Tensor]:
        return [self.alpha_normal, self.alpha_reduce]

    def named_parameters(self) -> Dict[str, Tensor]:
        return {
            "alpha_normal": self.alpha_normal,
            "alpha_reduce": self.alpha_reduce,
        }

    def for_cell(self, kind: CellKind) -> Tensor:
        if kind == CellKind.REDUCE:
            return self.alpha_reduce
        return self.alpha_normal

    def gates(self, kind: CellKind, gating: GatingMode) -> Tensor:
        """
        Gate matrix of a cell kind, one row per edge

        :param kind: CellKind - normal or reduce
        :param gating: GatingMode - softmax across a row or sigmoid
        per entry
        :return: Tensor [edges x operations]
        """
        name = (
            "softmax_lastdim" if gating == GatingMode.SOFTMAX else "sigmoid"
        )
        return activation(self.for_cell(kind), name)

    def copy(self) -> "ArchParams":
        return ArchParams(
            self.primitives,
            self.alpha_normal.numpy(),
            self.alpha_reduce.numpy(),
        )

    def to_dict(self) -> Dict[str, object]:
        return {
            "primitives": [kind.value for kind in self.primitives],
            "alpha_normal": self.alpha_normal.data.tolist(),
            "alpha_reduce": self.alpha_reduce.data.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> "ArchParams":
        return cls(
            [OperationKind(name) for name in data["primitives"]],
            np.asarray(data["alpha_normal"], dtype=np.float64),
            np.asarray(data["alpha_reduce"], dtype=np.float64),
        )


def mixed_edge(ops_out: Sequence[Tensor], gates: Tensor) -> Tensor:
    return weighted_sum(gates, ops_out)


def mixed_edge_softmax(
    ops_out: Sequence[Tensor], alpha_edge: Tensor
) -> Tensor:
    """
    Edge output under softmax relaxation:
    ``sum_o softmax(alpha)_o * o(x)``

    :param ops_out: Sequence[Tensor] - one output per operation
    :param alpha_edge: Tensor - attention weights of the edge
    :return: Tensor
    """
    return weighted_sum(activation(alpha_edge, "softmax_lastdim"), ops_out)


def mixed_edge_sigmoid(
    ops_out: Sequence[Tensor], alpha_edge: Tensor
) -> Tensor:
    """
    Edge output under independent sigmoid gates:
    ``sum_o sigmoid(alpha_o) * o(x)``

    :param ops_out: Sequence[Tensor] - one output per operation
    :param alpha_edge: Tensor - attention weights of the edge
    :return: Tensor
    """
    return weighted_sum(activation(alpha_edge, "sigmoid"), ops_out)
