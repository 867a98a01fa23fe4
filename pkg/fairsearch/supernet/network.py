import logging
from functools import reduce
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from fairsearch.exceptions import (
    ConfigMismatch,
    GenotypeMismatch,
    InvalidArgument,
    ShapeMismatch,
)
from fairsearch.space.arch import ArchParams
from fairsearch.space.cell import NUM_INTERMEDIATE_NODES, CellSpec
from fairsearch.space.genotype import Genotype
from fairsearch.space.operations import CellKind, GatingMode, OperationKind
from fairsearch.supernet.config import SupernetConfig
from fairsearch.supernet.modules import (
    BatchNorm,
    BuildContext,
    Conv,
    FactorizedReduce,
    Linear,
    Module,
    ModuleDict,
    ModuleList,
    ReLUConvBN,
    build_operation,
)
from fairsearch.tensor import (
    Tensor,
    add,
    concat,
    global_avg_pool,
    relu,
    take_row,
    weighted_sum,
)
from fairsearch.utils.pydantic import copy_model

logger = logging.getLogger(__name__)


class MixedEdge(Module):
    def __init__(
        self,
        ctx: BuildContext,
        primitives: Sequence[OperationKind],
        channels: int,
        stride: int,
    ):
        super().__init__()
        self.ops = ModuleDict(
            {
                kind.value: build_operation(kind, ctx, channels, stride)
                for kind in primitives
            }
        )

    def forward(self, x: Tensor, gates: Tensor) -> Tensor:
        return weighted_sum(gates, [op(x) for op in self.ops.values()])


class DiscreteEdge(Module):
    """
    Edge of a derived cell: the retained operation, or nothing
    """

    def __init__(
        self,
        ctx: BuildContext,
        kind: OperationKind,
        channels: int,
        stride: int,
    ):
        super().__init__()
        self.kind = kind
        ops = {}
        if kind != OperationKind.NONE:
            ops[kind.value] = build_operation(kind, ctx, channels, stride)
        self.ops = ModuleDict(ops)

    @property
    def retained(self) -> bool:
        return len(self.ops) > 0

    def forward(self, x: Tensor) -> Tensor:
        return self.ops[self.kind.value](x)


class Cell(Module):
    def __init__(
        self,
        ctx: BuildContext,
        prev_prev_channels: int,
        prev_channels: int,
        channels: int,
        reduction: bool,
        reduction_prev: bool,
    ):
        super().__init__()
        self.reduction = reduction
        self.channels = channels
        if reduction_prev:
            self.preprocess0 = FactorizedReduce(
                ctx, prev_prev_channels, channels
            )
        else:
            self.preprocess0 = ReLUConvBN(ctx, prev_prev_channels, channels)
        self.preprocess1 = ReLUConvBN(ctx, prev_channels, channels)

    @property
    def kind(self) -> CellKind:
        return CellKind.REDUCE if self.reduction else CellKind.NORMAL

    def edge_stride(self, source: int) -> int:
        return 2 if self.reduction and source < 2 else 1

    def node_shape(self, s1: Tensor) -> Tuple[int, ...]:
        n, _, height, width = s1.shape
        factor = 2 if self.reduction else 1
        return n, self.channels, height // factor, width // factor

    def output_channels(self) -> int:
        return NUM_INTERMEDIATE_NODES * self.channels


class SearchCell(Cell):
    def __init__(
        self,
        ctx: BuildContext,
        primitives: Sequence[OperationKind],
        prev_prev_channels: int,
        prev_channels: int,
        channels: int,
        reduction: bool,
        reduction_prev: bool,
    ):
        super().__init__(
            ctx,
            prev_prev_channels,
            prev_channels,
            channels,
            reduction,
            reduction_prev,
        )
        self.edges = ModuleList(
            [
                MixedEdge(
                    ctx, primitives, channels, self.edge_stride(source)
                )
                for source, _ in CellSpec.edges()
            ]
        )

    def forward(self, s0: Tensor, s1: Tensor, gates: Tensor) -> Tensor:
        """
        :param s0: Tensor - output of the cell before the previous one
        :param s1: Tensor - output of the previous cell
        :param gates: Tensor - gate matrix [edges x operations]
        :return: Tensor - concatenation of the intermediate nodes
        """
        states = [self.preprocess0(s0), self.preprocess1(s1)]
        edges = CellSpec.edges()
        for node in CellSpec.intermediate_nodes():
            outputs = [
                self.edges[index](
                    states[edges[index][0]], take_row(gates, index)
                )
                for index in CellSpec.incoming(node)
            ]
            states.append(reduce(add, outputs))
        return concat(states[2:], axis=1)


class DiscreteCell(Cell):
    def __init__(
        self,
        ctx: BuildContext,
        ops: Sequence[OperationKind],
        prev_prev_channels: int,
        prev_channels: int,
        channels: int,
        reduction: bool,
        reduction_prev: bool,
    ):
        super().__init__(
            ctx,
            prev_prev_channels,
            prev_channels,
            channels,
            reduction,
            reduction_prev,
        )
        self.edges = ModuleList(
            [
                DiscreteEdge(ctx, kind, channels, self.edge_stride(source))
                for (source, _), kind in zip(CellSpec.edges(), ops)
            ]
        )

    def forward(self, s0: Tensor, s1: Tensor) -> Tensor:
        states = [self.preprocess0(s0), self.preprocess1(s1)]
        shape = self.node_shape(states[1])
        edges = CellSpec.edges()
        for node in CellSpec.intermediate_nodes():
            outputs = [
                self.edges[index](states[edges[index][0]])
                for index in CellSpec.incoming(node)
                if self.edges[index].retained
            ]
            if outputs:
                states.append(reduce(add, outputs))
            else:
                states.append(
                    Tensor(np.zeros(shape, dtype=states[1].data.dtype))
                )
        return concat(states[2:], axis=1)


CellFactory = Callable[[BuildContext, int, int, int, bool, bool], Cell]


class Network(Module):
    """
    Stem, a stack of cells and a classifier head. Every cell takes the
    outputs of the two preceding cells as its input nodes.
    """

    def __init__(self, cfg: SupernetConfig, seed: int, make_cell: CellFactory):
        super().__init__()
        cfg.check_image_size()
        self.cfg = cfg
        ctx = BuildContext(
            rng=np.random.default_rng(seed),
            use_batch_norm=cfg.use_batch_norm,
            bn_eps=cfg.bn_eps,
        )
        channels = cfg.init_channels
        self.stem = Conv(ctx, cfg.in_channels, channels, 3, padding=1)
        self.stem_bn = BatchNorm(ctx, channels)
        reductions = set(cfg.reduction_positions())
        prev_prev, prev = channels, channels
        reduction_prev = False
        cells: List[Cell] = []
        for index in range(cfg.num_cells):
            reduction = index in reductions
            if reduction:
                channels *= 2
            cell = make_cell(
                ctx, prev_prev, prev, channels, reduction, reduction_prev
            )
            cells.append(cell)
            prev_prev, prev = prev, cell.output_channels()
            reduction_prev = reduction
        self.cells = ModuleList(cells)
        self.feature_dim = prev
        self.classifier = Linear(ctx, prev, cfg.num_classes)
        self._ctx = ctx

    def check_images(self, images: Tensor) -> None:
        expected = (
            self.cfg.in_channels,
            self.cfg.image_size,
            self.cfg.image_size,
        )
        if images.ndim != 4 or images.shape[1:] != expected:
            raise ShapeMismatch(
                f"images have shape {images.shape}, expected "
                f"[N, {expected[0]}, {expected[1]}, {expected[2]}]"
            )

    def stem_forward(self, images: Tensor) -> Tensor:
        self.check_images(images)
        return self.stem_bn(self.stem(images))


class Supernet(Network):
    """
    Weight-sharing network: every edge carries all candidate operations,
    mixed by the gates of the architecture parameters
    """

    def __init__(self, cfg: SupernetConfig, seed: int = 0):
        self.primitives = cfg.primitive_kinds()

        def make_cell(ctx, prev_prev, prev, channels, reduction, red_prev):
            return SearchCell(
                ctx,
                self.primitives,
                prev_prev,
                prev,
                channels,
                reduction,
                red_prev,
            )

        super().__init__(cfg, seed, make_cell)
        hidden = 4 * cfg.embedding_dim
        self.projector_hidden = Linear(self._ctx, self.feature_dim, hidden)
        self.projector_out = Linear(self._ctx, hidden, cfg.embedding_dim)

    def features(
        self, images: Tensor, arch: ArchParams, gating: GatingMode
    ) -> Tensor:
        if tuple(arch.primitives) != tuple(self.primitives):
            raise ShapeMismatch(
                f"architecture parameters cover {arch.num_ops} operations "
                f"{[k.value for k in arch.primitives]}, the supernet "
                f"{[k.value for k in self.primitives]}"
            )
        gates = {kind: arch.gates(kind, gating) for kind in CellKind}
        s0 = s1 = self.stem_forward(images)
        for cell in self.cells:
            s0, s1 = s1, cell(s0, s1, gates[cell.kind])
        return global_avg_pool(s1)

    def forward_supervised(
        self, images: Tensor, arch: ArchParams, gating: GatingMode
    ) -> Tensor:
        return self.classifier(self.features(images, arch, gating))

    def forward_projection(
        self, images: Tensor, arch: ArchParams, gating: GatingMode
    ) -> Tensor:
        features = self.features(images, arch, gating)
        hidden = relu(self.projector_hidden(features))
        return self.projector_out(hidden)

    def forward(
        self, images: Tensor, arch: ArchParams, gating: GatingMode
    ) -> Tensor:
        return self.forward_supervised(images, arch, gating)

    def new_arch(self) -> ArchParams:
        return ArchParams(self.primitives)


class ChildNetwork(Network):
    """
    Discrete network derived from a genotype, without gates
    """

    def __init__(self, genotype: Genotype, cfg: SupernetConfig, seed: int = 0):
        genotype.check()
        allowed = set(cfg.primitive_kinds())
        for kind in CellKind:
            for position, edge in enumerate(genotype.cell(kind)):
                if edge.op not in allowed:
                    raise GenotypeMismatch(
                        f"{kind.value}[{position}] uses {edge.op.value}, "
                        f"which is not among the configured operations"
                    )
        self.genotype = genotype

        def make_cell(ctx, prev_prev, prev, channels, reduction, red_prev):
            kind = CellKind.REDUCE if reduction else CellKind.NORMAL
            return DiscreteCell(
                ctx,
                genotype.ops(kind),
                prev_prev,
                prev,
                channels,
                reduction,
                red_prev,
            )

        super().__init__(cfg, seed, make_cell)

    def features(self, images: Tensor) -> Tensor:
        s0 = s1 = self.stem_forward(images)
        for cell in self.cells:
            s0, s1 = s1, cell(s0, s1)
        return global_avg_pool(s1)

    def forward(self, images: Tensor) -> Tensor:
        return self.classifier(self.features(images))


def build_supernet(cfg: SupernetConfig, seed: int) -> Supernet:
    """
    Instantiate the supernet with seed-determined initial weights

    :param cfg: SupernetConfig
    :param seed: int - initialization seed
    :return: Supernet
    """
    net = Supernet(cfg, seed)
    logger.info(
        f"Built supernet: {cfg.num_cells} cells, reductions at "
        f"{cfg.reduction_positions()}, {net.num_parameters()} weights"
    )
    return net


def forward_supervised(
    net: Supernet, arch: ArchParams, images: Tensor, gating: GatingMode
) -> Tensor:
    return net.forward_supervised(images, arch, gating)


def forward_projection(
    net: Supernet, arch: ArchParams, images: Tensor, gating: GatingMode
) -> Tensor:
    return net.forward_projection(images, arch, gating)


def derive_child(
    genotype: Genotype,
    cfg: SupernetConfig,
    seed: int,
    num_cells: Optional[int] = None,
) -> ChildNetwork:
    """
    Build a freshly initialized discrete network from a genotype

    :param genotype: Genotype - retained operation per edge
    :param cfg: SupernetConfig - search configuration
    :param seed: int - initialization seed
    :param num_cells: Optional[int] - depth override for retraining
    :return: ChildNetwork
    """
    if num_cells is not None:
        if num_cells < 1:
            raise InvalidArgument(
                f"num_cells must be positive, got {num_cells}"
            )
        cfg = copy_model(cfg, {"num_cells": num_cells})
    child = ChildNetwork(genotype, cfg, seed)
    logger.info(
        f"Derived child: {cfg.num_cells} cells, "
        f"{child.num_parameters()} weights"
    )
    return child


def transfer_weights(child: ChildNetwork, supernet: Supernet) -> int:
    """
    Copy every child parameter from the supernet parameter of the same
    name

    :param child: ChildNetwork - receives the values
    :param supernet: Supernet - source of the values
    :return: int - number of copied tensors
    """
    source = supernet.named_parameters()
    copied = 0
    for name, tensor in child.named_parameters().items():
        if name not in source:
            raise ConfigMismatch(f"supernet has no parameter named {name}")
        if source[name].shape != tensor.shape:
            raise ConfigMismatch(
                f"parameter {name} has shape {source[name].shape} in the "
                f"supernet, {tensor.shape} in the child"
            )
        tensor.data[...] = source[name].data
        copied += 1
    return copied
