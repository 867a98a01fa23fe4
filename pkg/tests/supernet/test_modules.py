import numpy as np
import pytest

from fairsearch.exceptions import CheckpointError, InvalidArgument
from fairsearch.space import PRIMITIVES, OperationKind
from fairsearch.supernet.modules import (
    BatchNorm,
    BuildContext,
    Conv,
    FactorizedReduce,
    Module,
    ModuleList,
    build_operation,
)
from fairsearch.tensor import Tensor


@pytest.fixture()
def ctx():
    return BuildContext(rng=np.random.default_rng(0))


class Block(Module):
    def __init__(self, ctx):
        super().__init__()
        self.conv = Conv(ctx, 2, 4, 3, padding=1)
        self.norm = BatchNorm(ctx, 4)
        self.layers = ModuleList([Conv(ctx, 4, 4, 1)])
        self.constant = Tensor([1.0])

    def forward(self, x):
        return self.layers[0](self.norm(self.conv(x)))


def test_parameter_names(ctx):
    names = list(Block(ctx).named_parameters())
    assert names == [
        "conv.weight",
        "norm.gamma",
        "norm.beta",
        "layers.0.weight",
    ]


def test_num_parameters(ctx):
    assert Block(ctx).num_parameters() == 4 * 2 * 9 + 4 + 4 + 16


def test_batch_norm_disabled_is_identity():
    ctx = BuildContext(rng=np.random.default_rng(0), use_batch_norm=False)
    norm = BatchNorm(ctx, 3)
    x = Tensor(np.ones((2, 3, 2, 2)))
    assert norm(x) is x
    assert norm.parameters() == []


def test_load_parameter_arrays(ctx):
    source, target = Block(ctx), Block(ctx)
    target.load_parameter_arrays(source.parameter_arrays())
    for name, tensor in target.named_parameters().items():
        np.testing.assert_array_equal(
            tensor.data, source.named_parameters()[name].data
        )


def test_load_parameter_arrays_rejects_mismatch(ctx):
    block = Block(ctx)
    arrays = block.parameter_arrays()
    arrays["conv.weight"] = np.zeros((1, 1, 1, 1))
    with pytest.raises(CheckpointError, match="conv.weight"):
        block.load_parameter_arrays(arrays)
    del arrays["conv.weight"]
    with pytest.raises(CheckpointError, match="missing"):
        block.load_parameter_arrays(arrays)


@pytest.mark.parametrize("kind", PRIMITIVES, ids=lambda kind: kind.value)
@pytest.mark.parametrize("stride", [1, 2])
def test_operations_keep_channels(ctx, kind, stride):
    op = build_operation(kind, ctx, 4, stride)
    out = op(Tensor(np.random.default_rng(1).standard_normal((2, 4, 8, 8))))
    side = 8 // stride
    assert out.shape == (2, 4, side, side)


def test_none_operation_has_no_weights(ctx):
    assert build_operation(OperationKind.NONE, ctx, 4, 1).parameters() == []


def test_factorized_reduce_needs_two_channels(ctx):
    with pytest.raises(InvalidArgument):
        FactorizedReduce(ctx, 4, 1)


def test_same_seed_same_weights():
    first = Block(BuildContext(rng=np.random.default_rng(5)))
    second = Block(BuildContext(rng=np.random.default_rng(5)))
    np.testing.assert_array_equal(
        first.conv.weight.data, second.conv.weight.data
    )
