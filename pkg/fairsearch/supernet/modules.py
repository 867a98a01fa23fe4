"""
Parameter containers and the candidate operations of a cell edge.

A :class:`Module` registers every ``requires_grad`` tensor and every
sub-module assigned to it, so parameters get stable dotted names
(``cells.2.edges.5.ops.sep_conv_3x3.dw1.weight``) that are identical in
the supernet and in derived child networks.
"""
import dataclasses as dc
from collections import OrderedDict
from typing import (
    Callable,
    Dict,
    Iterator,
    List,
    Mapping,
    Optional,
    Sequence,
    Tuple,
)

import numpy as np

from fairsearch.exceptions import CheckpointError, InvalidArgument
from fairsearch.space.operations import OperationKind
from fairsearch.tensor import (
    Tensor,
    batch_norm2d,
    concat,
    conv2d,
    crop,
    get_default_dtype,
    linear,
    parameter,
    pool2d,
    relu,
)


class Module:
    def __init__(self):
        object.__setattr__(self, "_parameters", OrderedDict())
        object.__setattr__(self, "_modules", OrderedDict())

    def __setattr__(self, name, value):
        if isinstance(value, Tensor):
            if value.requires_grad:
                self._parameters[name] = value
        elif isinstance(value, Module):
            self._modules[name] = value
        super().__setattr__(name, value)

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def named_parameters(self, prefix: str = "") -> Dict[str, Tensor]:
        named: Dict[str, Tensor] = OrderedDict()
        for name, tensor in self._parameters.items():
            named[prefix + name] = tensor
        for name, module in self._modules.items():
            named.update(module.named_parameters(f"{prefix}{name}."))
        return named

    def parameters(self) -> List[Tensor]:
        return list(self.named_parameters().values())

    def num_parameters(self) -> int:
        return sum(tensor.size for tensor in self.parameters())

    def parameter_arrays(self) -> Dict[str, np.ndarray]:
        return {
            name: tensor.numpy()
            for name, tensor in self.named_parameters().items()
        }

    def load_parameter_arrays(self, arrays: Mapping[str, np.ndarray]) -> None:
        """
        Overwrite every parameter from a name -> array mapping

        :param arrays: Mapping[str, np.ndarray] - must hold exactly the
        names of :meth:`named_parameters` with matching shapes
        """
        named = self.named_parameters()
        missing = sorted(set(named) - set(arrays))
        unexpected = sorted(set(arrays) - set(named))
        if missing or unexpected:
            raise CheckpointError(
                f"Parameter names differ: missing {missing[:5]}, "
                f"unexpected {unexpected[:5]}"
            )
        for name, tensor in named.items():
            array = np.asarray(arrays[name])
            if array.shape != tensor.shape:
                raise CheckpointError(
                    f"Parameter {name} has shape {array.shape} in the "
                    f"checkpoint, expected {tensor.shape}"
                )
            tensor.data[...] = array


class ModuleList(Module):
    def __init__(self, modules: Sequence[Module] = ()):
        super().__init__()
        object.__setattr__(self, "_items", [])
        for module in modules:
            self.append(module)

    def append(self, module: Module) -> None:
        self._modules[str(len(self._items))] = module
        self._items.append(module)

    def __getitem__(self, index: int) -> Module:
        return self._items[index]

    def __iter__(self) -> Iterator[Module]:
        return iter(self._items)

    def __len__(self) -> int:
        return len(self._items)


class ModuleDict(Module):
    def __init__(self, modules: Optional[Mapping[str, Module]] = None):
        super().__init__()
        for name, module in (modules or {}).items():
            self._modules[name] = module

    def __getitem__(self, name: str) -> Module:
        return self._modules[name]

    def __contains__(self, name: str) -> bool:
        return name in self._modules

    def __len__(self) -> int:
        return len(self._modules)

    def keys(self) -> List[str]:
        return list(self._modules)

    def values(self) -> List[Module]:
        return list(self._modules.values())


@dc.dataclass
class BuildContext:
    """
    Shared state while instantiating a network: one random generator
    drawn in construction order, so a seed fixes every initial value
    """

    rng: np.random.Generator
    use_batch_norm: bool = True
    bn_eps: float = 1e-5

    def he_normal(self, shape: Tuple[int, ...], fan_in: int) -> np.ndarray:
        std = np.sqrt(2.0 / fan_in)
        return (self.rng.standard_normal(shape) * std).astype(
            get_default_dtype()
        )


class Conv(Module):
    def __init__(
        self,
        ctx: BuildContext,
        in_channels: int,
        out_channels: int,
        kernel_size: int,
        stride: int = 1,
        padding: int = 0,
        dilation: int = 1,
        groups: int = 1,
    ):
        super().__init__()
        fan_in = (in_channels // groups) * kernel_size * kernel_size
        self.weight = parameter(
            ctx.he_normal(
                (
                    out_channels,
                    in_channels // groups,
                    kernel_size,
                    kernel_size,
                ),
                fan_in,
            )
        )
        self.stride = stride
        self.padding = padding
        self.dilation = dilation
        self.groups = groups

    def forward(self, x: Tensor) -> Tensor:
        return conv2d(
            x,
            self.weight,
            stride=self.stride,
            padding=self.padding,
            dilation=self.dilation,
            groups=self.groups,
        )


class BatchNorm(Module):
    """
    Batch norm over batch statistics, or the identity when the network
    is built without batch norm
    """

    def __init__(self, ctx: BuildContext, channels: int):
        super().__init__()
        self.enabled = ctx.use_batch_norm
        self.eps = ctx.bn_eps
        if self.enabled:
            self.gamma = parameter(np.ones(channels))
            self.beta = parameter(np.zeros(channels))

    def forward(self, x: Tensor) -> Tensor:
        if not self.enabled:
            return x
        return batch_norm2d(x, self.gamma, self.beta, eps=self.eps)


class Linear(Module):
    def __init__(
        self,
        ctx: BuildContext,
        in_features: int,
        out_features: int,
        bias: bool = True,
    ):
        super().__init__()
        self.weight = parameter(
            ctx.he_normal((in_features, out_features), in_features)
        )
        self.bias = parameter(np.zeros(out_features)) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        return linear(x, self.weight, self.bias)


class Zero(Module):
    def __init__(self, stride: int):
        super().__init__()
        self.stride = stride

    def forward(self, x: Tensor) -> Tensor:
        n, channels, height, width = x.shape
        return Tensor(
            np.zeros(
                (n, channels, height // self.stride, width // self.stride),
                dtype=x.data.dtype,
            )
        )


class Identity(Module):
    def forward(self, x: Tensor) -> Tensor:
        return x


class Pool(Module):
    def __init__(self, kind: str, stride: int):
        super().__init__()
        self.kind = kind
        self.stride = stride

    def forward(self, x: Tensor) -> Tensor:
        return pool2d(
            x, kind=self.kind, window=3, stride=self.stride, padding=1
        )


class ReLUConvBN(Module):
    def __init__(
        self,
        ctx: BuildContext,
        in_channels: int,
        out_channels: int,
        kernel_size: int = 1,
        stride: int = 1,
        padding: int = 0,
    ):
        super().__init__()
        self.conv = Conv(
            ctx, in_channels, out_channels, kernel_size, stride, padding
        )
        self.bn = BatchNorm(ctx, out_channels)

    def forward(self, x: Tensor) -> Tensor:
        return self.bn(self.conv(relu(x)))


class FactorizedReduce(Module):
    """
    Halve the spatial extent with two offset stride-2 1x1 convolutions
    whose outputs are concatenated along channels
    """

    def __init__(self, ctx: BuildContext, in_channels: int, out_channels: int):
        super().__init__()
        if out_channels < 2:
            raise InvalidArgument(
                f"FactorizedReduce needs at least 2 output channels, got "
                f"{out_channels}"
            )
        half = out_channels // 2
        self.conv1 = Conv(ctx, in_channels, half, 1, stride=2)
        self.conv2 = Conv(ctx, in_channels, out_channels - half, 1, stride=2)
        self.bn = BatchNorm(ctx, out_channels)

    def forward(self, x: Tensor) -> Tensor:
        x = relu(x)
        return self.bn(
            concat([self.conv1(x), self.conv2(crop(x, 1, 1))], axis=1)
        )


class DilConv(Module):
    def __init__(
        self,
        ctx: BuildContext,
        channels: int,
        kernel_size: int,
        stride: int,
        dilation: int,
    ):
        super().__init__()
        padding = dilation * (kernel_size - 1) // 2
        self.dw = Conv(
            ctx,
            channels,
            channels,
            kernel_size,
            stride=stride,
            padding=padding,
            dilation=dilation,
            groups=channels,
        )
        self.pw = Conv(ctx, channels, channels, 1)
        self.bn = BatchNorm(ctx, channels)

    def forward(self, x: Tensor) -> Tensor:
        return self.bn(self.pw(self.dw(relu(x))))


class SepConv(Module):
    """
    Two stacked depthwise-separable blocks, the first one carrying the
    stride
    """

    def __init__(
        self, ctx: BuildContext, channels: int, kernel_size: int, stride: int
    ):
        super().__init__()
        padding = (kernel_size - 1) // 2
        self.dw1 = Conv(
            ctx,
            channels,
            channels,
            kernel_size,
            stride=stride,
            padding=padding,
            groups=channels,
        )
        self.pw1 = Conv(ctx, channels, channels, 1)
        self.bn1 = BatchNorm(ctx, channels)
        self.dw2 = Conv(
            ctx,
            channels,
            channels,
            kernel_size,
            padding=padding,
            groups=channels,
        )
        self.pw2 = Conv(ctx, channels, channels, 1)
        self.bn2 = BatchNorm(ctx, channels)

    def forward(self, x: Tensor) -> Tensor:
        x = self.bn1(self.pw1(self.dw1(relu(x))))
        return self.bn2(self.pw2(self.dw2(relu(x))))


def _skip(ctx: BuildContext, channels: int, stride: int) -> Module:
    if stride == 1:
        return Identity()
    return FactorizedReduce(ctx, channels, channels)


OperationFactory = Callable[[BuildContext, int, int], Module]

OPERATIONS: Dict[OperationKind, OperationFactory] = {
    OperationKind.NONE: lambda ctx, c, stride: Zero(stride),
    OperationKind.MAX_POOL_3X3: lambda ctx, c, stride: Pool("max", stride),
    OperationKind.AVG_POOL_3X3: lambda ctx, c, stride: Pool("avg", stride),
    OperationKind.SKIP_CONNECT: _skip,
    OperationKind.SEP_CONV_3X3: lambda ctx, c, stride: SepConv(
        ctx, c, 3, stride
    ),
    OperationKind.SEP_CONV_5X5: lambda ctx, c, stride: SepConv(
        ctx, c, 5, stride
    ),
    OperationKind.DIL_CONV_3X3: lambda ctx, c, stride: DilConv(
        ctx, c, 3, stride, 2
    ),
    OperationKind.DIL_CONV_5X5: lambda ctx, c, stride: DilConv(
        ctx, c, 5, stride, 2
    ),
}


def build_operation(
    kind: OperationKind, ctx: BuildContext, channels: int, stride: int
) -> Module:
    return OPERATIONS[kind](ctx, channels, stride)
