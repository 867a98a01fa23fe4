"""
Differentiable primitives.

Every primitive is a :class:`Function` subclass with a hand-written
backward rule, plus a thin functional wrapper. Shapes follow the NCHW
layout for image batches. Broadcasting is limited to the per-channel
affine terms of batch norm and the bias of ``linear``.
"""
from typing import Optional, Sequence, Tuple

import numpy as np

from fairsearch.exceptions import InvalidArgument, ShapeMismatch
from fairsearch.tensor.tensor import Function, Tensor


def _check_same_shape(name: str, *arrays: np.ndarray) -> None:
    first = arrays[0].shape
    for position, array in enumerate(arrays[1:], start=1):
        if array.shape != first:
            raise ShapeMismatch(
                f"{name}: operand {position} has shape {array.shape}, "
                f"expected {first}"
            )


class Add(Function):
    name = "add"

    def forward(self, a, b):
        _check_same_shape(self.name, a, b)
        return a + b

    def backward(self, grad):
        return grad, grad


class Mul(Function):
    name = "mul"

    def forward(self, a, b):
        _check_same_shape(self.name, a, b)
        self.saved = (a, b)
        return a * b

    def backward(self, grad):
        a, b = self.saved
        return grad * b, grad * a


class Scale(Function):
    name = "scale"

    def forward(self, a, factor: float):
        self.factor = factor
        return a * factor

    def backward(self, grad):
        return (grad * self.factor,)


class SumAll(Function):
    name = "sum"

    def forward(self, a):
        self.shape = a.shape
        return np.asarray(a.sum(), dtype=a.dtype)

    def backward(self, grad):
        return (np.full(self.shape, grad, dtype=grad.dtype),)


class MeanAll(Function):
    name = "mean"

    def forward(self, a):
        self.shape = a.shape
        self.count = a.size
        return np.asarray(a.mean(), dtype=a.dtype)

    def backward(self, grad):
        return (np.full(self.shape, grad / self.count, dtype=grad.dtype),)


class Reshape(Function):
    name = "reshape"

    def forward(self, a, shape: Tuple[int, ...]):
        self.shape = a.shape
        return a.reshape(shape)

    def backward(self, grad):
        return (grad.reshape(self.shape),)


class Concat(Function):
    name = "concat"

    def forward(self, *arrays, axis: int = 1):
        reference = arrays[0].shape
        for position, array in enumerate(arrays[1:], start=1):
            if array.ndim != len(reference) or any(
                extent != reference[dim]
                for dim, extent in enumerate(array.shape)
                if dim != axis
            ):
                raise ShapeMismatch(
                    f"concat: operand {position} has shape {array.shape}, "
                    f"incompatible with {reference} outside axis {axis}"
                )
        self.axis = axis
        self.splits = np.cumsum([a.shape[axis] for a in arrays])[:-1]
        return np.concatenate(arrays, axis=axis)

    def backward(self, grad):
        return tuple(np.split(grad, self.splits, axis=self.axis))


class Crop(Function):
    name = "crop"

    def forward(self, x, top: int, left: int):
        self.shape = x.shape
        self.top, self.left = top, left
        return x[:, :, top:, left:]

    def backward(self, grad):
        full = np.zeros(self.shape, dtype=grad.dtype)
        full[:, :, self.top :, self.left :] = grad
        return (full,)


class TakeRow(Function):
    name = "take_row"

    def forward(self, a, index: int):
        if a.ndim != 2:
            raise ShapeMismatch(f"take_row: expected a matrix, got {a.shape}")
        self.shape = a.shape
        self.index = index
        return a[index].copy()

    def backward(self, grad):
        full = np.zeros(self.shape, dtype=grad.dtype)
        full[self.index] = grad
        return (full,)


class ReLU(Function):
    name = "relu"

    def forward(self, x):
        self.mask = x > 0
        return np.where(self.mask, x, 0).astype(x.dtype)

    def backward(self, grad):
        return (grad * self.mask,)


def stable_sigmoid(x: np.ndarray) -> np.ndarray:
    # exp of a non-positive argument never overflows
    decay = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + decay), decay / (1.0 + decay))


class Sigmoid(Function):
    name = "sigmoid"

    def forward(self, x):
        self.out = stable_sigmoid(x)
        return self.out

    def backward(self, grad):
        return (grad * self.out * (1.0 - self.out),)


class Softmax(Function):
    name = "softmax"

    def forward(self, x):
        shifted = x - x.max(axis=-1, keepdims=True)
        exp_x = np.exp(shifted)
        self.out = exp_x / exp_x.sum(axis=-1, keepdims=True)
        return self.out

    def backward(self, grad):
        s = self.out
        return (s * (grad - (grad * s).sum(axis=-1, keepdims=True)),)


class Linear(Function):
    name = "linear"

    def forward(self, x, weight, bias=None):
        if x.ndim != 2 or weight.ndim != 2:
            raise ShapeMismatch(
                f"linear: expected [N,D] input and [D,K] weight, got "
                f"{x.shape} and {weight.shape}"
            )
        if x.shape[1] != weight.shape[0]:
            raise ShapeMismatch(
                f"linear: inner dimension D differs, input has "
                f"{x.shape[1]}, weight has {weight.shape[0]}"
            )
        if bias is not None and bias.shape != (weight.shape[1],):
            raise ShapeMismatch(
                f"linear: bias has shape {bias.shape}, expected "
                f"({weight.shape[1]},)"
            )
        self.saved = (x, weight)
        self.has_bias = bias is not None
        out = x @ weight
        if bias is not None:
            out = out + bias
        return out

    def backward(self, grad):
        x, weight = self.saved
        grads = [grad @ weight.T, x.T @ grad]
        if self.has_bias:
            grads.append(grad.sum(axis=0))
        return tuple(grads)


class Conv2d(Function):
    name = "conv2d"

    def forward(
        self,
        x,
        weight,
        stride: int = 1,
        padding: int = 0,
        dilation: int = 1,
        groups: int = 1,
    ):
        if stride < 1 or dilation < 1 or groups < 1 or padding < 0:
            raise InvalidArgument(
                f"conv2d: invalid stride={stride}, padding={padding}, "
                f"dilation={dilation}, groups={groups}"
            )
        if x.ndim != 4 or weight.ndim != 4:
            raise ShapeMismatch(
                f"conv2d: expected NCHW input and 4-d weight, got "
                f"{x.shape} and {weight.shape}"
            )
        n, channels, height, width = x.shape
        out_channels, group_channels, kh, kw = weight.shape
        if channels % groups:
            raise ShapeMismatch(
                f"conv2d: in_channels {channels} not divisible by "
                f"groups {groups}"
            )
        if out_channels % groups:
            raise ShapeMismatch(
                f"conv2d: out_channels {out_channels} not divisible by "
                f"groups {groups}"
            )
        if group_channels != channels // groups:
            raise ShapeMismatch(
                f"conv2d: weight in_channels/groups is {group_channels}, "
                f"input provides {channels // groups}"
            )
        out_h = (height + 2 * padding - dilation * (kh - 1) - 1) // stride + 1
        out_w = (width + 2 * padding - dilation * (kw - 1) - 1) // stride + 1
        if out_h < 1:
            raise ShapeMismatch(f"conv2d: output height {out_h} < 1")
        if out_w < 1:
            raise ShapeMismatch(f"conv2d: output width {out_w} < 1")

        padded = np.pad(
            x, ((0, 0), (0, 0), (padding, padding), (padding, padding))
        )
        self.geometry = (
            n,
            channels,
            height,
            width,
            out_h,
            out_w,
            stride,
            padding,
            dilation,
            groups,
        )
        self.kernel = weight.reshape(
            groups, out_channels // groups, group_channels, kh, kw
        )
        self.padded = padded
        self.weight_shape = weight.shape

        out = np.zeros(
            (n, groups, out_channels // groups, out_h, out_w),
            dtype=np.result_type(x, weight),
        )
        for i in range(kh):
            for j in range(kw):
                patch = self._window(padded, i, j).reshape(
                    n, groups, group_channels, out_h, out_w
                )
                out += np.einsum(
                    "ngchw,goc->ngohw", patch, self.kernel[:, :, :, i, j]
                )
        return out.reshape(n, out_channels, out_h, out_w)

    def _window(self, padded: np.ndarray, i: int, j: int) -> np.ndarray:
        _, _, _, _, out_h, out_w, stride, _, dilation, _ = self.geometry
        top, left = i * dilation, j * dilation
        return padded[
            :,
            :,
            top : top + stride * (out_h - 1) + 1 : stride,
            left : left + stride * (out_w - 1) + 1 : stride,
        ]

    def backward(self, grad):
        (
            n,
            channels,
            height,
            width,
            out_h,
            out_w,
            _,
            padding,
            _,
            groups,
        ) = self.geometry
        kernel = self.kernel
        _, out_per_group, group_channels, kh, kw = kernel.shape
        grad_groups = grad.reshape(n, groups, out_per_group, out_h, out_w)
        d_padded = np.zeros_like(self.padded)
        d_kernel = np.zeros_like(kernel)
        for i in range(kh):
            for j in range(kw):
                patch = self._window(self.padded, i, j).reshape(
                    n, groups, group_channels, out_h, out_w
                )
                d_kernel[:, :, :, i, j] = np.einsum(
                    "ngohw,ngchw->goc", grad_groups, patch
                )
                d_patch = np.einsum(
                    "ngohw,goc->ngchw", grad_groups, kernel[:, :, :, i, j]
                )
                self._window(d_padded, i, j)[...] += d_patch.reshape(
                    n, channels, out_h, out_w
                )
        d_x = d_padded[
            :, :, padding : padding + height, padding : padding + width
        ]
        return d_x, d_kernel.reshape(self.weight_shape)


class Pool2d(Function):
    """
    Max or average pooling over square windows.

    Max pooling routes the adjoint to the first maximal element in
    row-major window order. Average pooling always divides by the full
    window area, padded cells included.
    """

    name = "pool2d"

    def forward(
        self,
        x,
        kind: str = "max",
        window: int = 3,
        stride: int = 1,
        padding: int = 0,
    ):
        if kind not in ("max", "avg"):
            raise InvalidArgument(f"pool2d: unknown kind {kind!r}")
        if window < 1 or stride < 1:
            raise InvalidArgument(
                f"pool2d: invalid window={window}, stride={stride}"
            )
        if padding < 0 or padding > window // 2:
            raise InvalidArgument(
                f"pool2d: padding {padding} outside [0, {window // 2}]"
            )
        if x.ndim != 4:
            raise ShapeMismatch(f"pool2d: expected NCHW, got {x.shape}")
        n, channels, height, width = x.shape
        out_h = (height + 2 * padding - window) // stride + 1
        out_w = (width + 2 * padding - window) // stride + 1
        if out_h < 1 or out_w < 1:
            raise ShapeMismatch(
                f"pool2d: output extent {out_h}x{out_w} is empty"
            )
        fill = -np.inf if kind == "max" else 0.0
        padded = np.pad(
            x,
            ((0, 0), (0, 0), (padding, padding), (padding, padding)),
            constant_values=fill,
        )
        self.kind, self.window = kind, window
        self.geometry = (height, width, out_h, out_w, stride, padding)
        self.padded_shape = padded.shape

        if kind == "avg":
            out = np.zeros((n, channels, out_h, out_w), dtype=x.dtype)
            for i in range(window):
                for j in range(window):
                    out += self._window(padded, i, j)
            return out / (window * window)

        out = np.full((n, channels, out_h, out_w), -np.inf, dtype=x.dtype)
        argmax = np.zeros((n, channels, out_h, out_w), dtype=np.int64)
        position = 0
        for i in range(window):
            for j in range(window):
                patch = self._window(padded, i, j)
                better = patch > out
                out = np.where(better, patch, out)
                argmax = np.where(better, position, argmax)
                position += 1
        self.argmax = argmax
        return out

    def _window(self, padded: np.ndarray, i: int, j: int) -> np.ndarray:
        _, _, out_h, out_w, stride, _ = self.geometry
        return padded[
            :,
            :,
            i : i + stride * (out_h - 1) + 1 : stride,
            j : j + stride * (out_w - 1) + 1 : stride,
        ]

    def backward(self, grad):
        height, width, _, _, _, padding = self.geometry
        d_padded = np.zeros(self.padded_shape, dtype=grad.dtype)
        area = self.window * self.window
        position = 0
        for i in range(self.window):
            for j in range(self.window):
                if self.kind == "avg":
                    self._window(d_padded, i, j)[...] += grad / area
                else:
                    self._window(d_padded, i, j)[...] += grad * (
                        self.argmax == position
                    )
                position += 1
        return (
            d_padded[
                :, :, padding : padding + height, padding : padding + width
            ],
        )


class BatchNorm2d(Function):
    name = "batch_norm2d"

    def forward(self, x, gamma, beta, eps: float = 1e-5):
        if x.ndim != 4:
            raise ShapeMismatch(f"batch_norm2d: expected NCHW, got {x.shape}")
        channels = x.shape[1]
        if gamma.shape != (channels,) or beta.shape != (channels,):
            raise ShapeMismatch(
                f"batch_norm2d: gamma/beta shapes {gamma.shape}/"
                f"{beta.shape} do not match {channels} channels"
            )
        count = x.shape[0] * x.shape[2] * x.shape[3]
        if count < 2:
            raise ShapeMismatch(
                "batch_norm2d: batch*height*width must be at least 2 per "
                f"channel, got {count}"
            )
        axes = (0, 2, 3)
        centered = x - x.mean(axis=axes, keepdims=True)
        variance = (centered * centered).mean(axis=axes, keepdims=True)
        inv_std = 1.0 / np.sqrt(variance + eps)
        x_hat = centered * inv_std
        self.saved = (x_hat, inv_std, gamma, count)
        return gamma[None, :, None, None] * x_hat + beta[None, :, None, None]

    def backward(self, grad):
        x_hat, inv_std, gamma, count = self.saved
        axes = (0, 2, 3)
        d_gamma = (grad * x_hat).sum(axis=axes)
        d_beta = grad.sum(axis=axes)
        d_x_hat = grad * gamma[None, :, None, None]
        d_x = (inv_std / count) * (
            count * d_x_hat
            - d_x_hat.sum(axis=axes, keepdims=True)
            - x_hat * (d_x_hat * x_hat).sum(axis=axes, keepdims=True)
        )
        return d_x, d_gamma, d_beta


class GlobalAvgPool(Function):
    name = "global_avg_pool"

    def forward(self, x):
        if x.ndim != 4:
            raise ShapeMismatch(
                f"global_avg_pool: expected NCHW, got {x.shape}"
            )
        self.shape = x.shape
        return x.mean(axis=(2, 3))

    def backward(self, grad):
        _, _, height, width = self.shape
        spread = grad[:, :, None, None] / (height * width)
        return (np.broadcast_to(spread, self.shape).copy(),)


class WeightedSum(Function):
    """
    Gated sum ``sum_k gates[k] * outputs[k]`` of equally shaped tensors.
    """

    name = "weighted_sum"

    def forward(self, gates, *outputs):
        if gates.ndim != 1 or gates.shape[0] != len(outputs):
            raise ShapeMismatch(
                f"weighted_sum: {gates.shape} gates for "
                f"{len(outputs)} outputs"
            )
        _check_same_shape(self.name, *outputs)
        self.saved = (gates, outputs)
        total = np.zeros_like(outputs[0])
        for gate, output in zip(gates, outputs):
            total = total + gate * output
        return total

    def backward(self, grad):
        gates, outputs = self.saved
        d_gates = np.array(
            [(grad * output).sum() for output in outputs], dtype=grad.dtype
        )
        return (d_gates,) + tuple(gate * grad for gate in gates)


def add(a: Tensor, b: Tensor) -> Tensor:
    return Add.apply(a, b)


def mul(a: Tensor, b: Tensor) -> Tensor:
    return Mul.apply(a, b)


def scale(a: Tensor, factor: float) -> Tensor:
    return Scale.apply(a, factor=factor)


def sum_all(a: Tensor) -> Tensor:
    return SumAll.apply(a)


def mean_all(a: Tensor) -> Tensor:
    return MeanAll.apply(a)


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    return Reshape.apply(a, shape=tuple(shape))


def concat(tensors: Sequence[Tensor], axis: int = 1) -> Tensor:
    return Concat.apply(*tensors, axis=axis)


def crop(x: Tensor, top: int, left: int) -> Tensor:
    return Crop.apply(x, top=top, left=left)


def take_row(a: Tensor, index: int) -> Tensor:
    return TakeRow.apply(a, index=index)


def activation(x: Tensor, kind: str) -> Tensor:
    """
    Elementwise activation or row-wise softmax

    :param x: Tensor - input
    :param kind: str - relu, sigmoid or softmax_lastdim
    :return: Tensor
    """
    if kind == "relu":
        return ReLU.apply(x)
    if kind == "sigmoid":
        return Sigmoid.apply(x)
    if kind == "softmax_lastdim":
        return Softmax.apply(x)
    raise InvalidArgument(f"Unknown activation {kind!r}")


def relu(x: Tensor) -> Tensor:
    return ReLU.apply(x)


def sigmoid(x: Tensor) -> Tensor:
    return Sigmoid.apply(x)


def softmax(x: Tensor) -> Tensor:
    return Softmax.apply(x)


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    if bias is None:
        return Linear.apply(x, weight)
    return Linear.apply(x, weight, bias)


def conv2d(
    x: Tensor,
    weight: Tensor,
    stride: int = 1,
    padding: int = 0,
    dilation: int = 1,
    groups: int = 1,
) -> Tensor:
    return Conv2d.apply(
        x,
        weight,
        stride=stride,
        padding=padding,
        dilation=dilation,
        groups=groups,
    )


def pool2d(
    x: Tensor,
    kind: str = "max",
    window: int = 3,
    stride: int = 1,
    padding: int = 0,
) -> Tensor:
    return Pool2d.apply(
        x, kind=kind, window=window, stride=stride, padding=padding
    )


def batch_norm2d(
    x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5
) -> Tensor:
    return BatchNorm2d.apply(x, gamma, beta, eps=eps)


def global_avg_pool(x: Tensor) -> Tensor:
    return GlobalAvgPool.apply(x)


def weighted_sum(gates: Tensor, outputs: Sequence[Tensor]) -> Tensor:
    return WeightedSum.apply(gates, *outputs)
