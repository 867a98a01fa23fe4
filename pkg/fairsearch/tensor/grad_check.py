from typing import Callable

import numpy as np

from fairsearch.exceptions import InvalidArgument
from fairsearch.tensor.tensor import Tape, Tensor

TensorProgram = Callable[[Tensor], Tensor]


def analytic_gradient(f: TensorProgram, x: Tensor) -> np.ndarray:
    requires_grad = x.requires_grad
    x.requires_grad = True
    try:
        with Tape() as tape:
            out = f(x)
        grads = tape.backward(out)
    finally:
        x.requires_grad = requires_grad
    return grads.get(x, np.zeros_like(x.data))


def numeric_gradient(f: TensorProgram, x: Tensor, h: float) -> np.ndarray:
    """
    Central differences of a scalar program, one coordinate at a time

    :param f: TensorProgram - scalar valued program of x
    :param x: Tensor - point of evaluation, perturbed in place and restored
    :param h: float - step size
    :return: np.ndarray - numeric gradient shaped like x
    """
    result = np.zeros_like(x.data)
    for index in np.ndindex(x.shape):
        original = x.data[index]
        x.data[index] = original + h
        upper = f(x).item()
        x.data[index] = original - h
        lower = f(x).item()
        x.data[index] = original
        result[index] = (upper - lower) / (2.0 * h)
    return result


def grad_check(f: TensorProgram, x: Tensor, h: float = 1e-5) -> float:
    """
    Compare the reverse-mode gradient of f at x with central differences

    :param f: TensorProgram - scalar valued program of x, 64-bit
    :param x: Tensor - float64 input
    :param h: float - step size in [1e-6, 1e-4]
    :return: float - max over coordinates of
    |analytic - numeric| / max(1, |analytic|, |numeric|)
    """
    if not 1e-6 <= h <= 1e-4:
        raise InvalidArgument(f"grad_check step {h} outside [1e-6, 1e-4]")
    if x.data.dtype != np.float64:
        raise InvalidArgument(
            f"grad_check needs float64 input, got {x.data.dtype.name}"
        )
    analytic = analytic_gradient(f, x)
    numeric = numeric_gradient(f, x, h)
    scale = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    if analytic.size == 0:
        return 0.0
    return float(np.max(np.abs(analytic - numeric) / scale))
