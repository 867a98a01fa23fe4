import numpy as np
import pytest

from fairsearch.exceptions import InvalidArgument
from fairsearch.tensor import Function, Tensor, grad_check, sum_all
from fairsearch.tensor.grad_check import analytic_gradient, numeric_gradient


class WrongSquare(Function):
    name = "wrong_square"

    def forward(self, x):
        self.x = x
        return x * x

    def backward(self, grad):
        return (grad * self.x,)


def test_numeric_gradient_restores_input():
    x = Tensor([1.0, -2.0])
    before = x.numpy()
    numeric = numeric_gradient(lambda t: sum_all(t * t), x, 1e-5)
    np.testing.assert_allclose(numeric, [2.0, -4.0], rtol=1e-8)
    np.testing.assert_array_equal(x.data, before)


def test_analytic_gradient_leaves_flag_untouched():
    x = Tensor([1.0, 2.0])
    np.testing.assert_allclose(
        analytic_gradient(lambda t: sum_all(t * t), x), [2.0, 4.0]
    )
    assert not x.requires_grad


def test_grad_check_passes_for_correct_rule(rng):
    x = Tensor(rng.standard_normal((3, 3)))
    assert grad_check(lambda t: sum_all(t * t), x) <= 1e-6


def test_grad_check_detects_wrong_rule():
    x = Tensor([1.0, 2.0, 3.0])
    error = grad_check(lambda t: sum_all(WrongSquare.apply(t)), x)
    assert error > 0.4


def test_grad_check_validates_step_and_dtype():
    x = Tensor([1.0])
    with pytest.raises(InvalidArgument, match="step"):
        grad_check(lambda t: sum_all(t), x, h=1e-2)
    with pytest.raises(InvalidArgument, match="float64"):
        grad_check(lambda t: sum_all(t), Tensor([1.0], dtype=np.float32))
