import numpy as np
import pytest

from fairsearch.exceptions import InvalidArgument, ShapeMismatch
from fairsearch.tensor import (
    Tensor,
    activation,
    add,
    batch_norm2d,
    concat,
    conv2d,
    crop,
    global_avg_pool,
    grad_check,
    linear,
    pool2d,
    relu,
    sigmoid,
    softmax,
    sum_all,
    take_row,
    weighted_sum,
)
from fairsearch.tensor.functional import stable_sigmoid


def test_add_shape_mismatch_names_operand():
    with pytest.raises(ShapeMismatch, match="operand 1"):
        add(Tensor(np.zeros((2, 3))), Tensor(np.zeros((3, 2))))


def test_softmax_rows_sum_to_one():
    out = softmax(Tensor([[1.0, 2.0, 3.0], [1000.0, 1000.0, 1000.0]]))
    np.testing.assert_allclose(out.data.sum(axis=-1), [1.0, 1.0])
    np.testing.assert_allclose(out.data[1], [1 / 3] * 3)


def test_sigmoid_is_stable_for_large_inputs():
    values = stable_sigmoid(np.array([-1000.0, 0.0, 1000.0]))
    np.testing.assert_allclose(values, [0.0, 0.5, 1.0])


def test_activation_dispatch():
    x = Tensor([[-1.0, 2.0]])
    np.testing.assert_allclose(activation(x, "relu").data, [[0.0, 2.0]])
    np.testing.assert_allclose(
        activation(x, "sigmoid").data, sigmoid(x).data
    )
    np.testing.assert_allclose(
        activation(x, "softmax_lastdim").data, softmax(x).data
    )
    with pytest.raises(InvalidArgument):
        activation(x, "tanh")


def test_relu_zeroes_negatives():
    np.testing.assert_allclose(
        relu(Tensor([-2.0, 0.0, 3.0])).data, [0.0, 0.0, 3.0]
    )


def test_linear_checks_inner_dimension():
    with pytest.raises(ShapeMismatch, match="inner dimension"):
        linear(Tensor(np.zeros((2, 3))), Tensor(np.zeros((4, 5))))


def test_linear_values():
    x = Tensor([[1.0, 2.0]])
    w = Tensor([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]])
    b = Tensor([0.5, 0.5, 0.5])
    np.testing.assert_allclose(linear(x, w, b).data, [[1.5, 2.5, 3.5]])


def test_conv2d_identity_kernel():
    x = Tensor(np.arange(18.0).reshape(1, 2, 3, 3))
    weight = np.zeros((2, 2, 3, 3))
    weight[0, 0, 1, 1] = 1.0
    weight[1, 1, 1, 1] = 1.0
    out = conv2d(x, Tensor(weight), padding=1)
    np.testing.assert_allclose(out.data, x.data)


def test_conv2d_all_ones_counts_window_overlap():
    out = conv2d(
        Tensor(np.ones((1, 1, 3, 3))), Tensor(np.ones((1, 1, 3, 3))), padding=1
    )
    np.testing.assert_array_equal(
        out.data[0, 0], [[4.0, 6.0, 4.0], [6.0, 9.0, 6.0], [4.0, 6.0, 4.0]]
    )


def reference_conv2d(x, weight, stride, padding, dilation, groups):
    n, _, height, width = x.shape
    out_channels, group_in, kh, kw = weight.shape
    group_out = out_channels // groups
    padded = np.pad(x, ((0, 0), (0, 0), (padding,) * 2, (padding,) * 2))
    out_h = (height + 2 * padding - dilation * (kh - 1) - 1) // stride + 1
    out_w = (width + 2 * padding - dilation * (kw - 1) - 1) // stride + 1
    out = np.zeros((n, out_channels, out_h, out_w))
    for b in range(n):
        for o in range(out_channels):
            first = (o // group_out) * group_in
            for i in range(out_h):
                for j in range(out_w):
                    for c in range(group_in):
                        for u in range(kh):
                            for v in range(kw):
                                out[b, o, i, j] += (
                                    weight[o, c, u, v]
                                    * padded[
                                        b,
                                        first + c,
                                        i * stride + u * dilation,
                                        j * stride + v * dilation,
                                    ]
                                )
    return out


@pytest.mark.parametrize("stride", [1, 2])
def test_conv2d_dilated_grouped_matches_loops(rng, stride):
    x = rng.standard_normal((2, 4, 5, 5))
    weight = rng.standard_normal((6, 2, 3, 3))
    out = conv2d(
        Tensor(x),
        Tensor(weight),
        stride=stride,
        padding=2,
        dilation=2,
        groups=2,
    )
    expected = reference_conv2d(x, weight, stride, 2, 2, 2)
    np.testing.assert_allclose(out.data, expected, atol=1e-12)


@pytest.mark.parametrize(
    "stride, padding, dilation, expected",
    [(1, 1, 1, 5), (2, 1, 1, 3), (1, 2, 2, 5), (1, 0, 1, 3)],
)
def test_conv2d_output_size(stride, padding, dilation, expected):
    out = conv2d(
        Tensor(np.zeros((1, 2, 5, 5))),
        Tensor(np.zeros((4, 2, 3, 3))),
        stride=stride,
        padding=padding,
        dilation=dilation,
    )
    assert out.shape == (1, 4, expected, expected)


def test_conv2d_groups_must_divide_channels():
    with pytest.raises(ShapeMismatch, match="groups"):
        conv2d(
            Tensor(np.zeros((1, 3, 4, 4))),
            Tensor(np.zeros((3, 1, 3, 3))),
            groups=2,
        )


def test_conv2d_rejects_empty_output():
    with pytest.raises(ShapeMismatch, match="output height"):
        conv2d(Tensor(np.zeros((1, 1, 2, 2))), Tensor(np.zeros((1, 1, 3, 3))))


def test_max_pool_values():
    x = Tensor(np.arange(16.0).reshape(1, 1, 4, 4))
    out = pool2d(x, "max", window=3, stride=1, padding=1)
    assert out.data[0, 0, 0, 0] == 5.0
    assert out.data[0, 0, 3, 3] == 15.0


def test_avg_pool_counts_padding():
    x = Tensor(np.ones((1, 1, 3, 3)))
    out = pool2d(x, "avg", window=3, stride=1, padding=1)
    assert out.data[0, 0, 1, 1] == pytest.approx(1.0)
    assert out.data[0, 0, 0, 0] == pytest.approx(4.0 / 9.0)


def test_pool_rejects_unknown_kind_and_padding():
    x = Tensor(np.zeros((1, 1, 3, 3)))
    with pytest.raises(InvalidArgument):
        pool2d(x, "median")
    with pytest.raises(InvalidArgument):
        pool2d(x, "max", window=3, padding=2)


def test_batch_norm_normalizes_per_channel(rng):
    x = Tensor(rng.normal(3.0, 2.0, size=(4, 2, 3, 3)))
    out = batch_norm2d(x, Tensor(np.ones(2)), Tensor(np.zeros(2)))
    np.testing.assert_allclose(out.data.mean(axis=(0, 2, 3)), 0, atol=1e-12)
    np.testing.assert_allclose(out.data.std(axis=(0, 2, 3)), 1, atol=1e-4)


def test_batch_norm_needs_two_values_per_channel():
    with pytest.raises(ShapeMismatch):
        batch_norm2d(
            Tensor(np.zeros((1, 2, 1, 1))),
            Tensor(np.ones(2)),
            Tensor(np.zeros(2)),
        )


def test_concat_crop_take_row_shapes():
    a = Tensor(np.zeros((2, 1, 4, 4)))
    b = Tensor(np.zeros((2, 3, 4, 4)))
    assert concat([a, b]).shape == (2, 4, 4, 4)
    assert crop(a, 1, 1).shape == (2, 1, 3, 3)
    assert take_row(Tensor(np.eye(3)), 2).shape == (3,)
    with pytest.raises(ShapeMismatch):
        concat([a, Tensor(np.zeros((2, 1, 3, 4)))])


def test_global_avg_pool():
    x = Tensor(np.arange(8.0).reshape(1, 2, 2, 2))
    np.testing.assert_allclose(global_avg_pool(x).data, [[1.5, 5.5]])


def test_weighted_sum_checks_gate_count():
    outputs = [Tensor(np.ones(3)), Tensor(np.ones(3))]
    np.testing.assert_allclose(
        weighted_sum(Tensor([0.25, 0.5]), outputs).data, [0.75] * 3
    )
    with pytest.raises(ShapeMismatch):
        weighted_sum(Tensor([1.0]), outputs)


def test_grad_check_conv_with_groups(rng):
    weight = Tensor(rng.standard_normal((4, 1, 3, 3)))
    probe = Tensor(rng.standard_normal((2, 4, 3, 3)))

    def program(t):
        out = conv2d(t, weight, stride=2, padding=1, groups=4)
        return sum_all(out * probe)

    x = Tensor(rng.standard_normal((2, 4, 5, 5)))
    assert grad_check(program, x) <= 1e-4


def test_grad_check_softmax(rng):
    probe = Tensor(rng.standard_normal((3, 4)))
    x = Tensor(rng.standard_normal((3, 4)))
    assert grad_check(lambda t: sum_all(softmax(t) * probe), x) <= 1e-4
