import math

import numpy as np
import pytest

from fairsearch.exceptions import InvalidArgument, ShapeMismatch
from fairsearch.optim import (
    ArchAdam,
    LossConfig,
    arch_zero_one,
    barlow_twins,
    barlow_twins_loss,
    cross_correlation,
    cross_entropy,
    total_arch_loss,
    zero_one_loss,
)
from fairsearch.space import ArchParams, CellKind, GatingMode
from fairsearch.tensor import Tape, Tensor, grad_check, linear


def test_cross_entropy_uniform_logits():
    loss = cross_entropy(Tensor(np.zeros((4, 5))), [0, 1, 2, 3])
    assert loss.item() == pytest.approx(math.log(5))


def test_cross_entropy_is_stable_for_large_logits():
    logits = Tensor([[1000.0, 0.0], [0.0, 1000.0]])
    assert cross_entropy(logits, [0, 1]).item() == pytest.approx(0.0)
    assert cross_entropy(logits, [1, 0]).item() == pytest.approx(1000.0)


def test_cross_entropy_names_bad_label():
    with pytest.raises(InvalidArgument, match="label 7 at position 1"):
        cross_entropy(Tensor(np.zeros((2, 3))), [0, 7])
    with pytest.raises(ShapeMismatch):
        cross_entropy(Tensor(np.zeros((2, 3))), [0, 1, 2])


def test_cross_entropy_gradient(rng):
    logits = Tensor(rng.standard_normal((5, 4)))
    labels = [0, 3, 1, 1, 2]
    error = grad_check(lambda x: cross_entropy(x, labels), logits)
    assert error <= 1e-6


def test_zero_one_at_half_gate():
    alpha = Tensor(np.zeros((14, 8)), requires_grad=True)
    with Tape() as tape:
        loss = zero_one_loss(alpha)
    assert loss.item() == 0.0
    np.testing.assert_array_equal(tape.backward(loss)[alpha], 0.0)


def test_zero_one_rewards_saturated_gates():
    saturated = zero_one_loss(Tensor([40.0, -40.0])).item()
    assert saturated == pytest.approx(-0.5)
    assert zero_one_loss(Tensor([0.3])).item() > saturated


def test_zero_one_gradient_pushes_away_from_half(rng):
    alpha = Tensor(rng.uniform(0.1, 2.0, size=(3, 4)), requires_grad=True)
    with Tape() as tape:
        loss = zero_one_loss(alpha)
    assert (tape.backward(loss)[alpha] < 0).all()


def test_zero_one_rejects_empty():
    with pytest.raises(InvalidArgument):
        zero_one_loss(Tensor(np.zeros((0,))))


def test_barlow_twins_identity_is_zero():
    assert barlow_twins_loss(Tensor(np.eye(4))).item() == 0.0


def test_barlow_twins_weights_off_diagonal():
    corr = np.eye(3)
    corr[0, 1] = 0.5
    loss = barlow_twins_loss(Tensor(corr), lambda_bt=0.1)
    assert loss.item() == pytest.approx(0.1 * 0.25)


def test_cross_correlation_of_identical_views(rng):
    z = Tensor(rng.standard_normal((6, 3)))
    corr = cross_correlation(z, z).data
    np.testing.assert_allclose(np.diag(corr), 1.0)
    np.testing.assert_allclose(corr, corr.T)


def test_cross_correlation_zero_column(rng):
    z_a = rng.standard_normal((4, 3))
    z_a[:, 2] = 0.0
    with pytest.raises(InvalidArgument, match="column 2 of zA"):
        cross_correlation(Tensor(z_a), Tensor(rng.standard_normal((4, 3))))


def test_cross_correlation_needs_two_rows(rng):
    z = Tensor(rng.standard_normal((1, 3)))
    with pytest.raises(ShapeMismatch):
        cross_correlation(z, z)


@pytest.mark.parametrize("mean_center", [False, True])
def test_barlow_twins_gradient(rng, mean_center):
    cfg = LossConfig(lambda_bt=0.05, bt_mean_center=mean_center)
    z_a = Tensor(rng.standard_normal((6, 4)))
    z_b = Tensor(rng.standard_normal((6, 4)))
    assert grad_check(lambda x: barlow_twins(x, z_b, cfg), z_a) <= 1e-6


def test_total_arch_loss_waits_for_warmup(rng):
    arch = ArchParams(alpha_normal=rng.standard_normal((14, 8)))
    cfg = LossConfig(zero_one_warmup_epochs=2, lambda_zero_one=2.0)
    val = Tensor(1.5)
    assert total_arch_loss(val, arch, cfg, epoch=1) is val
    expected = 1.5 + 2.0 * arch_zero_one(arch).item()
    assert total_arch_loss(val, arch, cfg, epoch=2).item() == (
        pytest.approx(expected)
    )


def test_total_arch_loss_ignores_softmax(rng):
    arch = ArchParams(alpha_normal=rng.standard_normal((14, 8)))
    cfg = LossConfig(zero_one_warmup_epochs=0)
    val = Tensor(0.7)
    assert total_arch_loss(val, arch, cfg, 5, GatingMode.SOFTMAX) is val
    off = LossConfig(zero_one_warmup_epochs=0, lambda_zero_one=0.0)
    assert total_arch_loss(val, arch, off, 5) is val


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_zero_one_stays_within_bounds(seed):
    rng = np.random.default_rng(seed)
    for _ in range(50):
        alpha = rng.standard_normal((14, 8)) * rng.uniform(0.01, 30)
        assert -0.5 <= zero_one_loss(Tensor(alpha)).item() <= 0.0


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_zero_one_steps_polarize_gates(seed):
    rng = np.random.default_rng(seed)
    arch = ArchParams(
        alpha_normal=0.1 * rng.standard_normal((14, 8)),
        alpha_reduce=0.1 * rng.standard_normal((14, 8)),
    )

    def polarization():
        gates = np.concatenate(
            [
                arch.gates(kind, GatingMode.SIGMOID).data.ravel()
                for kind in CellKind
            ]
        )
        return np.abs(gates - 0.5).mean()

    before = polarization()
    adam = ArchAdam(arch.parameters(), lr=3e-3, weight_decay=0.0)
    for _ in range(100):
        with Tape() as tape:
            loss = arch_zero_one(arch)
        adam.step(tape.backward(loss))
    assert polarization() > before


def test_barlow_twins_of_negated_identity():
    loss = barlow_twins_loss(Tensor(-np.eye(2)))
    assert loss.item() == pytest.approx(8.0, abs=1e-9)


def test_cross_correlation_ignores_column_scale(rng):
    z_a = rng.standard_normal((8, 3))
    z_b = rng.standard_normal((8, 3))
    scaled = z_a * np.array([2.0, 0.5, 7.0])
    np.testing.assert_allclose(
        cross_correlation(Tensor(scaled), Tensor(z_b)).data,
        cross_correlation(Tensor(z_a), Tensor(z_b)).data,
        atol=1e-12,
    )


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_linear_encoder_learns_redundancy_reduction(seed):
    rng = np.random.default_rng(seed)
    inputs = rng.standard_normal((32, 6))
    view_a = Tensor(inputs)
    view_b = Tensor(inputs + 0.5 * rng.standard_normal((32, 6)))
    weight = Tensor(rng.standard_normal((6, 4)), requires_grad=True)
    cfg = LossConfig()
    losses = []
    for _ in range(50):
        with Tape() as tape:
            loss = barlow_twins(
                linear(view_a, weight), linear(view_b, weight), cfg
            )
        losses.append(loss.item())
        weight.data -= 0.01 * tape.backward(loss)[weight]
    assert all(b < a for a, b in zip(losses, losses[1:]))
