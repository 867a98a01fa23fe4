import numpy as np
import pytest

from fairsearch.exceptions import CheckpointError, InvalidArgument
from fairsearch.optim import (
    ArchAdam,
    SGDMomentum,
    arch_adam_step,
    cosine_lr,
    sgd_momentum_step,
)
from fairsearch.tensor import Tensor


def test_sgd_momentum_step_formula():
    weight, velocity = sgd_momentum_step(
        np.array([1.0]),
        np.array([0.5]),
        np.array([2.0]),
        lr=0.1,
        momentum=0.9,
        weight_decay=0.01,
    )
    np.testing.assert_allclose(velocity, [0.9 * 2.0 + 0.5 + 0.01])
    np.testing.assert_allclose(weight, [1.0 - 0.1 * velocity[0]])


def test_adam_first_step_moves_by_lr():
    alpha, m, v = arch_adam_step(
        np.zeros(3),
        np.array([2.0, -3.0, 0.0]),
        np.zeros(3),
        np.zeros(3),
        step=1,
        lr=0.01,
        weight_decay=0.0,
    )
    np.testing.assert_allclose(alpha, [-0.01, 0.01, 0.0], atol=1e-9)
    np.testing.assert_allclose(m, [1.0, -1.5, 0.0])
    np.testing.assert_allclose(v, [0.004, 0.009, 0.0])


def test_adam_rejects_step_zero():
    with pytest.raises(InvalidArgument):
        arch_adam_step(np.zeros(1), np.zeros(1), np.zeros(1), np.zeros(1), 0)


def test_cosine_endpoints():
    assert cosine_lr(0, 10) == pytest.approx(0.025)
    assert cosine_lr(10, 10) == pytest.approx(0.001)
    assert cosine_lr(5, 10) == pytest.approx(0.013)
    assert cosine_lr(0, 0) == 0.025


def test_cosine_rejects_epoch_outside():
    with pytest.raises(InvalidArgument):
        cosine_lr(11, 10)


def test_sgd_skips_parameters_without_gradient():
    used = Tensor(np.ones(2), requires_grad=True)
    unused = Tensor(np.ones(2), requires_grad=True)
    sgd = SGDMomentum([used, unused], lr=0.5, weight_decay=0.0)
    sgd.step({used: np.array([1.0, -1.0])})
    np.testing.assert_allclose(used.data, [0.5, 1.5])
    np.testing.assert_array_equal(unused.data, [1.0, 1.0])
    assert sgd.steps == 1


def test_adam_decays_parameters_without_gradient():
    alpha = Tensor(np.ones(2), requires_grad=True)
    adam = ArchAdam([alpha], lr=0.1, weight_decay=1e-3)
    adam.step({})
    assert (alpha.data < 1.0).all()


def test_state_dict_restores_trajectory(rng):
    grads = [rng.standard_normal(3) for _ in range(4)]

    def run(split):
        param = Tensor(np.zeros(3), requires_grad=True)
        adam = ArchAdam([param], lr=0.05)
        for grad in grads[:split]:
            adam.step({param: grad})
        state = adam.state_dict()
        resumed = ArchAdam([param], lr=0.05)
        resumed.load_state_dict(state)
        for grad in grads[split:]:
            resumed.step({param: grad})
        return param.data

    np.testing.assert_array_equal(run(2), run(4))


def test_load_state_dict_checks_keys():
    sgd = SGDMomentum([Tensor(np.zeros(2), requires_grad=True)])
    state = sgd.state_dict()
    with pytest.raises(CheckpointError, match="steps"):
        sgd.load_state_dict({"velocity.0": state["velocity.0"]})
    state["velocity.0"] = np.zeros(5)
    with pytest.raises(CheckpointError, match="shape"):
        sgd.load_state_dict(state)
