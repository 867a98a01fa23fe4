import math
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np

from fairsearch.exceptions import CheckpointError, InvalidArgument
from fairsearch.tensor import Tensor


def sgd_momentum_step(
    weight: np.ndarray,
    grad: np.ndarray,
    velocity: np.ndarray,
    lr: float,
    momentum: float = 0.9,
    weight_decay: float = 3e-4,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    ``v <- momentum * v + (g + wd * w)``, then ``w <- w - lr * v``

    :return: Tuple[np.ndarray, np.ndarray] - new weight and velocity
    """
    velocity = momentum * velocity + (grad + weight_decay * weight)
    return weight - lr * velocity, velocity


def arch_adam_step(
    alpha: np.ndarray,
    grad: np.ndarray,
    first_moment: np.ndarray,
    second_moment: np.ndarray,
    step: int,
    lr: float = 3e-4,
    betas: Tuple[float, float] = (0.5, 0.999),
    weight_decay: float = 1e-3,
    eps: float = 1e-8,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Adam update with the L2 term added to the gradient and bias
    correction

    :param step: int - 1-based step counter
    :return: Tuple[np.ndarray, np.ndarray, np.ndarray] - new alpha, first
    and second moment
    """
    if step < 1:
        raise InvalidArgument(f"Adam step counter must be >= 1, got {step}")
    beta1, beta2 = betas
    grad = grad + weight_decay * alpha
    first_moment = beta1 * first_moment + (1.0 - beta1) * grad
    second_moment = beta2 * second_moment + (1.0 - beta2) * grad * grad
    m_hat = first_moment / (1.0 - beta1**step)
    v_hat = second_moment / (1.0 - beta2**step)
    alpha = alpha - lr * m_hat / (np.sqrt(v_hat) + eps)
    return alpha, first_moment, second_moment


def cosine_lr(
    epoch: int,
    total_epochs: int,
    lr_max: float = 0.025,
    lr_min: float = 0.001,
) -> float:
    """
    Cosine annealing from lr_max at epoch 0 to lr_min at total_epochs
    """
    if total_epochs < 0 or not 0 <= epoch <= max(total_epochs, 0):
        raise InvalidArgument(
            f"epoch {epoch} outside [0, {total_epochs}]"
        )
    if total_epochs == 0:
        return lr_max
    return lr_min + 0.5 * (lr_max - lr_min) * (
        1.0 + math.cos(math.pi * epoch / total_epochs)
    )


class Optimizer:
    """
    Updates a fixed list of parameter tensors in place from a gradient
    map as returned by :meth:`fairsearch.tensor.Tape.backward`
    """

    def __init__(self, params: Sequence[Tensor]):
        self.params: List[Tensor] = list(params)
        self.steps = 0

    def _slots(self) -> Dict[str, List[np.ndarray]]:
        raise NotImplementedError

    def state_dict(self) -> Dict[str, np.ndarray]:
        state = {"steps": np.asarray(self.steps)}
        for slot, arrays in self._slots().items():
            for index, array in enumerate(arrays):
                state[f"{slot}.{index}"] = array.copy()
        return state

    def load_state_dict(self, state: Mapping[str, np.ndarray]) -> None:
        if "steps" not in state:
            raise CheckpointError("optimizer state misses 'steps'")
        for slot, arrays in self._slots().items():
            for index, array in enumerate(arrays):
                key = f"{slot}.{index}"
                if key not in state:
                    raise CheckpointError(f"optimizer state misses {key!r}")
                if state[key].shape != array.shape:
                    raise CheckpointError(
                        f"optimizer state {key!r} has shape "
                        f"{state[key].shape}, expected {array.shape}"
                    )
                array[...] = state[key]
        self.steps = int(state["steps"])


class SGDMomentum(Optimizer):
    def __init__(
        self,
        params: Sequence[Tensor],
        lr: float = 0.025,
        momentum: float = 0.9,
        weight_decay: float = 3e-4,
    ):
        super().__init__(params)
        self.lr = lr
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.velocity = [np.zeros_like(p.data) for p in self.params]

    def _slots(self) -> Dict[str, List[np.ndarray]]:
        return {"velocity": self.velocity}

    def step(self, grads: Mapping[Tensor, np.ndarray]) -> None:
        # parameters without a gradient keep their value and velocity
        for index, param in enumerate(self.params):
            grad = grads.get(param)
            if grad is None:
                continue
            param.data[...], self.velocity[index] = sgd_momentum_step(
                param.data,
                grad,
                self.velocity[index],
                self.lr,
                self.momentum,
                self.weight_decay,
            )
        self.steps += 1


class ArchAdam(Optimizer):
    def __init__(
        self,
        params: Sequence[Tensor],
        lr: float = 3e-4,
        betas: Tuple[float, float] = (0.5, 0.999),
        weight_decay: float = 1e-3,
        eps: float = 1e-8,
    ):
        super().__init__(params)
        self.lr = lr
        self.betas = betas
        self.weight_decay = weight_decay
        self.eps = eps
        self.first_moment = [np.zeros_like(p.data) for p in self.params]
        self.second_moment = [np.zeros_like(p.data) for p in self.params]

    def _slots(self) -> Dict[str, List[np.ndarray]]:
        return {"m": self.first_moment, "v": self.second_moment}

    def step(self, grads: Mapping[Tensor, np.ndarray]) -> None:
        self.steps += 1
        for index, param in enumerate(self.params):
            grad = grads.get(param)
            if grad is None:
                grad = np.zeros_like(param.data)
            (
                param.data[...],
                self.first_moment[index],
                self.second_moment[index],
            ) = arch_adam_step(
                param.data,
                grad,
                self.first_moment[index],
                self.second_moment[index],
                self.steps,
                self.lr,
                self.betas,
                self.weight_decay,
                self.eps,
            )
