"""
Finite-difference verification of every differentiable program of the
package: the primitives of :mod:`fairsearch.tensor`, the fused losses
and a one-cell supernet end to end.

Each case builds a scalar program and an input from a seeded generator.
Programs with non-scalar output are projected onto a fixed random
direction so that every output coordinate contributes to the check.
"""
import dataclasses as dc
import logging
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from fairsearch.exceptions import InvalidArgument
from fairsearch.optim.config import LossConfig
from fairsearch.optim.losses import (
    barlow_twins,
    barlow_twins_loss,
    cross_correlation,
    cross_entropy,
    zero_one_loss,
)
from fairsearch.space.operations import GatingMode
from fairsearch.supernet.config import SupernetConfig
from fairsearch.supernet.network import Supernet
from fairsearch.tensor import (
    Tensor,
    add,
    batch_norm2d,
    concat,
    conv2d,
    crop,
    global_avg_pool,
    grad_check,
    linear,
    mean_all,
    mul,
    pool2d,
    precision,
    relu,
    reshape,
    scale,
    sigmoid,
    softmax,
    sum_all,
    take_row,
    weighted_sum,
)
from fairsearch.tensor.grad_check import TensorProgram

logger = logging.getLogger(__name__)

TOLERANCE = 1e-4
STEP = 1e-5
DEFAULT_TRIALS = 20

PRIMITIVE = "primitive"
NETWORK = "network"
SCOPES = (PRIMITIVE, NETWORK, "all")

Builder = Callable[[np.random.Generator], Tuple[TensorProgram, Tensor]]


@dc.dataclass
class GradCase:
    name: str
    scope: str
    build: Builder


@dc.dataclass
class CaseResult:
    name: str
    trials: int
    max_error: float
    tolerance: float = TOLERANCE

    @property
    def passed(self) -> bool:
        return self.max_error <= self.tolerance


CASES: Dict[str, GradCase] = {}


def register(name: str, scope: str = PRIMITIVE):
    def decorator(build: Builder) -> Builder:
        if name in CASES:
            raise InvalidArgument(f"Gradient case {name!r} registered twice")
        CASES[name] = GradCase(name=name, scope=scope, build=build)
        return build

    return decorator


def _normal(rng: np.random.Generator, *shape: int) -> Tensor:
    return Tensor(rng.standard_normal(shape))


def _off_zero(rng: np.random.Generator, *shape: int) -> Tensor:
    # keeps kinks at 0 farther away than the finite-difference step
    values = rng.standard_normal(shape)
    return Tensor(np.where(values >= 0, 1.0, -1.0) * (np.abs(values) + 0.1))


def _distinct(rng: np.random.Generator, *shape: int) -> Tensor:
    size = int(np.prod(shape))
    return Tensor(0.1 * rng.permutation(size).reshape(shape))


def _projected(
    program: TensorProgram, x: Tensor, rng: np.random.Generator
) -> Tuple[TensorProgram, Tensor]:
    probe = Tensor(rng.standard_normal(program(x).shape))
    return lambda t: sum_all(mul(program(t), probe)), x


@register("add")
def _add(rng):
    other = _normal(rng, 3, 4)
    return _projected(lambda t: add(t, other), _normal(rng, 3, 4), rng)


@register("mul")
def _mul(rng):
    other = _normal(rng, 3, 4)
    return _projected(lambda t: mul(t, other), _normal(rng, 3, 4), rng)


@register("scale")
def _scale(rng):
    return _projected(lambda t: scale(t, 1.7), _normal(rng, 2, 5), rng)


@register("sum_all")
def _sum_all(rng):
    return (lambda t: sum_all(mul(t, t))), _normal(rng, 2, 3, 2)


@register("mean_all")
def _mean_all(rng):
    return (lambda t: mean_all(mul(t, t))), _normal(rng, 2, 3, 2)


@register("reshape")
def _reshape(rng):
    return _projected(lambda t: reshape(t, (4, 3)), _normal(rng, 3, 4), rng)


@register("concat")
def _concat(rng):
    other = _normal(rng, 2, 3, 3, 3)
    return _projected(
        lambda t: concat([t, other], axis=1), _normal(rng, 2, 2, 3, 3), rng
    )


@register("crop")
def _crop(rng):
    return _projected(lambda t: crop(t, 1, 1), _normal(rng, 2, 2, 4, 4), rng)


@register("take_row")
def _take_row(rng):
    return _projected(lambda t: take_row(t, 1), _normal(rng, 3, 5), rng)


@register("relu")
def _relu(rng):
    return _projected(relu, _off_zero(rng, 3, 4), rng)


@register("sigmoid")
def _sigmoid(rng):
    return _projected(sigmoid, _normal(rng, 3, 4), rng)


@register("softmax")
def _softmax(rng):
    return _projected(softmax, _normal(rng, 3, 5), rng)


@register("linear.input")
def _linear_input(rng):
    weight, bias = _normal(rng, 4, 3), _normal(rng, 3)
    return _projected(
        lambda t: linear(t, weight, bias), _normal(rng, 5, 4), rng
    )


@register("linear.weight")
def _linear_weight(rng):
    x, bias = _normal(rng, 5, 4), _normal(rng, 3)
    return _projected(lambda t: linear(x, t, bias), _normal(rng, 4, 3), rng)


@register("linear.bias")
def _linear_bias(rng):
    x, weight = _normal(rng, 5, 4), _normal(rng, 4, 3)
    return _projected(lambda t: linear(x, weight, t), _normal(rng, 3), rng)


def _conv_case(rng, stride=1, padding=1, dilation=1, groups=1, on="input"):
    channels = 4
    x = _normal(rng, 2, channels, 5, 5)
    weight = _normal(rng, channels, channels // groups, 3, 3)

    def program(t: Tensor) -> Tensor:
        args = (t, weight) if on == "input" else (x, t)
        return conv2d(
            *args,
            stride=stride,
            padding=padding,
            dilation=dilation,
            groups=groups,
        )

    return _projected(program, x if on == "input" else weight, rng)


@register("conv2d")
def _conv2d(rng):
    return _conv_case(rng)


@register("conv2d.strided")
def _conv2d_strided(rng):
    return _conv_case(rng, stride=2)


@register("conv2d.dilated")
def _conv2d_dilated(rng):
    return _conv_case(rng, padding=2, dilation=2)


@register("conv2d.depthwise")
def _conv2d_depthwise(rng):
    return _conv_case(rng, groups=4)


@register("conv2d.weight")
def _conv2d_weight(rng):
    return _conv_case(rng, stride=2, on="weight")


@register("pool2d.max")
def _max_pool(rng):
    return _projected(
        lambda t: pool2d(t, "max", window=3, stride=1, padding=1),
        _distinct(rng, 2, 2, 4, 4),
        rng,
    )


@register("pool2d.max.strided")
def _max_pool_strided(rng):
    return _projected(
        lambda t: pool2d(t, "max", window=3, stride=2, padding=1),
        _distinct(rng, 2, 2, 5, 5),
        rng,
    )


@register("pool2d.avg")
def _avg_pool(rng):
    return _projected(
        lambda t: pool2d(t, "avg", window=3, stride=2, padding=1),
        _normal(rng, 2, 2, 5, 5),
        rng,
    )


@register("batch_norm2d.input")
def _batch_norm_input(rng):
    gamma, beta = _off_zero(rng, 3), _normal(rng, 3)
    return _projected(
        lambda t: batch_norm2d(t, gamma, beta), _normal(rng, 3, 3, 2, 2), rng
    )


@register("batch_norm2d.gamma")
def _batch_norm_gamma(rng):
    x, beta = _normal(rng, 3, 3, 2, 2), _normal(rng, 3)
    return _projected(
        lambda t: batch_norm2d(x, t, beta), _off_zero(rng, 3), rng
    )


@register("global_avg_pool")
def _global_avg_pool(rng):
    return _projected(global_avg_pool, _normal(rng, 2, 3, 3, 3), rng)


@register("weighted_sum.gates")
def _weighted_sum_gates(rng):
    outputs = [_normal(rng, 2, 3) for _ in range(4)]
    return _projected(
        lambda t: weighted_sum(t, outputs), _normal(rng, 4), rng
    )


@register("weighted_sum.outputs")
def _weighted_sum_outputs(rng):
    gates, other = _normal(rng, 2), _normal(rng, 2, 3)
    return _projected(
        lambda t: weighted_sum(gates, [t, other]), _normal(rng, 2, 3), rng
    )


@register("cross_entropy")
def _cross_entropy(rng):
    labels = rng.integers(0, 5, size=6)
    return (lambda t: cross_entropy(t, labels)), _normal(rng, 6, 5)


@register("zero_one")
def _zero_one(rng):
    return zero_one_loss, _off_zero(rng, 14, 8)


@register("cross_correlation")
def _cross_correlation(rng):
    z_b = _normal(rng, 6, 4)
    return _projected(
        lambda t: cross_correlation(t, z_b), _normal(rng, 6, 4), rng
    )


@register("cross_correlation.centered")
def _cross_correlation_centered(rng):
    z_a = _normal(rng, 6, 4)
    return _projected(
        lambda t: cross_correlation(z_a, t, mean_center=True),
        _normal(rng, 6, 4),
        rng,
    )


@register("barlow_twins")
def _barlow_twins(rng):
    return (lambda t: barlow_twins_loss(t, 0.3)), _normal(rng, 4, 4)


def tiny_supernet_config() -> SupernetConfig:
    """
    One reduction cell on 4x4 images, the smallest complete supernet
    """
    return SupernetConfig(
        num_cells=1,
        init_channels=2,
        num_classes=2,
        image_size=4,
        embedding_dim=4,
    )


def _network_case(rng, gating: GatingMode, on: str = "alpha"):
    cfg = tiny_supernet_config()
    net = Supernet(cfg, seed=int(rng.integers(2**31)))
    arch = net.new_arch()
    arch.alpha_reduce.data[...] = rng.standard_normal(arch.alpha_reduce.shape)
    images = Tensor(rng.standard_normal((4, 3, 4, 4)))
    labels = rng.integers(0, cfg.num_classes, size=4)

    def program(_: Tensor) -> Tensor:
        logits = net.forward_supervised(images, arch, gating)
        return cross_entropy(logits, labels)

    target = arch.alpha_reduce if on == "alpha" else net.parameters()[0]
    return program, target


@register("network.softmax.alpha", scope=NETWORK)
def _network_softmax(rng):
    return _network_case(rng, GatingMode.SOFTMAX)


@register("network.sigmoid.alpha", scope=NETWORK)
def _network_sigmoid(rng):
    return _network_case(rng, GatingMode.SIGMOID)


@register("network.weights", scope=NETWORK)
def _network_weights(rng):
    return _network_case(rng, GatingMode.SIGMOID, on="weights")


@register("network.barlow_twins.alpha", scope=NETWORK)
def _network_barlow_twins(rng):
    cfg = tiny_supernet_config()
    net = Supernet(cfg, seed=int(rng.integers(2**31)))
    arch = net.new_arch()
    arch.alpha_reduce.data[...] = rng.standard_normal(arch.alpha_reduce.shape)
    view_a = Tensor(rng.standard_normal((4, 3, 4, 4)))
    view_b = Tensor(rng.standard_normal((4, 3, 4, 4)))
    loss_cfg = LossConfig(lambda_bt=0.05)

    def program(_: Tensor) -> Tensor:
        z_a = net.forward_projection(view_a, arch, GatingMode.SIGMOID)
        z_b = net.forward_projection(view_b, arch, GatingMode.SIGMOID)
        return barlow_twins(z_a, z_b, loss_cfg)

    return program, arch.alpha_reduce


def select_cases(
    scope: str = PRIMITIVE, names: Optional[List[str]] = None
) -> List[GradCase]:
    if scope not in SCOPES:
        raise InvalidArgument(
            f"Unknown scope {scope!r}, expected one of {list(SCOPES)}"
        )
    cases = [
        case
        for case in CASES.values()
        if scope == "all" or case.scope == scope
    ]
    if names:
        unknown = sorted(set(names) - set(CASES))
        if unknown:
            raise InvalidArgument(f"Unknown gradient cases {unknown}")
        cases = [case for case in cases if case.name in names]
    return cases


def run_case(
    case: GradCase, trials: int = DEFAULT_TRIALS, seed: int = 0
) -> CaseResult:
    if trials < 1:
        raise InvalidArgument(f"trials must be >= 1, got {trials}")
    worst = 0.0
    with precision("float64"):
        for trial in range(trials):
            rng = np.random.default_rng([seed, trial])
            program, x = case.build(rng)
            worst = max(worst, grad_check(program, x, h=STEP))
    return CaseResult(name=case.name, trials=trials, max_error=worst)


def run_suite(
    scope: str = PRIMITIVE,
    trials: int = DEFAULT_TRIALS,
    seed: int = 0,
    names: Optional[List[str]] = None,
) -> List[CaseResult]:
    """
    Check every selected case on ``trials`` independently seeded inputs

    :param scope: str - primitive, network or all
    :param trials: int - random inputs per case
    :param seed: int - base seed
    :param names: Optional[List[str]] - restrict to these cases
    :return: List[CaseResult] - in registration order
    """
    results = []
    for case in select_cases(scope, names):
        result = run_case(case, trials, seed)
        status = "ok" if result.passed else "FAILED"
        logger.info(
            f"{case.name}: max relative error {result.max_error:.2e} "
            f"over {trials} trials {status}"
        )
        results.append(result)
    return results
