"""
Loss functions as fused primitives.

Each loss has its own analytic backward rule so it can be checked
against central differences like any other primitive.
"""
import logging
from typing import Sequence

import numpy as np

from fairsearch.exceptions import InvalidArgument, ShapeMismatch
from fairsearch.optim.config import LossConfig
from fairsearch.space.arch import ArchParams
from fairsearch.space.operations import GatingMode
from fairsearch.tensor import Function, Tensor, add, scale
from fairsearch.tensor.functional import stable_sigmoid

logger = logging.getLogger(__name__)


class CrossEntropy(Function):
    name = "cross_entropy"

    def forward(self, logits, labels: np.ndarray):
        if logits.ndim != 2:
            raise ShapeMismatch(
                f"cross_entropy: expected [N,C] logits, got {logits.shape}"
            )
        n, classes = logits.shape
        labels = np.asarray(labels)
        if labels.shape != (n,):
            raise ShapeMismatch(
                f"cross_entropy: {labels.shape} labels for {n} rows"
            )
        outside = np.flatnonzero((labels < 0) | (labels >= classes))
        if outside.size:
            position = int(outside[0])
            raise InvalidArgument(
                f"cross_entropy: label {int(labels[position])} at position "
                f"{position} outside [0, {classes})"
            )
        shifted = logits - logits.max(axis=1, keepdims=True)
        exp_x = np.exp(shifted)
        total = exp_x.sum(axis=1, keepdims=True)
        log_probs = shifted - np.log(total)
        rows = np.arange(n)
        self.probs = exp_x / total
        self.labels = labels
        return np.asarray(-log_probs[rows, labels].mean(), dtype=logits.dtype)

    def backward(self, grad):
        n = self.labels.shape[0]
        d_logits = self.probs.copy()
        d_logits[np.arange(n), self.labels] -= 1.0
        return (d_logits * (grad / n),)


class ZeroOne(Function):
    """
    ``-(1/N) sum |sigmoid(a) - 0.5|``, pushing every gate towards 0 or 1.

    The subgradient at sigmoid(a) = 0.5 is 0.
    """

    name = "zero_one"

    def forward(self, alpha):
        if alpha.size < 1:
            raise InvalidArgument("zero_one: needs at least one value")
        gates = stable_sigmoid(alpha)
        self.saved = (gates, alpha.size)
        return np.asarray(
            -np.abs(gates - 0.5).mean(), dtype=alpha.dtype
        )

    def backward(self, grad):
        gates, count = self.saved
        slope = np.sign(gates - 0.5) * gates * (1.0 - gates)
        return (-slope * (grad / count),)


class CrossCorrelation(Function):
    """
    Column-normalized cross-correlation ``C = A^T B / (|A_i| |B_j|)`` of
    two embedding batches, optionally mean-centered per column first.
    """

    name = "cross_correlation"

    def forward(self, z_a, z_b, mean_center: bool = False):
        if z_a.ndim != 2 or z_a.shape != z_b.shape:
            raise ShapeMismatch(
                f"cross_correlation: embeddings {z_a.shape} and "
                f"{z_b.shape} must both be [B,D]"
            )
        if z_a.shape[0] < 2:
            raise ShapeMismatch(
                f"cross_correlation: batch of {z_a.shape[0]}, needs >= 2"
            )
        if mean_center:
            z_a = z_a - z_a.mean(axis=0, keepdims=True)
            z_b = z_b - z_b.mean(axis=0, keepdims=True)
        norm_a = np.sqrt((z_a * z_a).sum(axis=0))
        norm_b = np.sqrt((z_b * z_b).sum(axis=0))
        for label, norm in (("zA", norm_a), ("zB", norm_b)):
            zero = np.flatnonzero(norm == 0)
            if zero.size:
                raise InvalidArgument(
                    f"cross_correlation: column {int(zero[0])} of {label} "
                    "has zero norm"
                )
        corr = (z_a.T @ z_b) / (norm_a[:, None] * norm_b[None, :])
        self.saved = (z_a, z_b, norm_a, norm_b, corr)
        self.mean_center = mean_center
        return corr

    def backward(self, grad):
        z_a, z_b, norm_a, norm_b, corr = self.saved
        d_raw = grad / (norm_a[:, None] * norm_b[None, :])
        d_norm_a = -(grad * corr).sum(axis=1) / norm_a
        d_norm_b = -(grad * corr).sum(axis=0) / norm_b
        d_a = z_b @ d_raw.T + z_a * (d_norm_a / norm_a)[None, :]
        d_b = z_a @ d_raw + z_b * (d_norm_b / norm_b)[None, :]
        if self.mean_center:
            d_a = d_a - d_a.mean(axis=0, keepdims=True)
            d_b = d_b - d_b.mean(axis=0, keepdims=True)
        return d_a, d_b


class BarlowTwins(Function):
    name = "barlow_twins"

    def forward(self, corr, lambda_bt: float = 5e-3):
        if corr.ndim != 2 or corr.shape[0] != corr.shape[1]:
            raise ShapeMismatch(
                f"barlow_twins: expected a square matrix, got {corr.shape}"
            )
        diagonal = np.diag(corr)
        on_diag = ((1.0 - diagonal) ** 2).sum()
        off_diag = (corr * corr).sum() - (diagonal * diagonal).sum()
        self.saved = (corr, lambda_bt)
        return np.asarray(on_diag + lambda_bt * off_diag, dtype=corr.dtype)

    def backward(self, grad):
        corr, lambda_bt = self.saved
        d_corr = 2.0 * lambda_bt * corr
        index = np.arange(corr.shape[0])
        d_corr[index, index] = -2.0 * (1.0 - corr[index, index])
        return (d_corr * grad,)


def cross_entropy(logits: Tensor, labels: Sequence[int]) -> Tensor:
    """
    Mean negative log-likelihood of the labels under softmax(logits)

    :param logits: Tensor [N,C]
    :param labels: Sequence[int] - class per row, in [0, C)
    :return: Tensor - scalar
    """
    return CrossEntropy.apply(logits, labels=np.asarray(labels))


def zero_one_loss(alpha: Tensor) -> Tensor:
    return ZeroOne.apply(alpha)


def cross_correlation(
    z_a: Tensor, z_b: Tensor, mean_center: bool = False
) -> Tensor:
    return CrossCorrelation.apply(z_a, z_b, mean_center=mean_center)


def barlow_twins_loss(corr: Tensor, lambda_bt: float = 5e-3) -> Tensor:
    """
    ``sum_i (1 - C_ii)^2 + lambda * sum_{i != j} C_ij^2``

    :param corr: Tensor [D,D] - cross-correlation matrix
    :param lambda_bt: float - weight of the redundancy term
    :return: Tensor - scalar, 0 iff corr is the identity
    """
    return BarlowTwins.apply(corr, lambda_bt=lambda_bt)


def barlow_twins(z_a: Tensor, z_b: Tensor, cfg: LossConfig) -> Tensor:
    return barlow_twins_loss(
        cross_correlation(z_a, z_b, mean_center=cfg.bt_mean_center),
        cfg.lambda_bt,
    )


def arch_zero_one(arch: ArchParams) -> Tensor:
    """
    Zero-one loss averaged over both cell kinds
    """
    return scale(
        add(
            zero_one_loss(arch.alpha_normal),
            zero_one_loss(arch.alpha_reduce),
        ),
        0.5,
    )


def zero_one_active(
    cfg: LossConfig, gating: GatingMode, epoch: int
) -> bool:
    return (
        gating == GatingMode.SIGMOID
        and epoch >= cfg.zero_one_warmup_epochs
        and cfg.lambda_zero_one > 0
    )


def total_arch_loss(
    val_loss: Tensor,
    arch: ArchParams,
    cfg: LossConfig,
    epoch: int,
    gating: GatingMode = GatingMode.SIGMOID,
) -> Tensor:
    """
    Validation loss plus the weighted zero-one loss once the warm-up is
    over, for sigmoid gating only

    :param val_loss: Tensor - scalar loss on the validation batch
    :param arch: ArchParams
    :param cfg: LossConfig
    :param epoch: int - current epoch, 0-based
    :param gating: GatingMode - softmax gating never adds the term
    :return: Tensor - scalar
    """
    if not zero_one_active(cfg, gating, epoch):
        return val_loss
    return add(val_loss, scale(arch_zero_one(arch), cfg.lambda_zero_one))
