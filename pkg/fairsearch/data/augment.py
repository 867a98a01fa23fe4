"""
Two-view augmentation for the self-supervised search.

A view is a pure function of (seed, sample index, view index): random
crop after zero padding, horizontal flip, brightness and contrast jitter,
optional grayscale, then per-channel normalization.
"""
import dataclasses as dc
from typing import Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from fairsearch.data.dataset import normalize
from fairsearch.tensor import get_default_dtype

# ITU-R 601 luma weights
_LUMA = np.array([0.299, 0.587, 0.114])


class AugmentConfig(BaseModel):
    crop_padding: int = Field(4, ge=0)
    flip_prob: float = Field(0.5, ge=0, le=1)
    jitter: float = Field(0.4, ge=0, lt=1)
    grayscale_prob: float = Field(0.2, ge=0, le=1)

    @classmethod
    def identity(cls) -> "AugmentConfig":
        return cls(
            crop_padding=0, flip_prob=0.0, jitter=0.0, grayscale_prob=0.0
        )


@dc.dataclass
class AugmentedPair:
    view_a: np.ndarray
    view_b: np.ndarray
    index: int
    seeds: Tuple[Tuple[int, int, int], Tuple[int, int, int]]


def _view(
    pixels: np.ndarray, rng: np.random.Generator, cfg: AugmentConfig
) -> np.ndarray:
    _, height, width = pixels.shape
    pad = cfg.crop_padding
    top = int(rng.integers(0, 2 * pad + 1))
    left = int(rng.integers(0, 2 * pad + 1))
    if pad:
        padded = np.pad(pixels, ((0, 0), (pad, pad), (pad, pad)))
        pixels = padded[:, top : top + height, left : left + width]
    if rng.random() < cfg.flip_prob:
        pixels = pixels[:, :, ::-1]
    brightness = rng.uniform(1.0 - cfg.jitter, 1.0 + cfg.jitter)
    contrast = rng.uniform(1.0 - cfg.jitter, 1.0 + cfg.jitter)
    if cfg.jitter > 0:
        pixels = pixels * brightness
        mean = pixels.mean()
        pixels = np.clip((pixels - mean) * contrast + mean, 0.0, 1.0)
    if rng.random() < cfg.grayscale_prob:
        gray = np.tensordot(_LUMA, pixels, axes=1)
        pixels = np.broadcast_to(gray, pixels.shape)
    return np.ascontiguousarray(pixels)


def augment_pair(
    image: np.ndarray,
    seed: int,
    index: int,
    cfg: Optional[AugmentConfig] = None,
    stats: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> AugmentedPair:
    """
    Two independently transformed views of one byte image

    :param image: np.ndarray - [3, H, W] bytes
    :param seed: int - run seed
    :param index: int - sample index in its dataset
    :param cfg: Optional[AugmentConfig] - defaults to the standard chain
    :param stats: channel mean and std used for normalization
    :return: AugmentedPair
    """
    cfg = cfg or AugmentConfig()
    pixels = image.astype(np.float64) / 255.0
    views = []
    seeds = []
    for view in (0, 1):
        key = (seed, index, view)
        rng = np.random.default_rng(np.random.SeedSequence(list(key)))
        out = _view(pixels, rng, cfg)
        if stats is not None:
            out = normalize(out, *stats)
        views.append(out.astype(get_default_dtype()))
        seeds.append(key)
    return AugmentedPair(
        view_a=views[0], view_b=views[1], index=index, seeds=tuple(seeds)
    )


def augment_batch(
    images: np.ndarray,
    indices: Sequence[int],
    seed: int,
    cfg: Optional[AugmentConfig] = None,
    stats: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Stack the two views of every image of a batch

    :return: Tuple[np.ndarray, np.ndarray] - views A and B, [N, 3, H, W]
    """
    pairs = [
        augment_pair(image, seed, int(index), cfg, stats)
        for image, index in zip(images, indices)
    ]
    return (
        np.stack([pair.view_a for pair in pairs]),
        np.stack([pair.view_b for pair in pairs]),
    )
