import dataclasses as dc
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from fairsearch.data.profiles import ImbalanceProfile, class_counts
from fairsearch.exceptions import (
    DatasetFormatError,
    EmptyDataset,
    InsufficientSamples,
    InvalidArgument,
)
from fairsearch.tensor import get_default_dtype
from fairsearch.utils.pydantic import get_model_dump

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

CHANNELS = 3
CIFAR_IMAGE_SIZE = 32
CIFAR_NUM_CLASSES = 10


@dc.dataclass
class LabeledDataset:
    """
    Byte images [N, 3, H, W] with integer labels and where they came from
    """

    images: np.ndarray
    labels: np.ndarray
    num_classes: int
    provenance: Dict[str, Any] = dc.field(default_factory=dict)

    def __post_init__(self):
        if self.images.ndim != 4 or self.images.shape[0] != len(self.labels):
            raise DatasetFormatError(
                f"images {self.images.shape} do not match "
                f"{len(self.labels)} labels"
            )

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @property
    def image_size(self) -> int:
        return int(self.images.shape[2])

    def class_counts(self) -> List[int]:
        return np.bincount(self.labels, minlength=self.num_classes).tolist()

    def subset(
        self, indices: np.ndarray, **provenance: Any
    ) -> "LabeledDataset":
        indices = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(
            images=self.images[indices],
            labels=self.labels[indices],
            num_classes=self.num_classes,
            provenance={**self.provenance, **provenance},
        )


def record_size(image_size: int) -> int:
    return 1 + CHANNELS * image_size * image_size


def load_cifar10_binary(
    paths: Union[PathLike, Sequence[PathLike]],
    image_size: int = CIFAR_IMAGE_SIZE,
    num_classes: int = CIFAR_NUM_CLASSES,
) -> LabeledDataset:
    """
    Read records of one label byte followed by the R, G and B planes in
    row-major order (3073 bytes for 32x32 images)

    :param paths: one or more binary files, concatenated in order
    :param image_size: int - side of the square images
    :param num_classes: int - labels must lie in [0, num_classes)
    :return: LabeledDataset
    """
    if isinstance(paths, (str, Path)):
        paths = [paths]
    size = record_size(image_size)
    images, labels = [], []
    for path in paths:
        path = Path(path)
        if not path.is_file():
            raise DatasetFormatError(f"Dataset file {path} does not exist")
        raw = np.fromfile(path, dtype=np.uint8)
        if raw.size % size:
            raise DatasetFormatError(
                f"{path} has {raw.size} bytes, not a multiple of the "
                f"record size {size}"
            )
        records = raw.reshape(-1, size)
        file_labels = records[:, 0].astype(np.int64)
        bad = np.flatnonzero(file_labels >= num_classes)
        if bad.size:
            record = int(bad[0])
            raise DatasetFormatError(
                f"{path}: label byte {file_labels[record]} at offset "
                f"{record * size} exceeds {num_classes - 1}"
            )
        images.append(
            records[:, 1:].reshape(-1, CHANNELS, image_size, image_size)
        )
        labels.append(file_labels)
    if not images:
        raise EmptyDataset("No dataset files given")
    return LabeledDataset(
        images=np.concatenate(images),
        labels=np.concatenate(labels),
        num_classes=num_classes,
        provenance={"source": [str(p) for p in paths]},
    )


def write_binary(path: PathLike, dataset: LabeledDataset) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if dataset.labels.size and dataset.labels.max() > 255:
        raise DatasetFormatError("labels above 255 do not fit a label byte")
    records = np.concatenate(
        [
            dataset.labels.astype(np.uint8)[:, None],
            dataset.images.astype(np.uint8).reshape(len(dataset), -1),
        ],
        axis=1,
    )
    records.tofile(path)
    logger.info(f"Wrote {len(dataset)} records to {path}")
    return path


def restrict_classes(
    dataset: LabeledDataset, num_classes: int
) -> LabeledDataset:
    if num_classes > dataset.num_classes:
        raise InvalidArgument(
            f"cannot keep {num_classes} classes of a "
            f"{dataset.num_classes}-class dataset"
        )
    keep = np.flatnonzero(dataset.labels < num_classes)
    subset = dataset.subset(keep)
    subset.num_classes = num_classes
    return subset


def downsample(dataset: LabeledDataset, image_size: int) -> LabeledDataset:
    """
    Shrink images by averaging square pixel blocks

    :param dataset: LabeledDataset
    :param image_size: int - target side, must divide the current side
    :return: LabeledDataset
    """
    side = dataset.image_size
    if image_size == side:
        return dataset
    if image_size <= 0 or side % image_size:
        raise InvalidArgument(
            f"image_size {image_size} does not divide the source size {side}"
        )
    factor = side // image_size
    blocks = dataset.images.astype(np.float64).reshape(
        len(dataset), CHANNELS, image_size, factor, image_size, factor
    )
    images = np.round(blocks.mean(axis=(3, 5))).astype(np.uint8)
    return dc.replace(dataset, images=images)


def subsample_longtailed(
    full: LabeledDataset, profile: ImbalanceProfile, seed: int
) -> LabeledDataset:
    """
    Draw the per-class counts of a profile

    Per class, the first n_i indices of a seeded permutation of that
    class's samples are kept; the union is returned in seeded random
    order.

    :param full: LabeledDataset - source with enough samples per class
    :param profile: ImbalanceProfile
    :param seed: int
    :return: LabeledDataset
    """
    if profile.num_classes > full.num_classes:
        raise InvalidArgument(
            f"profile has {profile.num_classes} classes, the dataset "
            f"{full.num_classes}"
        )
    rng = np.random.default_rng(seed)
    wanted = class_counts(profile)
    available = full.class_counts()
    short = [
        (label, need, available[label])
        for label, need in enumerate(wanted)
        if available[label] < need
    ]
    if short:
        details = ", ".join(
            f"class {label}: {have} < {need}" for label, need, have in short
        )
        raise InsufficientSamples(f"Not enough samples ({details})")
    chosen = []
    for label, need in enumerate(wanted):
        members = np.flatnonzero(full.labels == label)
        chosen.append(rng.permutation(members)[:need])
    order = rng.permutation(np.concatenate(chosen))
    subset = full.subset(
        order, profile=get_model_dump(profile), seed=seed
    )
    subset.num_classes = profile.num_classes
    return subset


def channel_stats(dataset: LabeledDataset) -> Tuple[np.ndarray, np.ndarray]:
    """
    Per-channel mean and standard deviation of the pixels scaled to [0, 1]
    """
    if len(dataset) == 0:
        raise EmptyDataset("channel statistics of an empty dataset")
    pixels = dataset.images.astype(np.float64) / 255.0
    mean = pixels.mean(axis=(0, 2, 3))
    std = pixels.std(axis=(0, 2, 3))
    return mean, np.where(std > 0, std, 1.0)


def normalize(
    pixels: np.ndarray, mean: np.ndarray, std: np.ndarray
) -> np.ndarray:
    return (pixels - mean[:, None, None]) / std[:, None, None]


def to_inputs(
    images: np.ndarray,
    stats: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> np.ndarray:
    """
    Byte images to normalized network inputs in the default precision
    """
    pixels = images.astype(np.float64) / 255.0
    if stats is not None:
        pixels = normalize(pixels, *stats)
    return pixels.astype(get_default_dtype())


def synthetic_dataset(
    num_classes: int,
    per_class: Union[int, Sequence[int]],
    image_size: int,
    seed: int,
    noise: float = 24.0,
) -> LabeledDataset:
    """
    Class-conditional random images: every class has its own template,
    samples add gaussian pixel noise

    :param num_classes: int
    :param per_class: Union[int, Sequence[int]] - samples per class
    :param image_size: int
    :param seed: int
    :param noise: float - pixel noise standard deviation in byte units
    :return: LabeledDataset
    """
    rng = np.random.default_rng(seed)
    if isinstance(per_class, int):
        per_class = [per_class] * num_classes
    if len(per_class) != num_classes:
        raise InvalidArgument(
            f"{len(per_class)} class sizes for {num_classes} classes"
        )
    shape = (CHANNELS, image_size, image_size)
    templates = rng.uniform(32, 224, size=(num_classes,) + shape)
    images, labels = [], []
    for label, count in enumerate(per_class):
        samples = templates[label] + rng.normal(
            0.0, noise, size=(count,) + shape
        )
        images.append(np.clip(np.round(samples), 0, 255).astype(np.uint8))
        labels.append(np.full(count, label, dtype=np.int64))
    order = rng.permutation(sum(per_class))
    return LabeledDataset(
        images=np.concatenate(images)[order],
        labels=np.concatenate(labels)[order],
        num_classes=num_classes,
        provenance={"source": "synthetic", "seed": seed},
    )
