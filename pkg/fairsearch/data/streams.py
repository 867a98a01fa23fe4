import dataclasses as dc
import logging
from typing import Iterator, List, Tuple

import numpy as np

from fairsearch.data.dataset import LabeledDataset
from fairsearch.exceptions import InvalidArgument

logger = logging.getLogger(__name__)

MIN_BATCH = 2

WEIGHT_STREAM = 0
ARCH_STREAM = 1
EVAL_STREAM = 2


@dc.dataclass
class BatchStream:
    """
    Seeded mini-batches over a fixed index set of a dataset. Every epoch
    uses its own permutation derived from (seed, stream id, epoch);
    trailing batches smaller than two samples are dropped.
    """

    dataset: LabeledDataset
    indices: np.ndarray
    batch_size: int
    seed: int
    stream_id: int = WEIGHT_STREAM

    def __post_init__(self):
        if self.batch_size < MIN_BATCH:
            raise InvalidArgument(
                f"batch_size {self.batch_size} < {MIN_BATCH}"
            )
        self.indices = np.asarray(self.indices, dtype=np.int64)

    def __len__(self) -> int:
        return int(self.indices.size)

    def num_batches(self) -> int:
        full, rest = divmod(len(self), self.batch_size)
        return full + (1 if rest >= MIN_BATCH else 0)

    def epoch_batches(self, epoch: int) -> Iterator[np.ndarray]:
        rng = np.random.default_rng(
            np.random.SeedSequence([self.seed, self.stream_id, epoch])
        )
        order = rng.permutation(self.indices)
        for start in range(0, order.size, self.batch_size):
            batch = order[start : start + self.batch_size]
            if batch.size >= MIN_BATCH:
                yield batch


@dc.dataclass
class SearchStreams:
    weight: BatchStream
    arch: BatchStream


def split_indices(
    dataset: LabeledDataset, fraction: float, seed: int
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Stratified partition of the dataset indices

    Per class, ``round(n * fraction)`` seeded samples (at least one, and
    one less than the class size) go to the weight side. A class with a
    single sample lands on the weight side.

    :param dataset: LabeledDataset
    :param fraction: float - weight side share in (0, 1)
    :param seed: int
    :return: Tuple[np.ndarray, np.ndarray] - sorted weight and arch indices
    """
    if not 0.0 < fraction < 1.0:
        raise InvalidArgument(f"split fraction {fraction} outside (0, 1)")
    rng = np.random.default_rng(seed)
    weight: List[np.ndarray] = []
    arch: List[np.ndarray] = []
    for label in range(dataset.num_classes):
        members = rng.permutation(np.flatnonzero(dataset.labels == label))
        if members.size == 0:
            continue
        if members.size == 1:
            weight.append(members)
            continue
        take = int(round(members.size * fraction))
        take = min(max(take, 1), members.size - 1)
        weight.append(members[:take])
        arch.append(members[take:])
    empty = np.zeros(0, dtype=np.int64)
    return (
        np.sort(np.concatenate(weight)) if weight else empty,
        np.sort(np.concatenate(arch)) if arch else empty,
    )


def split_search_streams(
    train: LabeledDataset,
    fraction: float = 0.5,
    seed: int = 0,
    batch_size: int = 64,
) -> SearchStreams:
    weight, arch = split_indices(train, fraction, seed)
    logger.info(
        f"Split {len(train)} samples into {weight.size} weight and "
        f"{arch.size} architecture samples"
    )
    return SearchStreams(
        weight=BatchStream(train, weight, batch_size, seed, WEIGHT_STREAM),
        arch=BatchStream(train, arch, batch_size, seed, ARCH_STREAM),
    )
