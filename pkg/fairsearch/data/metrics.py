import logging
from typing import Callable, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel

from fairsearch.data.dataset import LabeledDataset, to_inputs
from fairsearch.exceptions import EmptyDataset, InvalidArgument
from fairsearch.tensor import Tensor

logger = logging.getLogger(__name__)

Predictor = Callable[[Tensor], Tensor]


class AccuracyReport(BaseModel):
    """
    Overall accuracy, per-class recall and their mean (balanced
    accuracy). Classes without samples have no recall and are left out
    of the balanced mean.
    """

    overall: float
    balanced: float
    per_class: List[Optional[float]]
    class_counts: List[int]
    num_samples: int


def accuracy_report(
    predictions: np.ndarray, labels: np.ndarray, num_classes: int
) -> AccuracyReport:
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if labels.size == 0:
        raise EmptyDataset("accuracy of an empty dataset")
    if predictions.shape != labels.shape:
        raise InvalidArgument(
            f"{predictions.shape} predictions for {labels.shape} labels"
        )
    correct = predictions == labels
    counts = np.bincount(labels, minlength=num_classes)
    hits = np.bincount(
        labels, weights=correct.astype(np.float64), minlength=num_classes
    )
    per_class: List[Optional[float]] = [
        float(hits[c] / counts[c]) if counts[c] else None
        for c in range(num_classes)
    ]
    present = [value for value in per_class if value is not None]
    return AccuracyReport(
        overall=float(correct.mean()),
        balanced=float(np.mean(present)),
        per_class=per_class,
        class_counts=counts.tolist(),
        num_samples=int(labels.size),
    )


def predict(
    predictor: Predictor,
    dataset: LabeledDataset,
    batch_size: int = 64,
    stats: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> np.ndarray:
    bounds = list(range(0, len(dataset), batch_size)) + [len(dataset)]
    if len(bounds) > 2 and bounds[-1] - bounds[-2] == 1:
        # batch statistics need more than one sample
        del bounds[-2]
    predictions = []
    for start, stop in zip(bounds[:-1], bounds[1:]):
        images = dataset.images[start:stop]
        logits = predictor(Tensor(to_inputs(images, stats)))
        predictions.append(np.argmax(logits.data, axis=1))
    return np.concatenate(predictions)


def evaluate(
    predictor: Predictor,
    dataset: LabeledDataset,
    batch_size: int = 64,
    stats: Optional[Tuple[np.ndarray, np.ndarray]] = None,
) -> AccuracyReport:
    """
    Classify a dataset batch by batch and score the predictions

    :param predictor: Predictor - images to logits, e.g. a child network
    :param dataset: LabeledDataset
    :param batch_size: int
    :param stats: channel mean and std for input normalization
    :return: AccuracyReport
    """
    if len(dataset) == 0:
        raise EmptyDataset("cannot evaluate on an empty dataset")
    predictions = predict(predictor, dataset, batch_size, stats)
    return accuracy_report(predictions, dataset.labels, dataset.num_classes)
