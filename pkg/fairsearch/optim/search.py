import csv
import dataclasses as dc
import logging
import time
from pathlib import Path
from typing import (
    Callable,
    Dict,
    List,
    Optional,
    Sequence,
    Tuple,
    Union,
)

import numpy as np
from pydantic import BaseModel, Field

from fairsearch.data.augment import AugmentConfig, augment_batch
from fairsearch.data.dataset import LabeledDataset, to_inputs
from fairsearch.data.metrics import AccuracyReport, evaluate
from fairsearch.data.streams import BatchStream, SearchStreams
from fairsearch.exceptions import EmptyStream, InvalidArgument
from fairsearch.optim.config import LossConfig, OptimConfig, SearchMode
from fairsearch.optim.losses import (
    arch_zero_one,
    barlow_twins,
    cross_entropy,
    total_arch_loss,
)
from fairsearch.optim.optimizers import ArchAdam, SGDMomentum, cosine_lr
from fairsearch.space.arch import ArchParams
from fairsearch.space.operations import GatingMode
from fairsearch.supernet.network import ChildNetwork, Supernet
from fairsearch.tensor import Tape, Tensor

logger = logging.getLogger(__name__)

Stats = Optional[Tuple[np.ndarray, np.ndarray]]

RETRAIN_MODE = "retrain"


class MetricsRecord(BaseModel):
    epoch: int
    mode: str
    train_loss: float
    val_loss: Optional[float] = None
    zero_one_loss: Optional[float] = None
    lr: float
    balanced_acc: Optional[float] = None
    overall_acc: Optional[float] = None
    per_class_acc: List[Optional[float]] = Field(default_factory=list)
    wall_ms: Optional[float] = None


def metrics_columns(num_classes: int) -> List[str]:
    return [
        "epoch",
        "mode",
        "train_loss",
        "val_loss",
        "zero_one_loss",
        "lr",
        "balanced_acc",
        "overall_acc",
        *[f"per_class_acc_{c}" for c in range(num_classes)],
        "wall_ms",
    ]


def _cell(value: Optional[float]) -> str:
    return "" if value is None else repr(float(value))


def write_metrics_csv(
    path: Union[str, Path],
    records: Sequence[MetricsRecord],
    num_classes: int,
) -> Path:
    """
    One row per epoch under a fixed header; absent values are empty
    cells

    :param path: Union[str, Path] - target file
    :param records: Sequence[MetricsRecord]
    :param num_classes: int - number of per-class accuracy columns
    :return: Path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(metrics_columns(num_classes))
        for record in records:
            per_class = list(record.per_class_acc) + [None] * (
                num_classes - len(record.per_class_acc)
            )
            writer.writerow(
                [
                    str(record.epoch),
                    record.mode,
                    _cell(record.train_loss),
                    _cell(record.val_loss),
                    _cell(record.zero_one_loss),
                    _cell(record.lr),
                    _cell(record.balanced_acc),
                    _cell(record.overall_acc),
                    *[_cell(value) for value in per_class[:num_classes]],
                    _cell(record.wall_ms),
                ]
            )
    return path


def read_metrics_csv(path: Union[str, Path]) -> List[MetricsRecord]:
    def number(text: str) -> Optional[float]:
        return float(text) if text else None

    records = []
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            per_class = [
                number(row[key])
                for key in sorted(
                    (k for k in row if k.startswith("per_class_acc_")),
                    key=lambda k: int(k.rsplit("_", 1)[1]),
                )
            ]
            records.append(
                MetricsRecord(
                    epoch=int(row["epoch"]),
                    mode=row["mode"],
                    train_loss=float(row["train_loss"]),
                    val_loss=number(row["val_loss"]),
                    zero_one_loss=number(row["zero_one_loss"]),
                    lr=float(row["lr"]),
                    balanced_acc=number(row["balanced_acc"]),
                    overall_acc=number(row["overall_acc"]),
                    per_class_acc=per_class,
                    wall_ms=number(row["wall_ms"]),
                )
            )
    return records


@dc.dataclass
class SearchResult:
    arch: ArchParams
    metrics: List[MetricsRecord]


def _accuracy_fields(report: Optional[AccuracyReport]) -> Dict:
    if report is None:
        return {}
    return {
        "balanced_acc": report.balanced,
        "overall_acc": report.overall,
        "per_class_acc": report.per_class,
    }


class BilevelSearch:
    """
    First-order alternating optimization of the architecture parameters
    (on the arch stream) and the supernet weights (on the weight stream).

    Each batch pair runs an architecture step, Adam on alpha only, then a
    weight step, SGD with momentum on the weights only. In ssf mode both
    steps use the Barlow Twins loss on two augmented views and labels are
    never read.
    """

    def __init__(
        self,
        net: Supernet,
        arch: ArchParams,
        streams: SearchStreams,
        mode: SearchMode,
        loss_cfg: Optional[LossConfig] = None,
        optim_cfg: Optional[OptimConfig] = None,
        seed: int = 0,
        augment: Optional[AugmentConfig] = None,
        stats: Stats = None,
        eval_set: Optional[LabeledDataset] = None,
        log_wall_time: bool = True,
    ):
        for name, stream in (
            ("weight", streams.weight),
            ("architecture", streams.arch),
        ):
            if stream.num_batches() == 0:
                raise EmptyStream(
                    f"The {name} stream has no batch of at least 2 samples"
                )
        self.net = net
        self.arch = arch
        self.streams = streams
        self.mode = SearchMode(mode)
        self.loss_cfg = loss_cfg or LossConfig()
        self.optim_cfg = (optim_cfg or OptimConfig()).check()
        self.seed = seed
        self.augment = augment or AugmentConfig()
        self.stats = stats
        self.eval_set = eval_set
        self.log_wall_time = log_wall_time
        self.weight_optimizer = SGDMomentum(
            net.parameters(),
            lr=self.optim_cfg.w_lr,
            momentum=self.optim_cfg.w_momentum,
            weight_decay=self.optim_cfg.w_weight_decay,
        )
        self.arch_optimizer = ArchAdam(
            arch.parameters(),
            lr=self.optim_cfg.alpha_lr,
            betas=self.optim_cfg.alpha_betas,
            weight_decay=self.optim_cfg.alpha_weight_decay,
            eps=self.optim_cfg.alpha_eps,
        )
        self.metrics: List[MetricsRecord] = []
        self.epoch = 0

    @property
    def gating(self) -> GatingMode:
        return self.mode.gating

    def batch_loss(
        self, stream: BatchStream, indices: np.ndarray, epoch: int
    ) -> Tensor:
        images = stream.dataset.images[indices]
        if self.mode.self_supervised:
            view_a, view_b = augment_batch(
                images,
                indices,
                self._augment_seed(epoch),
                self.augment,
                self.stats,
            )
            z_a = self.net.forward_projection(
                Tensor(view_a), self.arch, self.gating
            )
            z_b = self.net.forward_projection(
                Tensor(view_b), self.arch, self.gating
            )
            return barlow_twins(z_a, z_b, self.loss_cfg)
        logits = self.net.forward_supervised(
            Tensor(to_inputs(images, self.stats)), self.arch, self.gating
        )
        return cross_entropy(logits, stream.dataset.labels[indices])

    def _augment_seed(self, epoch: int) -> int:
        state = np.random.SeedSequence([self.seed, epoch]).generate_state(1)
        return int(state[0])

    def arch_step(self, indices: np.ndarray, epoch: int) -> float:
        with Tape() as tape:
            val_loss = self.batch_loss(self.streams.arch, indices, epoch)
            total = total_arch_loss(
                val_loss, self.arch, self.loss_cfg, epoch, self.gating
            )
        self.arch_optimizer.step(tape.backward(total))
        return val_loss.item()

    def weight_step(self, indices: np.ndarray, epoch: int) -> float:
        with Tape() as tape:
            train_loss = self.batch_loss(self.streams.weight, indices, epoch)
        self.weight_optimizer.step(tape.backward(train_loss))
        return train_loss.item()

    def run_epoch(self, epoch: int, total_epochs: int) -> MetricsRecord:
        started = time.perf_counter()
        lr = cosine_lr(
            epoch,
            total_epochs,
            self.optim_cfg.w_lr,
            self.optim_cfg.w_lr_min,
        )
        self.weight_optimizer.lr = lr
        train_losses, val_losses = [], []
        for weight_batch, arch_batch in zip(
            self.streams.weight.epoch_batches(epoch),
            self.streams.arch.epoch_batches(epoch),
        ):
            val_losses.append(self.arch_step(arch_batch, epoch))
            train_losses.append(self.weight_step(weight_batch, epoch))

        zero_one = None
        if self.gating == GatingMode.SIGMOID:
            zero_one = arch_zero_one(self.arch).item()
        report = None
        if self.eval_set is not None and not self.mode.self_supervised:
            report = evaluate(
                lambda images: self.net.forward_supervised(
                    images, self.arch, self.gating
                ),
                self.eval_set,
                self.optim_cfg.batch_size,
                self.stats,
            )
        elapsed = (time.perf_counter() - started) * 1000.0
        record = MetricsRecord(
            epoch=epoch,
            mode=self.mode.value,
            train_loss=float(np.mean(train_losses)),
            val_loss=float(np.mean(val_losses)),
            zero_one_loss=zero_one,
            lr=lr,
            wall_ms=elapsed if self.log_wall_time else None,
            **_accuracy_fields(report),
        )
        logger.info(
            f"search epoch {epoch}: train {record.train_loss:.4f} "
            f"val {record.val_loss:.4f} lr {lr:.5f}"
            + (f" zero-one {zero_one:.4f}" if zero_one is not None else "")
            + (
                f" balanced acc {record.balanced_acc:.4f}"
                if record.balanced_acc is not None
                else ""
            )
        )
        return record

    def run(
        self,
        epochs: int,
        on_epoch: Optional[Callable[["BilevelSearch"], None]] = None,
    ) -> SearchResult:
        """
        Run the remaining epochs up to ``epochs``

        :param epochs: int - total number of epochs of the run
        :param on_epoch: called after every finished epoch, e.g. to
        write a checkpoint
        :return: SearchResult
        """
        if epochs < 0:
            raise InvalidArgument(f"epochs must be >= 0, got {epochs}")
        for epoch in range(self.epoch, epochs):
            self.metrics.append(self.run_epoch(epoch, epochs))
            self.epoch = epoch + 1
            if on_epoch is not None:
                on_epoch(self)
        return SearchResult(arch=self.arch, metrics=list(self.metrics))

    def state(self) -> Dict[str, Dict[str, np.ndarray]]:
        return {
            "weights": self.weight_optimizer.state_dict(),
            "alpha": self.arch_optimizer.state_dict(),
        }

    def load_state(
        self,
        optim_state: Dict[str, Dict[str, np.ndarray]],
        epoch: int,
        metrics: Sequence[MetricsRecord],
    ) -> None:
        self.weight_optimizer.load_state_dict(optim_state["weights"])
        self.arch_optimizer.load_state_dict(optim_state["alpha"])
        self.epoch = epoch
        self.metrics = list(metrics)


def bilevel_search(
    net: Supernet,
    arch: ArchParams,
    streams: SearchStreams,
    mode: SearchMode,
    loss_cfg: Optional[LossConfig] = None,
    optim_cfg: Optional[OptimConfig] = None,
    epochs: Optional[int] = None,
    seed: int = 0,
    **kwargs,
) -> SearchResult:
    """
    Alternate architecture and weight steps for a number of epochs

    :param net: Supernet - weights, updated in place
    :param arch: ArchParams - updated in place and returned
    :param streams: SearchStreams - disjoint weight and arch streams
    :param mode: SearchMode - darts, fairdarts or ssf
    :param epochs: Optional[int] - defaults to optim_cfg.search_epochs
    :return: SearchResult
    """
    search = BilevelSearch(
        net, arch, streams, mode, loss_cfg, optim_cfg, seed, **kwargs
    )
    total = search.optim_cfg.search_epochs if epochs is None else epochs
    return search.run(total)


def retrain(
    child: ChildNetwork,
    stream: BatchStream,
    optim_cfg: Optional[OptimConfig] = None,
    epochs: Optional[int] = None,
    stats: Stats = None,
    eval_set: Optional[LabeledDataset] = None,
    log_wall_time: bool = True,
) -> List[MetricsRecord]:
    """
    Supervised training of a derived network with SGD and cosine
    annealing, one metrics record per epoch

    :param child: ChildNetwork - trained in place
    :param stream: BatchStream - training batches
    :param optim_cfg: Optional[OptimConfig]
    :param epochs: Optional[int] - defaults to optim_cfg.retrain_epochs
    :param stats: channel statistics for input normalization
    :param eval_set: Optional[LabeledDataset] - scored after every epoch
    :param log_wall_time: bool - fill the wall_ms column
    :return: List[MetricsRecord]
    """
    optim_cfg = (optim_cfg or OptimConfig()).check()
    total = optim_cfg.retrain_epochs if epochs is None else epochs
    if stream.num_batches() == 0:
        raise EmptyStream("The training stream has no batch of 2 samples")
    optimizer = SGDMomentum(
        child.parameters(),
        lr=optim_cfg.w_lr,
        momentum=optim_cfg.w_momentum,
        weight_decay=optim_cfg.w_weight_decay,
    )
    records = []
    for epoch in range(total):
        started = time.perf_counter()
        lr = cosine_lr(epoch, total, optim_cfg.w_lr, optim_cfg.w_lr_min)
        optimizer.lr = lr
        losses = []
        for indices in stream.epoch_batches(epoch):
            images = stream.dataset.images[indices]
            with Tape() as tape:
                loss = cross_entropy(
                    child(Tensor(to_inputs(images, stats))),
                    stream.dataset.labels[indices],
                )
            optimizer.step(tape.backward(loss))
            losses.append(loss.item())
        report = None
        if eval_set is not None:
            report = evaluate(child, eval_set, optim_cfg.batch_size, stats)
        elapsed = (time.perf_counter() - started) * 1000.0
        record = MetricsRecord(
            epoch=epoch,
            mode=RETRAIN_MODE,
            train_loss=float(np.mean(losses)),
            lr=lr,
            wall_ms=elapsed if log_wall_time else None,
            **_accuracy_fields(report),
        )
        logger.info(
            f"retrain epoch {epoch}: train {record.train_loss:.4f} "
            f"lr {lr:.5f}"
            + (
                f" balanced acc {record.balanced_acc:.4f}"
                if record.balanced_acc is not None
                else ""
            )
        )
        records.append(record)
    return records
