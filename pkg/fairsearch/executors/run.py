import csv
import dataclasses as dc
import functools
import json
import logging
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Tuple

import click
import numpy as np

from fairsearch.data.dataset import (
    LabeledDataset,
    channel_stats,
    downsample,
    load_cifar10_binary,
    restrict_classes,
    subsample_longtailed,
    synthetic_dataset,
    write_binary,
)
from fairsearch.data.manifest import (
    DatasetManifest,
    SplitRecord,
    read_manifest,
    write_manifest,
)
from fairsearch.data.metrics import Predictor, evaluate
from fairsearch.data.profiles import with_base_count
from fairsearch.data.streams import (
    WEIGHT_STREAM,
    BatchStream,
    split_search_streams,
)
from fairsearch.exceptions import (
    CheckpointError,
    ConfigMismatch,
    DatasetFormatError,
    FairsearchError,
    GenotypeParseError,
)
from fairsearch.executors import grad_suite
from fairsearch.optim.config import SearchMode
from fairsearch.optim.search import (
    BilevelSearch,
    MetricsRecord,
    retrain,
    write_metrics_csv,
)
from fairsearch.settings import RunConfig, load_run_config
from fairsearch.space.genotype import (
    Genotype,
    discretize,
    genotype_parse,
    genotype_serialize,
    genotype_to_dot,
)
from fairsearch.space.operations import CellKind, DiscretizeRule
from fairsearch.supernet.checkpoint import (
    Checkpoint,
    load_checkpoint,
    save_checkpoint,
)
from fairsearch.supernet.config import SupernetConfig
from fairsearch.supernet.network import (
    ChildNetwork,
    Supernet,
    build_supernet,
    derive_child,
)
from fairsearch.tensor import precision
from fairsearch.utils.pydantic import get_model_dump, parse_model

logging.basicConfig(format="%(message)s", level=logging.INFO)
logger = logging.getLogger(__name__)

SPLITS = ("train", "test", "test_lt")

Stats = Tuple[np.ndarray, np.ndarray]


class CommandError(click.ClickException):
    exit_code = 2


def reports_errors(command: Callable) -> Callable:
    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except FairsearchError as e:
            raise CommandError(f"{type(e).__name__}: {e}") from e

    return wrapper


@dc.dataclass
class RunLayout:
    """
    Where every command of one run reads and writes its files
    """

    root: Path

    @property
    def data_dir(self) -> Path:
        return self.root / "data"

    @property
    def manifest(self) -> Path:
        return self.data_dir / "manifest.json"

    @property
    def search_dir(self) -> Path:
        return self.root / "search"

    @property
    def search_checkpoint(self) -> Path:
        return self.search_dir / "checkpoint.npz"

    @property
    def genotype(self) -> Path:
        return self.search_dir / "genotype.json"

    @property
    def retrain_dir(self) -> Path:
        return self.root / "retrain"

    @property
    def child_checkpoint(self) -> Path:
        return self.retrain_dir / "child.npz"

    @property
    def eval_dir(self) -> Path:
        return self.root / "eval"


def _write_text(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    logger.info(f"Wrote {path}")
    return path


# make-lt


def _split_per_class(
    dataset: LabeledDataset, train_per_class: int
) -> Tuple[LabeledDataset, LabeledDataset]:
    train, test = [], []
    for label in range(dataset.num_classes):
        members = np.flatnonzero(dataset.labels == label)
        train.append(members[:train_per_class])
        test.append(members[train_per_class:])
    return (
        dataset.subset(np.sort(np.concatenate(train)), split="train"),
        dataset.subset(np.sort(np.concatenate(test)), split="test"),
    )


def load_sources(cfg: RunConfig) -> Tuple[LabeledDataset, LabeledDataset]:
    """
    Full training and test sets restricted to the configured classes and
    downsampled to the configured image size
    """
    data = cfg.data
    if data.source:
        if not data.test_source:
            raise DatasetFormatError(
                "data.source is set but data.test_source is not"
            )
        train = load_cifar10_binary(
            data.source, data.source_image_size, data.source_num_classes
        )
        test = load_cifar10_binary(
            data.test_source, data.source_image_size, data.source_num_classes
        )
    elif data.synthetic:
        full = synthetic_dataset(
            data.source_num_classes,
            data.synthetic_train_per_class + data.lt_test_base_count,
            data.source_image_size,
            cfg.seed,
            data.synthetic_noise,
        )
        train, test = _split_per_class(full, data.synthetic_train_per_class)
    else:
        raise DatasetFormatError(
            "No source dataset: set data.source and data.test_source to "
            "binary record files, or data.synthetic = true"
        )
    classes, size = cfg.profile.num_classes, cfg.supernet.image_size
    return (
        downsample(restrict_classes(train, classes), size),
        downsample(restrict_classes(test, classes), size),
    )


def write_class_counts(path: Path, splits: Dict[str, LabeledDataset]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    counts = {name: ds.class_counts() for name, ds in splits.items()}
    num_classes = next(iter(splits.values())).num_classes
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["class", *counts])
        for label in range(num_classes):
            writer.writerow(
                [label, *[values[label] for values in counts.values()]]
            )
    return path


def run_make_lt(cfg: RunConfig) -> DatasetManifest:
    layout = RunLayout(cfg.out_path)
    train_full, test = load_sources(cfg)
    train = subsample_longtailed(train_full, cfg.profile, cfg.seed)
    test_lt_profile = with_base_count(
        cfg.profile, cfg.data.lt_test_base_count
    )
    test_lt = subsample_longtailed(test, test_lt_profile, cfg.seed)
    splits = {"train": train, "test": test, "test_lt": test_lt}
    profiles = {"train": cfg.profile, "test_lt": test_lt_profile}

    records = {}
    for name, dataset in splits.items():
        write_binary(layout.data_dir / f"{name}.bin", dataset)
        records[name] = SplitRecord(
            file=f"{name}.bin",
            class_counts=dataset.class_counts(),
            profile=profiles.get(name),
        )
    write_class_counts(layout.data_dir / "class_counts.csv", splits)
    mean, std = channel_stats(train)
    manifest = DatasetManifest(
        sources=list(cfg.data.source + cfg.data.test_source) or ["synthetic"],
        profile=cfg.profile,
        seed=cfg.seed,
        image_size=cfg.supernet.image_size,
        num_classes=cfg.profile.num_classes,
        splits=records,
        channel_mean=mean.tolist(),
        channel_std=std.tolist(),
        data_hash=cfg.data_hash(),
        config_hash=cfg.config_hash(),
    )
    write_manifest(layout.manifest, manifest)
    logger.info(
        f"Prepared {cfg.profile.kind.value} dataset: train counts "
        f"{records['train'].class_counts}"
    )
    return manifest


# shared by search, retrain and eval


def load_prepared(
    layout: RunLayout, cfg: RunConfig, force: bool = False
) -> DatasetManifest:
    manifest = read_manifest(layout.manifest)
    if manifest.data_hash != cfg.data_hash():
        message = (
            f"{layout.manifest} has data hash {manifest.data_hash}, the "
            f"config expects {cfg.data_hash()}"
        )
        if not force:
            raise ConfigMismatch(f"{message}; rerun make-lt or use --force")
        logger.warning(message)
    return manifest


def load_split(
    layout: RunLayout, manifest: DatasetManifest, name: str
) -> LabeledDataset:
    if name not in manifest.splits:
        raise DatasetFormatError(
            f"{layout.manifest} has no split {name!r}, "
            f"available: {sorted(manifest.splits)}"
        )
    return load_cifar10_binary(
        layout.data_dir / manifest.splits[name].file,
        manifest.image_size,
        manifest.num_classes,
    )


def manifest_stats(manifest: DatasetManifest) -> Stats:
    return np.asarray(manifest.channel_mean), np.asarray(manifest.channel_std)


# search


def search_checkpoint(search: BilevelSearch, cfg: RunConfig) -> Checkpoint:
    return Checkpoint(
        params=search.net.parameter_arrays(),
        alpha={
            "normal": search.arch.alpha_normal.numpy(),
            "reduce": search.arch.alpha_reduce.numpy(),
        },
        optim=search.state(),
        meta={
            "kind": "search",
            "config_hash": cfg.config_hash(),
            "data_hash": cfg.data_hash(),
            "mode": cfg.mode.value,
            "epoch": search.epoch,
            "primitives": [kind.value for kind in search.arch.primitives],
            "supernet": get_model_dump(cfg.supernet),
            "metrics": [get_model_dump(record) for record in search.metrics],
        },
    )


def resume_search(
    search: BilevelSearch, checkpoint: Checkpoint, cfg: RunConfig
) -> None:
    if checkpoint.kind != "search":
        raise CheckpointError(
            f"expected a search checkpoint, got kind {checkpoint.kind!r}"
        )
    if checkpoint.meta.get("config_hash") != cfg.config_hash():
        raise ConfigMismatch(
            f"checkpoint was written by config "
            f"{checkpoint.meta.get('config_hash')}, this run is "
            f"{cfg.config_hash()}"
        )
    arch = checkpoint.arch()
    if arch is None:
        raise CheckpointError("search checkpoint has no architecture entries")
    search.net.load_parameter_arrays(checkpoint.params)
    search.arch.alpha_normal.data[...] = arch.alpha_normal.data
    search.arch.alpha_reduce.data[...] = arch.alpha_reduce.data
    metrics = [
        parse_model(MetricsRecord, record)
        for record in checkpoint.meta.get("metrics", [])
    ]
    search.load_state(checkpoint.optim, checkpoint.meta["epoch"], metrics)
    logger.info(f"Resumed search after epoch {search.epoch}")


def write_search_artifacts(
    layout: RunLayout, search: BilevelSearch, cfg: RunConfig
) -> Genotype:
    config_hash = cfg.config_hash()
    chosen = None
    for rule in DiscretizeRule:
        genotype = discretize(
            search.arch,
            rule,
            search.gating,
            threshold=cfg.threshold,
            config_hash=config_hash,
        )
        _write_text(
            layout.search_dir / f"genotype.{rule.value}.json",
            genotype_serialize(genotype),
        )
        if rule == cfg.discretize:
            chosen = genotype
    _write_text(layout.genotype, genotype_serialize(chosen))
    for kind in CellKind:
        _write_text(
            layout.search_dir / f"{kind.value}.dot",
            genotype_to_dot(chosen, kind),
        )
    _write_text(
        layout.search_dir / "alpha.json",
        json.dumps(
            {"config_hash": config_hash, **search.arch.to_dict()}, indent=2
        )
        + "\n",
    )
    write_metrics_csv(
        layout.search_dir / "metrics.csv",
        search.metrics,
        cfg.supernet.num_classes,
    )
    return chosen


def run_search(
    cfg: RunConfig, resume: bool = False, force: bool = False
) -> Genotype:
    layout = RunLayout(cfg.out_path)
    manifest = load_prepared(layout, cfg, force)
    train = load_split(layout, manifest, "train")
    test = load_split(layout, manifest, "test")
    with precision(cfg.precision.value):
        streams = split_search_streams(
            train, cfg.data.split_fraction, cfg.seed, cfg.optim.batch_size
        )
        net = build_supernet(cfg.supernet, cfg.seed)
        search = BilevelSearch(
            net,
            net.new_arch(),
            streams,
            cfg.mode,
            cfg.loss,
            cfg.optim,
            seed=cfg.seed,
            augment=cfg.augment,
            stats=manifest_stats(manifest),
            eval_set=test,
            log_wall_time=cfg.log_wall_time,
        )
        if resume:
            if layout.search_checkpoint.is_file():
                resume_search(
                    search, load_checkpoint(layout.search_checkpoint), cfg
                )
            else:
                logger.info("No search checkpoint found, starting fresh")
        search.run(
            cfg.optim.search_epochs,
            on_epoch=lambda s: save_checkpoint(
                layout.search_checkpoint, search_checkpoint(s, cfg)
            ),
        )
    return write_search_artifacts(layout, search, cfg)


# retrain


def read_genotype(path: Path) -> Genotype:
    if not path.is_file():
        raise GenotypeParseError(f"Genotype file {path} does not exist")
    return genotype_parse(path.read_text())


def run_retrain(
    cfg: RunConfig,
    genotype_path: Optional[str] = None,
    force: bool = False,
) -> ChildNetwork:
    layout = RunLayout(cfg.out_path)
    path = Path(genotype_path) if genotype_path else layout.genotype
    genotype = read_genotype(path)
    if genotype.config_hash and genotype.config_hash != cfg.config_hash():
        logger.warning(
            f"{path} was searched with config {genotype.config_hash}, "
            f"retraining with {cfg.config_hash()}"
        )
    manifest = load_prepared(layout, cfg, force)
    train = load_split(layout, manifest, "train")
    test = load_split(layout, manifest, "test")
    with precision(cfg.precision.value):
        child = derive_child(
            genotype, cfg.supernet, cfg.seed, num_cells=cfg.retrain_cells
        )
        stream = BatchStream(
            train,
            np.arange(len(train)),
            cfg.optim.batch_size,
            cfg.seed,
            WEIGHT_STREAM,
        )
        records = retrain(
            child,
            stream,
            cfg.optim,
            cfg.optim.retrain_epochs,
            stats=manifest_stats(manifest),
            eval_set=test,
            log_wall_time=cfg.log_wall_time,
        )
    save_checkpoint(
        layout.child_checkpoint,
        Checkpoint(
            params=child.parameter_arrays(),
            meta={
                "kind": "child",
                "config_hash": cfg.config_hash(),
                "data_hash": manifest.data_hash,
                "genotype": get_model_dump(genotype, by_alias=True),
                "supernet": get_model_dump(child.cfg),
            },
        ),
    )
    write_metrics_csv(
        layout.retrain_dir / "metrics.csv",
        records,
        cfg.supernet.num_classes,
    )
    return child


# eval


def restore_predictor(checkpoint: Checkpoint) -> Predictor:
    """
    Rebuild the network stored in a checkpoint as an images -> logits
    callable
    """
    try:
        supernet_cfg = parse_model(
            SupernetConfig, checkpoint.meta["supernet"]
        )
        if checkpoint.kind == "child":
            genotype = parse_model(Genotype, checkpoint.meta["genotype"])
        elif checkpoint.kind == "search":
            mode = SearchMode(checkpoint.meta["mode"])
        else:
            raise CheckpointError(
                f"unknown checkpoint kind {checkpoint.kind!r}"
            )
    except (KeyError, ValueError) as e:
        raise CheckpointError(f"incomplete checkpoint meta record: {e}")

    if checkpoint.kind == "child":
        child = ChildNetwork(genotype, supernet_cfg)
        child.load_parameter_arrays(checkpoint.params)
        return child
    net = Supernet(supernet_cfg)
    net.load_parameter_arrays(checkpoint.params)
    arch = checkpoint.arch()
    if arch is None:
        raise CheckpointError("search checkpoint has no architecture entries")
    return lambda images: net.forward_supervised(images, arch, mode.gating)


def run_eval(
    cfg: RunConfig,
    checkpoint_path: Optional[str] = None,
    dataset: str = "test",
    force: bool = False,
) -> Dict[str, Any]:
    layout = RunLayout(cfg.out_path)
    path = (
        Path(checkpoint_path) if checkpoint_path else layout.child_checkpoint
    )
    checkpoint = load_checkpoint(path)
    manifest = read_manifest(layout.manifest)
    if checkpoint.meta.get("data_hash") != manifest.data_hash:
        message = (
            f"{path} was trained on data {checkpoint.meta.get('data_hash')}, "
            f"{layout.manifest} describes {manifest.data_hash}"
        )
        if not force:
            raise ConfigMismatch(f"{message}; use --force to evaluate anyway")
        logger.warning(message)
    split = load_split(layout, manifest, dataset)
    with precision(cfg.precision.value):
        report = evaluate(
            restore_predictor(checkpoint),
            split,
            cfg.optim.batch_size,
            manifest_stats(manifest),
        )
    payload = {
        "dataset": dataset,
        "checkpoint": str(path),
        "config_hash": checkpoint.meta.get("config_hash"),
        "data_hash": manifest.data_hash,
        **get_model_dump(report),
    }
    _write_text(
        layout.eval_dir / f"{dataset}.json",
        json.dumps(payload, indent=2, sort_keys=True) + "\n",
    )
    logger.info(
        f"{dataset}: overall {report.overall:.4f} "
        f"balanced {report.balanced:.4f}"
    )
    return payload


# command line

config_option = click.option(
    "-c",
    "--config",
    "config_path",
    required=False,
    type=click.Path(dir_okay=False),
    help="TOML run configuration",
)
seed_option = click.option(
    "--seed", required=False, type=int, help="Run seed"
)
mode_option = click.option(
    "--mode",
    required=False,
    type=click.Choice([mode.value for mode in SearchMode]),
    help="Search scheme",
)
epochs_option = click.option(
    "--epochs", required=False, type=int, help="Number of epochs"
)
discretize_option = click.option(
    "--discretize",
    required=False,
    type=click.Choice([rule.value for rule in DiscretizeRule]),
    help="Rule that turns alpha into the recorded genotype",
)
resume_option = click.option(
    "--resume",
    is_flag=True,
    default=False,
    help="Continue from the last epoch checkpoint",
)
out_option = click.option(
    "-o", "--out", required=False, type=str, help="Output directory"
)
print_config_option = click.option(
    "--print-config",
    is_flag=True,
    default=False,
    help="Print the effective configuration as TOML and exit",
)
force_option = click.option(
    "--force",
    is_flag=True,
    default=False,
    help="Proceed although checkpoint, config and dataset hashes differ",
)


def echo_config(cfg: RunConfig) -> None:
    click.echo(cfg.to_toml(), nl=False)


@click.group()
def fairsearch():
    pass


@fairsearch.command(name="make-lt")
@config_option
@seed_option
@out_option
@print_config_option
@reports_errors
def make_lt(config_path, seed, out, print_config):
    """
    Subsample a long-tailed training set and the test sets
    """
    cfg = load_run_config(config_path, seed=seed, out_dir=out)
    if print_config:
        echo_config(cfg)
        return
    run_make_lt(cfg)


@fairsearch.command()
@config_option
@seed_option
@mode_option
@epochs_option
@discretize_option
@resume_option
@out_option
@print_config_option
@force_option
@reports_errors
def search(
    config_path,
    seed,
    mode,
    epochs,
    discretize,
    resume,
    out,
    print_config,
    force,
):
    """
    Bilevel architecture search on the prepared training set
    """
    cfg = load_run_config(
        config_path,
        seed=seed,
        mode=mode,
        discretize=discretize,
        out_dir=out,
        **{"optim.search_epochs": epochs},
    )
    if print_config:
        echo_config(cfg)
        return
    run_search(cfg, resume=resume, force=force)


@fairsearch.command(name="retrain")
@config_option
@seed_option
@mode_option
@epochs_option
@out_option
@print_config_option
@force_option
@click.option(
    "--genotype",
    "genotype_path",
    required=False,
    type=click.Path(dir_okay=False),
    help="Genotype file, defaults to <out>/search/genotype.json",
)
@click.option(
    "--retrain-cells",
    required=False,
    type=int,
    help="Number of cells of the retrained network",
)
@reports_errors
def retrain_command(
    config_path,
    seed,
    mode,
    epochs,
    out,
    print_config,
    force,
    genotype_path,
    retrain_cells,
):
    """
    Train the network derived from a genotype from scratch
    """
    cfg = load_run_config(
        config_path,
        seed=seed,
        mode=mode,
        out_dir=out,
        retrain_cells=retrain_cells,
        **{"optim.retrain_epochs": epochs},
    )
    if print_config:
        echo_config(cfg)
        return
    run_retrain(cfg, genotype_path, force=force)


@fairsearch.command(name="eval")
@config_option
@out_option
@print_config_option
@force_option
@click.option(
    "--checkpoint",
    "checkpoint_path",
    required=False,
    type=click.Path(dir_okay=False),
    help="Checkpoint to evaluate, defaults to <out>/retrain/child.npz",
)
@click.option(
    "--dataset",
    required=False,
    default="test",
    type=click.Choice(SPLITS),
    help="Prepared split to evaluate on",
)
@reports_errors
def eval_command(
    config_path, out, print_config, force, checkpoint_path, dataset
):
    """
    Overall, balanced and per-class accuracy of a checkpoint
    """
    cfg = load_run_config(config_path, out_dir=out)
    if print_config:
        echo_config(cfg)
        return
    payload = run_eval(cfg, checkpoint_path, dataset, force=force)
    click.echo(json.dumps(payload, indent=2, sort_keys=True))


@fairsearch.command(name="grad-check")
@click.option(
    "--scope",
    required=False,
    default=grad_suite.PRIMITIVE,
    type=click.Choice(grad_suite.SCOPES),
    help="Primitives and losses, the end-to-end supernet, or both",
)
@click.option(
    "--trials",
    required=False,
    default=grad_suite.DEFAULT_TRIALS,
    type=click.IntRange(min=1),
    help="Random inputs per case",
)
@click.option("--seed", required=False, default=0, type=int)
@click.option(
    "--case",
    "cases",
    multiple=True,
    help="Only run the named cases, repeatable",
)
@click.pass_context
@reports_errors
def grad_check_command(ctx, scope, trials, seed, cases):
    """
    Compare reverse-mode gradients with central differences
    """
    results = grad_suite.run_suite(scope, trials, seed, list(cases) or None)
    width = max([len(result.name) for result in results] + [4])
    click.echo(f"{'case':<{width}}  max_rel_error  trials  status")
    for result in results:
        status = "ok" if result.passed else "FAILED"
        click.echo(
            f"{result.name:<{width}}  {result.max_error:13.3e}  "
            f"{result.trials:6d}  {status}"
        )
    failed = [result.name for result in results if not result.passed]
    if failed:
        click.echo(f"Gradient check failed: {', '.join(failed)}", err=True)
        ctx.exit(1)
