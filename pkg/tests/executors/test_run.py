import csv
import json

import numpy as np
import pytest
from click.testing import CliRunner

from fairsearch.executors.run import fairsearch
from fairsearch.space import CellKind, genotype_parse
from fairsearch.supernet import load_checkpoint
from fairsearch.tensor.functional import Sigmoid

TINY_RUN = """
seed = 0
out_dir = "run"
precision = "float64"
log_wall_time = false

[supernet]
num_cells = 1
init_channels = 2
num_classes = 2
image_size = 4
embedding_dim = 4

[optim]
batch_size = 4
search_epochs = 1
retrain_epochs = 1

[loss]
zero_one_warmup_epochs = 0

[profile]
kind = "exponential"
mu = 0.5
base_count = 12
num_classes = 2

[data]
synthetic = true
source_image_size = 8
source_num_classes = 3
synthetic_train_per_class = 12
synthetic_noise = 8.0
lt_test_base_count = 6

[augment]
crop_padding = 1
"""


@pytest.fixture()
def runner(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    (tmp_path / "tiny.toml").write_text(TINY_RUN)
    return CliRunner()


def invoke(runner, *args):
    return runner.invoke(fairsearch, [*args, "-c", "tiny.toml"])


@pytest.fixture()
def prepared(runner, tmp_path):
    result = invoke(runner, "make-lt")
    assert result.exit_code == 0, result.output
    return tmp_path / "run"


@pytest.fixture()
def searched(runner, prepared):
    result = invoke(runner, "search")
    assert result.exit_code == 0, result.output
    return prepared


def read_rows(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def test_make_lt_writes_splits(prepared):
    manifest = json.loads((prepared / "data" / "manifest.json").read_text())
    assert manifest["splits"]["train"]["class_counts"] == [12, 6]
    assert manifest["splits"]["test"]["class_counts"] == [6, 6]
    assert manifest["splits"]["test_lt"]["class_counts"] == [6, 3]
    assert manifest["sources"] == ["synthetic"]
    rows = read_rows(prepared / "data" / "class_counts.csv")
    assert rows[1] == {"class": "1", "train": "6", "test": "6", "test_lt": "3"}
    train = prepared / "data" / "train.bin"
    assert train.stat().st_size == 18 * (1 + 3 * 4 * 4)


def test_make_lt_is_reproducible(runner, prepared):
    first = (prepared / "data" / "train.bin").read_bytes()
    assert invoke(runner, "make-lt").exit_code == 0
    assert (prepared / "data" / "train.bin").read_bytes() == first


def test_search_with_zero_epochs_keeps_every_edge_empty(runner, prepared):
    result = invoke(runner, "search", "--epochs", "0")
    assert result.exit_code == 0, result.output
    search_dir = prepared / "search"
    genotype = genotype_parse((search_dir / "genotype.json").read_text())
    for kind in CellKind:
        assert genotype.retained(kind) == []
    assert read_rows(search_dir / "metrics.csv") == []
    assert (search_dir / "normal.dot").is_file()


@pytest.mark.parametrize("mode", ["darts", "fairdarts", "ssf"])
def test_search_writes_artifacts(runner, prepared, mode):
    result = invoke(runner, "search", "--mode", mode, "--epochs", "2")
    assert result.exit_code == 0, result.output
    search_dir = prepared / "search"
    rows = read_rows(search_dir / "metrics.csv")
    assert [row["epoch"] for row in rows] == ["0", "1"]
    assert all(row["mode"] == mode for row in rows)
    assert all(row["wall_ms"] == "" for row in rows)
    assert (rows[0]["zero_one_loss"] == "") == (mode == "darts")
    assert (rows[0]["balanced_acc"] == "") == (mode == "ssf")
    for rule in ("argmax", "threshold", "darts_top2"):
        assert (search_dir / f"genotype.{rule}.json").is_file()
    alpha = json.loads((search_dir / "alpha.json").read_text())
    assert np.asarray(alpha["alpha_reduce"]).shape == (14, 8)
    checkpoint = load_checkpoint(search_dir / "checkpoint.npz")
    assert checkpoint.kind == "search"
    assert checkpoint.meta["epoch"] == 2


def test_search_is_reproducible(runner, prepared):
    assert invoke(runner, "search", "--epochs", "2").exit_code == 0
    search_dir = prepared / "search"
    names = ("metrics.csv", "genotype.json", "alpha.json")
    first = [(search_dir / name).read_bytes() for name in names]
    assert invoke(runner, "search", "--epochs", "2").exit_code == 0
    assert [(search_dir / name).read_bytes() for name in names] == first


def test_resume_needs_the_same_config(runner, prepared):
    assert invoke(runner, "search", "--epochs", "1").exit_code == 0
    result = invoke(runner, "search", "--epochs", "2", "--resume")
    assert result.exit_code == 2
    assert "ConfigMismatch" in result.output


def test_resume_after_finished_run_is_a_no_op(runner, searched):
    alpha = (searched / "search" / "alpha.json").read_text()
    result = invoke(runner, "search", "--resume")
    assert result.exit_code == 0, result.output
    assert (searched / "search" / "alpha.json").read_text() == alpha


def test_retrain_and_eval(runner, searched):
    result = invoke(runner, "retrain")
    assert result.exit_code == 0, result.output
    rows = read_rows(searched / "retrain" / "metrics.csv")
    assert [row["mode"] for row in rows] == ["retrain"]
    child = load_checkpoint(searched / "retrain" / "child.npz")
    assert child.kind == "child"

    result = invoke(runner, "eval", "--dataset", "test_lt")
    assert result.exit_code == 0, result.output
    payload = json.loads((searched / "eval" / "test_lt.json").read_text())
    assert payload["dataset"] == "test_lt"
    assert payload["class_counts"] == [6, 3]
    assert 0.0 <= payload["balanced"] <= 1.0
    assert len(payload["per_class"]) == 2


def test_eval_of_search_checkpoint(runner, searched):
    result = invoke(
        runner,
        "eval",
        "--checkpoint",
        str(searched / "search" / "checkpoint.npz"),
    )
    assert result.exit_code == 0, result.output
    assert (searched / "eval" / "test.json").is_file()


def test_retrain_with_more_cells(runner, searched):
    result = invoke(runner, "retrain", "--retrain-cells", "3")
    assert result.exit_code == 0, result.output
    child = load_checkpoint(searched / "retrain" / "child.npz")
    assert child.meta["supernet"]["num_cells"] == 3


def test_print_config(runner):
    result = invoke(runner, "search", "--print-config", "--seed", "4")
    assert result.exit_code == 0
    assert "seed = 4" in result.output
    assert "[supernet]" in result.output


def test_search_refuses_other_data(runner, prepared):
    result = invoke(runner, "search", "--seed", "3")
    assert result.exit_code == 2
    assert "make-lt" in result.output


def test_missing_source_exits_2(runner, tmp_path):
    (tmp_path / "bare.toml").write_text("[supernet]\nnum_cells = 1\n")
    result = runner.invoke(fairsearch, ["make-lt", "-c", "bare.toml"])
    assert result.exit_code == 2
    assert "DatasetFormatError" in result.output


def test_corrupt_checkpoint_exits_2(runner, prepared):
    path = prepared / "broken.npz"
    path.write_bytes(b"not an archive")
    result = invoke(runner, "eval", "--checkpoint", str(path))
    assert result.exit_code == 2
    assert "CheckpointError" in result.output


def test_missing_config_exits_2(runner):
    result = runner.invoke(fairsearch, ["search", "-c", "absent.toml"])
    assert result.exit_code == 2
    assert "does not exist" in result.output


def test_grad_check_command(runner):
    result = runner.invoke(
        fairsearch,
        ["grad-check", "--trials", "2", "--case", "relu", "--case", "add"],
    )
    assert result.exit_code == 0, result.output
    lines = result.output.splitlines()
    assert lines[0].split() == ["case", "max_rel_error", "trials", "status"]
    assert [line.split()[0] for line in lines[1:]] == ["add", "relu"]
    assert all(line.endswith("ok") for line in lines[1:])


def test_grad_check_failure_exits_1(runner, monkeypatch):
    monkeypatch.setattr(Sigmoid, "backward", lambda self, grad: (grad,))
    result = runner.invoke(
        fairsearch, ["grad-check", "--trials", "1", "--case", "sigmoid"]
    )
    assert result.exit_code == 1
    assert "FAILED" in result.output


@pytest.mark.parametrize(
    "command, option",
    [
        ("make-lt", "--mode"),
        ("make-lt", "--resume"),
        ("retrain", "--discretize"),
        ("retrain", "--resume"),
        ("eval", "--mode"),
        ("eval", "--epochs"),
    ],
)
def test_commands_reject_options_they_do_not_use(runner, command, option):
    result = runner.invoke(fairsearch, [command, option, "1"])
    assert result.exit_code == 2
    assert "No such option" in result.output
