import dataclasses as dc
import json
import logging
import zipfile
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np

from fairsearch.exceptions import CheckpointError
from fairsearch.space.arch import ArchParams
from fairsearch.space.operations import OperationKind

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1

PARAM_PREFIX = "param/"
ALPHA_PREFIX = "alpha/"
OPTIM_PREFIX = "optim/"
META_KEY = "meta"


@dc.dataclass
class Checkpoint:
    """
    Named network weights plus optional architecture parameters,
    optimizer state and a JSON meta record
    """

    params: Dict[str, np.ndarray]
    meta: Dict[str, Any] = dc.field(default_factory=dict)
    alpha: Optional[Dict[str, np.ndarray]] = None
    optim: Dict[str, Dict[str, np.ndarray]] = dc.field(default_factory=dict)

    @property
    def kind(self) -> str:
        return self.meta.get("kind", "")

    def arch(self) -> Optional[ArchParams]:
        if self.alpha is None:
            return None
        primitives = [
            OperationKind(name) for name in self.meta.get("primitives", [])
        ]
        return ArchParams(
            primitives, self.alpha["normal"], self.alpha["reduce"]
        )


def save_checkpoint(path: Union[str, Path], checkpoint: Checkpoint) -> Path:
    """
    Write a checkpoint as an uncompressed ``.npz`` archive

    :param path: Union[str, Path] - target file
    :param checkpoint: Checkpoint
    :return: Path - written file
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arrays: Dict[str, np.ndarray] = {}
    for name, array in checkpoint.params.items():
        arrays[PARAM_PREFIX + name] = np.asarray(array)
    if checkpoint.alpha is not None:
        for name, array in checkpoint.alpha.items():
            arrays[ALPHA_PREFIX + name] = np.asarray(array)
    for optimizer, state in checkpoint.optim.items():
        for key, array in state.items():
            arrays[f"{OPTIM_PREFIX}{optimizer}/{key}"] = np.asarray(array)
    meta = {"version": CHECKPOINT_VERSION, **checkpoint.meta}
    arrays[META_KEY] = np.array(json.dumps(meta, sort_keys=True))
    with open(path, "wb") as f:
        np.savez(f, **arrays)
    logger.info(f"Wrote checkpoint {path}")
    return path


def load_checkpoint(path: Union[str, Path]) -> Checkpoint:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"Checkpoint {path} does not exist")
    try:
        with np.load(path, allow_pickle=False) as archive:
            arrays = {key: archive[key] for key in archive.files}
    except (OSError, ValueError, zipfile.BadZipFile, EOFError) as e:
        raise CheckpointError(f"{path} is not a checkpoint archive: {e}")
    if META_KEY not in arrays:
        raise CheckpointError(f"{path} has no '{META_KEY}' record")
    try:
        meta = json.loads(str(arrays.pop(META_KEY)))
    except json.JSONDecodeError as e:
        raise CheckpointError(
            f"{path}: meta record is not valid JSON "
            f"(line {e.lineno} column {e.colno}: {e.msg})"
        )
    if meta.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{path}: unsupported checkpoint version {meta.get('version')}"
        )

    params: Dict[str, np.ndarray] = {}
    alpha: Dict[str, np.ndarray] = {}
    optim: Dict[str, Dict[str, np.ndarray]] = {}
    for key, array in arrays.items():
        if key.startswith(PARAM_PREFIX):
            params[key[len(PARAM_PREFIX) :]] = array
        elif key.startswith(ALPHA_PREFIX):
            alpha[key[len(ALPHA_PREFIX) :]] = array
        elif key.startswith(OPTIM_PREFIX):
            optimizer, _, name = key[len(OPTIM_PREFIX) :].partition("/")
            optim.setdefault(optimizer, {})[name] = array
        else:
            raise CheckpointError(f"{path}: unexpected entry {key!r}")
    if alpha and set(alpha) != {"normal", "reduce"}:
        raise CheckpointError(
            f"{path}: architecture entries {sorted(alpha)}, expected "
            "['normal', 'reduce']"
        )
    return Checkpoint(
        params=params, meta=meta, alpha=alpha or None, optim=optim
    )
