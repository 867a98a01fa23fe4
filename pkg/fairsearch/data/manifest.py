import json
import logging
from pathlib import Path
from typing import Dict, List, Optional, Union

from pydantic import BaseModel, Field

from fairsearch.data.profiles import ImbalanceProfile
from fairsearch.exceptions import DatasetFormatError
from fairsearch.utils.pydantic import get_model_dump, parse_model

logger = logging.getLogger(__name__)

MANIFEST_VERSION = 1


class SplitRecord(BaseModel):
    file: str
    class_counts: List[int]
    profile: Optional[ImbalanceProfile] = None


class DatasetManifest(BaseModel):
    """
    What ``make-lt`` produced: source files, profile, seed and the
    resulting splits, plus the channel statistics of the training split
    """

    version: int = MANIFEST_VERSION
    sources: List[str] = Field(default_factory=list)
    profile: ImbalanceProfile
    seed: int
    image_size: int
    num_classes: int
    splits: Dict[str, SplitRecord] = Field(default_factory=dict)
    channel_mean: List[float] = Field(default_factory=list)
    channel_std: List[float] = Field(default_factory=list)
    data_hash: str = ""
    config_hash: str = ""


def write_manifest(path: Union[str, Path], manifest: DatasetManifest) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(get_model_dump(manifest), indent=2, sort_keys=True) + "\n"
    )
    logger.info(f"Wrote manifest {path}")
    return path


def read_manifest(path: Union[str, Path]) -> DatasetManifest:
    path = Path(path)
    if not path.is_file():
        raise DatasetFormatError(f"Dataset manifest {path} does not exist")
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise DatasetFormatError(
            f"{path}: line {e.lineno} column {e.colno}: {e.msg}"
        ) from e
    try:
        manifest = parse_model(DatasetManifest, payload)
    except ValueError as e:
        raise DatasetFormatError(f"{path}: {e}") from e
    if manifest.version != MANIFEST_VERSION:
        raise DatasetFormatError(
            f"{path}: unsupported manifest version {manifest.version}"
        )
    return manifest
