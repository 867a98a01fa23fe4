import logging
import os
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

import toml
from pydantic import BaseModel, Field

from fairsearch.data.augment import AugmentConfig
from fairsearch.data.profiles import ImbalanceProfile
from fairsearch.exceptions import ConfigError
from fairsearch.optim.config import LossConfig, OptimConfig, SearchMode
from fairsearch.space.genotype import DEFAULT_THRESHOLD
from fairsearch.space.operations import DiscretizeRule
from fairsearch.supernet.config import SupernetConfig
from fairsearch.utils.hashing import model_hash, stable_hash
from fairsearch.utils.pydantic import (
    get_model_dump,
    get_model_fields,
    parse_model,
)

logger = logging.getLogger(__name__)

ENV_PREFIX = "FAIRSEARCH_"
TOOL_TABLE = "fairsearch"


class Precision(str, Enum):
    FLOAT32 = "float32"
    FLOAT64 = "float64"


class DataConfig(BaseModel):
    """
    Where the images come from. Without source files a synthetic
    class-conditional dataset is generated when ``synthetic`` is set.
    """

    source: List[str] = Field(default_factory=list)
    test_source: List[str] = Field(default_factory=list)
    source_image_size: int = Field(32, gt=0)
    source_num_classes: int = Field(10, ge=2)
    synthetic: bool = False
    synthetic_train_per_class: int = Field(5000, gt=0)
    synthetic_noise: float = Field(24.0, ge=0)
    split_fraction: float = Field(0.5, gt=0, lt=1)
    lt_test_base_count: int = Field(1000, gt=0)


class RunConfig(BaseModel):
    mode: SearchMode = SearchMode.DARTS
    seed: int = 0
    precision: Precision = Precision.FLOAT32
    out_dir: str = "runs/default"
    discretize: DiscretizeRule = DiscretizeRule.ARGMAX
    threshold: float = Field(DEFAULT_THRESHOLD, gt=0, lt=1)
    retrain_cells: Optional[int] = Field(None, gt=0)
    log_wall_time: bool = True
    supernet: SupernetConfig = Field(default_factory=SupernetConfig)
    optim: OptimConfig = Field(default_factory=OptimConfig)
    loss: LossConfig = Field(default_factory=LossConfig)
    profile: ImbalanceProfile = Field(default_factory=ImbalanceProfile)
    data: DataConfig = Field(default_factory=DataConfig)
    augment: AugmentConfig = Field(default_factory=AugmentConfig)

    def check(self) -> "RunConfig":
        if self.profile.num_classes != self.supernet.num_classes:
            raise ConfigError(
                f"profile.num_classes={self.profile.num_classes} differs "
                f"from supernet.num_classes={self.supernet.num_classes}"
            )
        if self.profile.num_classes > self.data.source_num_classes:
            raise ConfigError(
                f"profile.num_classes={self.profile.num_classes} exceeds "
                f"data.source_num_classes={self.data.source_num_classes}"
            )
        if self.data.source_image_size % self.supernet.image_size:
            raise ConfigError(
                f"supernet.image_size={self.supernet.image_size} does not "
                f"divide data.source_image_size="
                f"{self.data.source_image_size}"
            )
        self.optim.check()
        self.supernet.primitive_kinds()
        return self

    @property
    def out_path(self) -> Path:
        return Path(self.out_dir)

    def config_hash(self) -> str:
        return model_hash(self, exclude=("out_dir",))

    def data_hash(self) -> str:
        """
        Hash of everything that determines the prepared dataset
        """
        return stable_hash(
            {
                "profile": get_model_dump(self.profile),
                "data": get_model_dump(self.data),
                "image_size": self.supernet.image_size,
                "seed": self.seed,
            }
        )

    def to_toml(self) -> str:
        return toml.dumps(get_model_dump(self))


def _merge(
    base: Dict[str, Any], update: Mapping[str, Any]
) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in update.items():
        if isinstance(value, Mapping) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def _set_dotted(data: Dict[str, Any], key: str, value: Any) -> None:
    *parents, leaf = key.split(".")
    for parent in parents:
        data = data.setdefault(parent, {})
    data[leaf] = value


class RunSettings:
    """
    Resolve a :class:`RunConfig`. For every field the first source that
    sets it wins: explicit keyword (dotted keys address nested sections,
    e.g. ``optim.search_epochs``), ``FAIRSEARCH_<FIELD>`` environment
    variable for top-level scalars, the config file, the
    ``[tool.fairsearch]`` table of ``./pyproject.toml``, the default.
    """

    def __init__(self, config_path: Optional[str] = None, **kwargs):
        self.config_path = config_path
        data = _merge(self.get_from_pyproject(), self.get_from_file())
        for name in self.scalar_fields():
            value = self.get_env_value(name)
            if value is not None:
                data[name] = value
        for key, value in kwargs.items():
            if value is not None:
                _set_dotted(data, key, value)
        try:
            self.config = parse_model(RunConfig, data)
        except ValueError as e:
            raise ConfigError(f"Invalid configuration: {e}") from e
        self.config.check()

    @staticmethod
    def scalar_fields() -> List[str]:
        nested = {
            "supernet",
            "optim",
            "loss",
            "profile",
            "data",
            "augment",
        }
        return [
            name for name in get_model_fields(RunConfig) if name not in nested
        ]

    @staticmethod
    def get_env_value(field_name: str) -> Any:
        return os.environ.get(
            f"{ENV_PREFIX}{field_name.upper()}"
        ) or os.environ.get(f"{ENV_PREFIX.lower()}{field_name.lower()}")

    def get_from_file(self) -> Dict[str, Any]:
        if self.config_path is None:
            return {}
        path = Path(self.config_path)
        if not path.is_file():
            raise ConfigError(f"Config file {path} does not exist")
        try:
            return toml.load(path)
        except toml.TomlDecodeError as e:
            raise ConfigError(f"{path}: {e}") from e

    @staticmethod
    def get_from_pyproject() -> Dict[str, Any]:
        path = Path("pyproject.toml")
        if not path.is_file():
            return {}
        try:
            return toml.load(path).get("tool", {}).get(TOOL_TABLE, {})
        except toml.TomlDecodeError:
            logger.warning(f"Ignoring unreadable {path}")
            return {}


def load_run_config(
    config_path: Optional[str] = None, **overrides: Any
) -> RunConfig:
    return RunSettings(config_path, **overrides).config
