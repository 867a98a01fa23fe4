from enum import Enum
from typing import Tuple

from pydantic import BaseModel, Field

from fairsearch.exceptions import ConfigError
from fairsearch.space.operations import GatingMode


class SearchMode(str, Enum):
    DARTS = "darts"
    FAIRDARTS = "fairdarts"
    SSF = "ssf"

    @property
    def gating(self) -> GatingMode:
        if self == SearchMode.DARTS:
            return GatingMode.SOFTMAX
        return GatingMode.SIGMOID

    @property
    def self_supervised(self) -> bool:
        return self == SearchMode.SSF


class LossConfig(BaseModel):
    lambda_zero_one: float = Field(1.0, ge=0)
    lambda_bt: float = Field(5e-3, ge=0)
    zero_one_warmup_epochs: int = Field(10, ge=0)
    bt_mean_center: bool = False


class OptimConfig(BaseModel):
    w_lr: float = Field(0.025, gt=0)
    w_lr_min: float = Field(0.001, ge=0)
    w_momentum: float = Field(0.9, ge=0)
    w_weight_decay: float = Field(3e-4, ge=0)
    alpha_lr: float = Field(3e-4, gt=0)
    alpha_betas: Tuple[float, float] = (0.5, 0.999)
    alpha_weight_decay: float = Field(1e-3, ge=0)
    alpha_eps: float = Field(1e-8, gt=0)
    batch_size: int = Field(64, ge=2)
    search_epochs: int = Field(40, ge=0)
    retrain_epochs: int = Field(150, ge=0)
    xi: float = 0.0

    def check(self) -> "OptimConfig":
        if self.w_lr_min > self.w_lr:
            raise ConfigError(
                f"w_lr_min {self.w_lr_min} exceeds w_lr {self.w_lr}"
            )
        if self.xi != 0.0:
            raise ConfigError(
                f"xi={self.xi}: only the first-order search (xi = 0) "
                "is implemented"
            )
        for beta in self.alpha_betas:
            if not 0.0 <= beta < 1.0:
                raise ConfigError(f"alpha beta {beta} outside [0, 1)")
        return self
