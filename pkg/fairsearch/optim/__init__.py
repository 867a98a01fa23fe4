from fairsearch.optim.config import LossConfig, OptimConfig, SearchMode
from fairsearch.optim.losses import (
    arch_zero_one,
    barlow_twins,
    barlow_twins_loss,
    cross_correlation,
    cross_entropy,
    total_arch_loss,
    zero_one_loss,
)
from fairsearch.optim.optimizers import (
    ArchAdam,
    SGDMomentum,
    arch_adam_step,
    cosine_lr,
    sgd_momentum_step,
)
from fairsearch.optim.search import (
    BilevelSearch,
    MetricsRecord,
    SearchResult,
    bilevel_search,
    read_metrics_csv,
    retrain,
    write_metrics_csv,
)

__all__ = [
    "SearchMode",
    "LossConfig",
    "OptimConfig",
    "cross_entropy",
    "zero_one_loss",
    "arch_zero_one",
    "total_arch_loss",
    "cross_correlation",
    "barlow_twins_loss",
    "barlow_twins",
    "sgd_momentum_step",
    "SGDMomentum",
    "arch_adam_step",
    "ArchAdam",
    "cosine_lr",
    "MetricsRecord",
    "SearchResult",
    "BilevelSearch",
    "bilevel_search",
    "retrain",
    "write_metrics_csv",
    "read_metrics_csv",
]
