from fairsearch.data import (
    ImbalanceProfile,
    LabeledDataset,
    ProfileKind,
    class_counts,
    evaluate,
    subsample_longtailed,
)
from fairsearch.optim import (
    LossConfig,
    OptimConfig,
    SearchMode,
    bilevel_search,
    retrain,
)
from fairsearch.settings import RunConfig, load_run_config
from fairsearch.space import (
    ArchParams,
    DiscretizeRule,
    GatingMode,
    Genotype,
    OperationKind,
    discretize,
    genotype_parse,
    genotype_serialize,
)
from fairsearch.supernet import (
    ChildNetwork,
    Supernet,
    SupernetConfig,
    build_supernet,
    derive_child,
)
from fairsearch.tensor import Tape, Tensor, grad_check

__version__ = "0.1.0"
__all__ = [
    # Tensors
    "Tensor",
    "Tape",
    "grad_check",
    # Search space
    "OperationKind",
    "GatingMode",
    "DiscretizeRule",
    "ArchParams",
    "Genotype",
    "discretize",
    "genotype_parse",
    "genotype_serialize",
    # Networks
    "SupernetConfig",
    "Supernet",
    "ChildNetwork",
    "build_supernet",
    "derive_child",
    # Search
    "SearchMode",
    "LossConfig",
    "OptimConfig",
    "bilevel_search",
    "retrain",
    # Data
    "ImbalanceProfile",
    "ProfileKind",
    "class_counts",
    "LabeledDataset",
    "subsample_longtailed",
    "evaluate",
    # Runs
    "RunConfig",
    "load_run_config",
]
