from fairsearch.supernet.checkpoint import (
    Checkpoint,
    load_checkpoint,
    save_checkpoint,
)
from fairsearch.supernet.config import SupernetConfig
from fairsearch.supernet.modules import Module
from fairsearch.supernet.network import (
    ChildNetwork,
    Network,
    Supernet,
    build_supernet,
    derive_child,
    forward_projection,
    forward_supervised,
    transfer_weights,
)

__all__ = [
    "SupernetConfig",
    "Module",
    "Network",
    "Supernet",
    "ChildNetwork",
    "build_supernet",
    "derive_child",
    "forward_supervised",
    "forward_projection",
    "transfer_weights",
    "Checkpoint",
    "save_checkpoint",
    "load_checkpoint",
]
