from fairsearch.data.augment import (
    AugmentConfig,
    AugmentedPair,
    augment_batch,
    augment_pair,
)
from fairsearch.data.dataset import (
    LabeledDataset,
    channel_stats,
    downsample,
    load_cifar10_binary,
    normalize,
    restrict_classes,
    subsample_longtailed,
    synthetic_dataset,
    to_inputs,
    write_binary,
)
from fairsearch.data.manifest import (
    DatasetManifest,
    SplitRecord,
    read_manifest,
    write_manifest,
)
from fairsearch.data.metrics import AccuracyReport, accuracy_report, evaluate
from fairsearch.data.profiles import (
    ImbalanceProfile,
    ProfileKind,
    class_counts,
)
from fairsearch.data.streams import (
    BatchStream,
    SearchStreams,
    split_indices,
    split_search_streams,
)

__all__ = [
    "ImbalanceProfile",
    "ProfileKind",
    "class_counts",
    "LabeledDataset",
    "load_cifar10_binary",
    "write_binary",
    "restrict_classes",
    "downsample",
    "subsample_longtailed",
    "channel_stats",
    "normalize",
    "to_inputs",
    "synthetic_dataset",
    "DatasetManifest",
    "SplitRecord",
    "read_manifest",
    "write_manifest",
    "BatchStream",
    "SearchStreams",
    "split_indices",
    "split_search_streams",
    "AugmentConfig",
    "AugmentedPair",
    "augment_pair",
    "augment_batch",
    "AccuracyReport",
    "accuracy_report",
    "evaluate",
]
