from .loader import (
    load_interactions,
    kcore_filter,
    build_sequences,
    dataset_statistics,
    write_id_maps,
)
from .split import leave_one_out_split, MIN_SEQUENCE_LENGTH
from .features import FeatureMatrix, write_modal_features, load_modal_features, FEATURE_MAGIC
from .synthetic import (
    SyntheticConfig,
    generate_synthetic,
    save_synthetic,
    load_synthetic_labels,
    has_synthetic_labels,
)
from .batching import Batch, collate, batch_iterator
from .manifest import write_split_manifest, read_split_manifest, load_prepared_dataset

__all__ = [
    "load_interactions",
    "kcore_filter",
    "build_sequences",
    "dataset_statistics",
    "write_id_maps",
    "leave_one_out_split",
    "MIN_SEQUENCE_LENGTH",
    "FeatureMatrix",
    "write_modal_features",
    "load_modal_features",
    "FEATURE_MAGIC",
    "SyntheticConfig",
    "generate_synthetic",
    "save_synthetic",
    "load_synthetic_labels",
    "has_synthetic_labels",
    "Batch",
    "collate",
    "batch_iterator",
    "write_split_manifest",
    "read_split_manifest",
    "load_prepared_dataset",
]
