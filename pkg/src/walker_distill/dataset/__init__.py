"""Transition datasets: collection, binary format, statistics."""

from .collect import (
    build_manifest,
    collect,
    collect_to_file,
    creation_timestamp,
    shard_seeds,
    shard_sizes,
)
from .io import episodes_path, iter_chunks, manifest_path, read_dataset, write_dataset
from .schemas import (
    SIZE_PRESETS,
    STD_EPSILON,
    DatasetConfig,
    DatasetManifest,
    SizePreset,
    TransitionBatch,
    TransitionRecord,
)
from .stats import ColumnStats, DatasetStats, dataset_stats, stats_from_chunks

__all__ = [
    "SIZE_PRESETS",
    "STD_EPSILON",
    "ColumnStats",
    "DatasetConfig",
    "DatasetManifest",
    "DatasetStats",
    "SizePreset",
    "TransitionBatch",
    "TransitionRecord",
    "build_manifest",
    "collect",
    "collect_to_file",
    "creation_timestamp",
    "dataset_stats",
    "episodes_path",
    "iter_chunks",
    "manifest_path",
    "read_dataset",
    "shard_seeds",
    "shard_sizes",
    "stats_from_chunks",
    "write_dataset",
]
