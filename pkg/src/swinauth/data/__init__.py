"""Corpus ingestion, patch extraction, resampling and experiment planning."""

from swinauth.data.manifest import (
    LABELS,
    PaintingRecord,
    PatchRecord,
    label_counts,
    load_patch,
    prepare_cache,
    read_cache_index,
    read_manifest,
    write_manifest,
)
from swinauth.data.patches import PATCH_SIZE, extract_patches, grid_exponent, load_image, patch_count
from swinauth.data.plan import (
    REFINED_FULL,
    STANDARD_FULL,
    ExperimentPlan,
    PartitionTargets,
    Split,
    assign_weights,
    build_plan,
    experiment_seeds,
    proportional_targets,
)
from swinauth.data.resample import cubic_kernel, resample_batch, resample_bicubic

__all__ = [
    "LABELS",
    "PATCH_SIZE",
    "REFINED_FULL",
    "STANDARD_FULL",
    "ExperimentPlan",
    "PaintingRecord",
    "PartitionTargets",
    "PatchRecord",
    "Split",
    "assign_weights",
    "build_plan",
    "cubic_kernel",
    "experiment_seeds",
    "extract_patches",
    "grid_exponent",
    "label_counts",
    "load_image",
    "load_patch",
    "patch_count",
    "prepare_cache",
    "proportional_targets",
    "read_cache_index",
    "read_manifest",
    "resample_batch",
    "resample_bicubic",
    "write_manifest",
]
