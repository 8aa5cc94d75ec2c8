"""Training, evaluation, campaigns and reports."""

from swinauth.harness.architectures import PRESETS, Architecture, build_architecture
from swinauth.harness.campaign import PatchStore, run_campaign, task_seed
from swinauth.harness.losses import weighted_bce
from swinauth.harness.metrics import (
    PredictionSet,
    Summary,
    aggregate_painting,
    compute_metrics,
    confusion_overlap,
    histogram_counts,
    prediction_histograms,
    summarize,
)
from swinauth.harness.reports import build_report, read_predictions, write_predictions
from swinauth.harness.training import EarlyStopping, PatchSet, TrainRunConfig, TrainResult, evaluate, predict, train_one

__all__ = [
    "PRESETS",
    "Architecture",
    "EarlyStopping",
    "PatchSet",
    "PatchStore",
    "PredictionSet",
    "Summary",
    "TrainResult",
    "TrainRunConfig",
    "aggregate_painting",
    "build_architecture",
    "build_report",
    "compute_metrics",
    "confusion_overlap",
    "evaluate",
    "histogram_counts",
    "predict",
    "prediction_histograms",
    "read_predictions",
    "run_campaign",
    "summarize",
    "task_seed",
    "train_one",
    "weighted_bce",
    "write_predictions",
]
