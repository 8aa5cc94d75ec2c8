"""Patch/painting accuracies, per-class rates, confusion overlap and histograms.

Authentic is the positive class throughout. Paintings are scored by the
mean of their patch scores and called authentic when that mean is >= 0.5.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from swinauth.errors import UsageError

THRESHOLD = 0.5
DEFAULT_BINS = 50
CLASS_KEYS = ("authentic", "contrast", "imitation", "proxy")


@dataclass
class PredictionSet:
    """Test-patch scores for one model in one experiment."""

    painting_ids: List[str]
    patch_index: np.ndarray
    labels: List[str]  # authentic / imitation / proxy
    scores: np.ndarray

    def __post_init__(self):
        self.patch_index = np.asarray(self.patch_index, dtype=np.int64)
        self.scores = np.asarray(self.scores, dtype=np.float64)
        n = len(self.painting_ids)
        if not (len(self.labels) == len(self.scores) == len(self.patch_index) == n):
            raise UsageError("prediction set columns have different lengths")

    def __len__(self) -> int:
        return len(self.scores)

    @property
    def targets(self) -> np.ndarray:
        return np.array([label == "authentic" for label in self.labels], dtype=bool)

    @property
    def patch_correct(self) -> np.ndarray:
        return (self.scores >= THRESHOLD) == self.targets

    def keys(self) -> List[tuple]:
        return list(zip(self.painting_ids, self.patch_index.tolist()))

    def paintings(self) -> "OrderedDict[str, tuple]":
        """painting id -> (label, painting score), in first-appearance order."""
        groups: "OrderedDict[str, list]" = OrderedDict()
        labels = {}
        for pid, label, score in zip(self.painting_ids, self.labels, self.scores):
            groups.setdefault(pid, []).append(score)
            labels[pid] = label
        return OrderedDict((pid, (labels[pid], aggregate_painting(s)[0])) for pid, s in groups.items())


def aggregate_painting(scores: Sequence[float]):
    """(mean score, decision) with decision "authentic" iff mean >= 0.5."""
    values = np.asarray(scores, dtype=np.float64)
    if values.size == 0:
        raise UsageError("cannot aggregate an empty list of patch scores")
    m = float(values.mean())
    return m, ("authentic" if m >= THRESHOLD else "contrast")


def _rate(hits: np.ndarray) -> Optional[float]:
    return float(hits.mean()) if hits.size else None


def _ratio(num: int, den: int) -> Optional[float]:
    return num / den if den else None


def compute_metrics(preds: PredictionSet) -> Dict[str, Optional[float]]:
    """Metrics for one experiment. Undefined rates (empty class) are None."""
    if len(preds) == 0:
        raise UsageError("cannot compute metrics on an empty prediction set")
    paintings = preds.paintings()
    labels = np.array([label for label, _ in paintings.values()])
    scores = np.array([score for _, score in paintings.values()])
    truth = labels == "authentic"
    called = scores >= THRESHOLD
    correct = called == truth
    tp = int(np.sum(called & truth))
    fp = int(np.sum(called & ~truth))
    fn = int(np.sum(~called & truth))
    return {
        "patch_accuracy": _rate(preds.patch_correct),
        "painting_accuracy": _rate(correct),
        "accuracy_authentic": _rate(correct[truth]),
        "accuracy_contrast": _rate(correct[~truth]),
        "accuracy_imitation": _rate(correct[labels == "imitation"]),
        "accuracy_proxy": _rate(correct[labels == "proxy"]),
        "precision": _ratio(tp, tp + fp),
        "recall": _ratio(tp, tp + fn),
        "n_patches": len(preds),
        "n_paintings": len(paintings),
    }


@dataclass
class Summary:
    mean: Optional[float]
    sd: Optional[float]
    n: int
    values: List[Optional[float]] = field(default_factory=list)


def summarize(per_experiment: Iterable[Dict[str, Optional[float]]], keys: Sequence[str] | None = None) -> Dict[str, Summary]:
    """Mean and population SD across experiments, skipping undefined values."""
    rows = list(per_experiment)
    if keys is None:
        keys = [k for k in (rows[0] if rows else {}) if not k.startswith("n_")]
    out = {}
    for key in keys:
        values = [row.get(key) for row in rows]
        defined = np.array([v for v in values if v is not None and not math.isnan(v)], dtype=np.float64)
        if defined.size:
            out[key] = Summary(float(defined.mean()), float(defined.std()), int(defined.size), values)
        else:
            out[key] = Summary(None, None, 0, values)
    return out


def confusion_overlap(correct_a, correct_b) -> np.ndarray:
    """2x2 percentages [[A ok & B ok, A ok & B wrong], [A wrong & B ok, A wrong & B wrong]]."""
    a = np.asarray(correct_a, dtype=bool)
    b = np.asarray(correct_b, dtype=bool)
    if a.shape != b.shape:
        raise UsageError(f"correctness masks differ in length: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise UsageError("correctness masks are empty")
    cells = np.array([[np.sum(a & b), np.sum(a & ~b)], [np.sum(~a & b), np.sum(~a & ~b)]], dtype=np.float64)
    return 100.0 * cells / a.size


def histogram_counts(scores, bins: int = DEFAULT_BINS) -> np.ndarray:
    """Counts in ``bins`` equal-width bins over [0, 1]; a score of exactly 1 lands in the last bin."""
    s = np.asarray(scores, dtype=np.float64)
    if np.any((s < 0) | (s > 1)):
        raise UsageError("histogram scores must lie in [0, 1]")
    idx = np.minimum((s * bins).astype(np.int64), bins - 1)
    return np.bincount(idx, minlength=bins)


def prediction_histograms(scores, correct, bins: int = DEFAULT_BINS) -> Dict[str, np.ndarray]:
    """Separate score histograms for correctly and incorrectly predicted patches."""
    s = np.asarray(scores, dtype=np.float64)
    c = np.asarray(correct, dtype=bool)
    if s.shape != c.shape:
        raise UsageError("scores and correctness mask differ in length")
    return {"correct": histogram_counts(s[c], bins), "incorrect": histogram_counts(s[~c], bins)}


def bin_edges(bins: int = DEFAULT_BINS) -> np.ndarray:
    return np.linspace(0.0, 1.0, bins + 1)
