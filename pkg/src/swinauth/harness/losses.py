"""Sample-weighted binary cross-entropy."""

from __future__ import annotations

import logging

import numpy as np

from swinauth.tensor.core import Tensor, as_tensor, make_result

logger = logging.getLogger(__name__)

CLAMP_EPS = 1e-7


def bce_terms(scores, y, w=None, eps: float = CLAMP_EPS) -> np.ndarray:
    """Per-sample -w * [y ln s + (1 - y) ln(1 - s)] in float64, scores clamped into [eps, 1 - eps]."""
    s = np.clip(np.asarray(scores, dtype=np.float64).reshape(-1), eps, 1.0 - eps)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    w = np.ones_like(s) if w is None else np.broadcast_to(np.asarray(w, dtype=np.float64), s.shape)
    return -w * (y * np.log(s) + (1.0 - y) * np.log1p(-s))


def weighted_bce(scores, y, w=None, eps: float = CLAMP_EPS) -> Tensor:
    """sum_i w_i * BCE(score_i, y_i) / sum_i w_i, as a scalar tensor.

    Scores are clamped into [eps, 1 - eps]; clamped entries receive no
    gradient. The loss value is accumulated in float64.
    """
    if not isinstance(scores, Tensor):
        # raw arrays keep their float precision instead of dropping to the default dtype
        raw = np.asarray(scores)
        scores = as_tensor(raw) if raw.dtype.kind != "f" else Tensor(raw, dtype=raw.dtype)
    s = scores.data.astype(np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    w = np.ones_like(s) if w is None else np.broadcast_to(np.asarray(w, dtype=np.float64), s.shape).copy()
    if not (s.shape == y.shape == w.shape):
        raise ValueError(f"weighted_bce: scores {s.shape}, labels {y.shape}, weights {w.shape} differ")
    c = np.clip(s, eps, 1.0 - eps)
    clamped = c != s
    if clamped.any():
        logger.debug("weighted_bce: clamped %d of %d scores", int(clamped.sum()), s.size)
    per_sample = -(y * np.log(c) + (1.0 - y) * np.log1p(-c))
    total_w = w.sum()
    loss = np.asarray((w * per_sample).sum() / total_w)
    shape, dtype = scores.shape, scores.dtype

    def backward(g):
        ds = (w / total_w) * (-(y / c) + (1.0 - y) / (1.0 - c))
        ds[clamped] = 0.0
        return ((g * ds).reshape(shape).astype(dtype),)

    return make_result(loss, (scores,), backward, "weighted_bce")
