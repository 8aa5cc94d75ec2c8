"""Central finite-difference gradient checking."""

from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

from swinauth.tensor.core import Tensor, precision


# Central differences at h = 1e-5 carry ~1e-10 of round-off on an O(1) loss,
# so exactly-zero gradients (e.g. attention key biases) need a floor well above it.
REL_ERROR_FLOOR = 1e-5


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = REL_ERROR_FLOOR) -> float:
    """Max elementwise |a - n| / max(|a|, |n|, floor)."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)
    return float(np.max(np.abs(a - n) / denom)) if a.size else 0.0


def numeric_grad(loss_fn: Callable[[], Tensor], param: Tensor, h: float = 1e-5, indices=None) -> np.ndarray:
    """Central differences of ``loss_fn()`` w.r.t. selected entries of ``param``.

    ``indices`` is an iterable of flat indices; entries not listed are left at 0.
    """
    flat = param.data.reshape(-1)
    out = np.zeros(flat.shape, dtype=np.float64)
    idx = range(flat.size) if indices is None else indices
    for i in idx:
        orig = flat[i]
        flat[i] = orig + h
        up = float(loss_fn().data)
        flat[i] = orig - h
        down = float(loss_fn().data)
        flat[i] = orig
        out[i] = (up - down) / (2 * h)
    return out.reshape(param.shape)


def check_gradients(
    loss_fn: Callable[[], Tensor],
    params: Mapping[str, Tensor],
    h: float = 1e-5,
    max_entries: int | None = None,
    rng: np.random.Generator | None = None,
) -> dict:
    """Compare backprop gradients to finite differences; return max rel. error per parameter.

    Runs in float64. ``loss_fn`` must rebuild the graph from ``params`` on
    every call. With ``max_entries`` set, that many randomly chosen entries
    of each parameter are probed instead of all of them.
    """
    with precision(np.float64):
        for p in params.values():
            p.data = p.data.astype(np.float64)
            p.requires_grad = True
            p.grad = None
        loss = loss_fn()
        loss.backward()
        errors = {}
        rng = rng or np.random.default_rng(0)
        for name, p in params.items():
            if max_entries is None or p.size <= max_entries:
                indices = None
            else:
                indices = rng.choice(p.size, size=max_entries, replace=False)
            num = numeric_grad(loss_fn, p, h, indices)
            ana = p.grad
            if indices is not None:
                ana = ana.reshape(-1)[indices]
                num = num.reshape(-1)[indices]
            errors[name] = relative_error(ana, num)
    return errors
