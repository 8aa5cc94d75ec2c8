"""Weight initialisers."""

from __future__ import annotations

import math

import numpy as np


def truncated_normal(rng: np.random.Generator, shape, std: float, bound: float = 2.0) -> np.ndarray:
    """Normal(0, std**2) samples; draws beyond ``bound`` standard deviations are redrawn."""
    shape = tuple(shape)
    out = rng.standard_normal(shape)
    bad = np.abs(out) > bound
    while bad.any():
        out[bad] = rng.standard_normal(int(bad.sum()))
        bad = np.abs(out) > bound
    return out * std


def he_normal_init(fan_in: int, rng: np.random.Generator, shape=None) -> np.ndarray:
    """He-normal weights: sigma = sqrt(2 / fan_in), truncated at +-2 sigma."""
    if fan_in < 1:
        raise ValueError(f"fan_in must be >= 1, got {fan_in}")
    if shape is None:
        shape = (fan_in,)
    return truncated_normal(rng, shape, math.sqrt(2.0 / fan_in))


def he_sigma(fan_in: int) -> float:
    return math.sqrt(2.0 / fan_in)
