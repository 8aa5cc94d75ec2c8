"""Toy-scale verification suite behind ``swinauth selfcheck``."""

from __future__ import annotations

import contextlib
import time
from dataclasses import dataclass
from typing import Callable, List

import numpy as np

from swinauth import swin
from swinauth.data.patches import extract_patches
from swinauth.gradcases import CASES, GRAD_TOL, run_case
from swinauth.harness.losses import weighted_bce
from swinauth.harness.metrics import confusion_overlap
from swinauth.oracles import cross_region_mass, shifted_attention_oracle
from swinauth.tensor import Tensor, no_grad

TINY_TARGET, BASE_TARGET = 28e6, 88e6
ORACLE_TOL = 1e-5
MASS_TOL = 1e-8


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name:<28} {self.detail}  [{self.seconds:.1f}s]"


def random_attention_case(rng: np.random.Generator, batch: int = 2):
    """Random token map and attention weights at a toy size with a real shift."""
    m = int(rng.choice([2, 3, 4]))
    h, w = m * int(rng.integers(2, 4)), m * int(rng.integers(2, 4))
    heads = int(rng.choice([1, 2]))
    d = heads * int(rng.choice([2, 4]))
    shift = m // 2
    s = 1.0 / np.sqrt(d)
    params = {
        "a.qkv.weight": rng.normal(0, s, (d, 3 * d)),
        "a.qkv.bias": rng.normal(0, 0.1, 3 * d),
        "a.rel_bias": rng.normal(0, 0.5, ((2 * m - 1) ** 2, heads)),
        "a.proj.weight": rng.normal(0, s, (d, d)),
        "a.proj.bias": rng.normal(0, 0.1, d),
    }
    params = {k: v.astype(np.float32) for k, v in params.items()}
    x = rng.normal(size=(batch, h, w, d)).astype(np.float32)
    return x, params, heads, m, shift


def check_shifted_window(rng: np.random.Generator, batch: int = 2):
    """(max abs deviation from the oracle, max cross-region attention mass) for one random case."""
    x, params, heads, m, shift = random_attention_case(rng, batch)
    captured: list = []
    with no_grad():
        fast = swin.shifted_window_attention(
            Tensor(x), {k: Tensor(v) for k, v in params.items()}, "a", heads, m, shift, captured
        ).data
    slow = shifted_attention_oracle(x, params, "a", heads, m, shift)
    h, w = x.shape[1:3]
    return float(np.abs(fast - slow).max()), cross_region_mass(captured[0], h, w, m, shift, batch)


def _timed(name: str, fn: Callable[[], tuple]) -> CheckResult:
    start = time.perf_counter()
    try:
        passed, detail = fn()
    except Exception as exc:  # a crashing check is a failing check
        passed, detail = False, f"{type(exc).__name__}: {exc}"
    return CheckResult(name, passed, detail, time.perf_counter() - start)


def _param_counts():
    tiny = swin.count_parameters(swin.SwinConfig.tiny())
    base = swin.count_parameters(swin.SwinConfig.base())
    ok = abs(tiny / TINY_TARGET - 1) <= 0.05 and abs(base / BASE_TARGET - 1) <= 0.05
    return ok, f"Swin-Tiny {tiny:,} vs 28M +-5%; Swin-Base {base:,} vs 88M +-5%"


def _shape_ladder():
    config = swin.SwinConfig.tiny()
    params = swin.init_params(config, 0)
    stages: list = []
    with no_grad():
        swin.forward(np.zeros((1, 224, 224, 3), np.float32), config, params, stages)
    got = [tuple(t.shape[1:]) for t in stages]
    want = [(56, 56, 96), (28, 28, 192), (14, 14, 384), (7, 7, 768)]
    return got == want, " -> ".join("x".join(map(str, s)) for s in got)


def _shifted_oracle(instances: int):
    def run():
        rng = np.random.default_rng(1234)
        worst_dev = worst_mass = 0.0
        for _ in range(instances):
            dev, mass = check_shifted_window(rng)
            worst_dev, worst_mass = max(worst_dev, dev), max(worst_mass, mass)
        ok = worst_dev < ORACLE_TOL and worst_mass < MASS_TOL
        return ok, f"{instances} maps: max |fast-oracle| {worst_dev:.2e}, cross-region mass {worst_mass:.2e}"

    return run


def _gradients(instances: int):
    def run():
        worst = {name: max(run_case(name, seed) for seed in range(instances)) for name in CASES}
        bad = {k: v for k, v in worst.items() if not v < GRAD_TOL}
        top = max(worst, key=worst.get)
        detail = f"{len(CASES)} ops x {instances}: worst {top} {worst[top]:.2e}"
        if bad:
            detail += "; failing " + ", ".join(f"{k} {v:.2e}" for k, v in bad.items())
        return not bad, detail

    return run


def _patch_counts():
    got = []
    for side in (400, 600, 1200):
        img = np.random.default_rng(side).random((side, side + 37, 3)).astype(np.float32)
        patches = extract_patches(img)
        ok_shape = all(p.pixels.shape == (256, 256, 3) for p in patches)
        ok_range = all(0.0 <= p.pixels.min() and p.pixels.max() <= 1.0 for p in patches)
        got.append((len(patches), ok_shape and ok_range))
    counts = [n for n, _ in got]
    return counts == [1, 5, 17] and all(ok for _, ok in got), f"min sides 400/600/1200 -> {counts} sub-images"


def _harness_identities():
    rng = np.random.default_rng(7)
    s = rng.uniform(0.01, 0.99, 64)
    y = rng.integers(0, 2, 64)
    weighted = float(weighted_bce(s, y, np.ones(64)).data)
    plain = float(np.mean(-(y * np.log(s) + (1 - y) * np.log(1 - s))))
    cells = confusion_overlap(rng.random(50) > 0.3, rng.random(50) > 0.4)
    ok = abs(weighted - plain) < 1e-7 and abs(cells.sum() - 100.0) < 0.1
    return ok, f"|bce(w=1) - bce| {abs(weighted - plain):.1e}; overlap sum {cells.sum():.2f}%"


def run_selfcheck(grad_instances: int = 3, oracle_instances: int = 10, inject_mask_fault: bool = False) -> List[CheckResult]:
    fault = swin.inject_mask_fault() if inject_mask_fault else contextlib.nullcontext()
    with fault:
        return [
            _timed("parameter counts", _param_counts),
            _timed("shape ladder (224, Tiny)", _shape_ladder),
            _timed("shifted-window mask oracle", _shifted_oracle(oracle_instances)),
            _timed("finite-difference gradients", _gradients(grad_instances)),
            _timed("sub-image counts", _patch_counts),
            _timed("harness identities", _harness_identities),
        ]
