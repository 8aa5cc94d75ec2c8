"""Procedural two-class "painting" corpus for sanity experiments.

All paintings share one palette and the same stroke-size statistics; they differ only in
the dominant stroke orientation (near-horizontal for authentic works,
near-vertical for the contrast class).
"""

from __future__ import annotations

from pathlib import Path
from typing import List

import numpy as np
from PIL import Image

from swinauth.data.manifest import PaintingRecord, write_manifest

ORIENTATION = {"authentic": 0.0, "imitation": np.pi / 2, "proxy": np.pi / 2}


def render_strokes(
    rng: np.random.Generator,
    height: int,
    width: int,
    angle: float,
    palette: np.ndarray,
    jitter: float = 0.25,
    n_strokes: int | None = None,
) -> np.ndarray:
    """(H, W, 3) float image of thick line segments around ``angle`` radians.

    Background and stroke colours are drawn from ``palette`` (k, 3).
    """
    img = np.empty((height, width, 3))
    img[:] = palette[rng.integers(len(palette))]
    n_strokes = n_strokes or int(height * width / 1800)
    yy, xx = np.mgrid[0:height, 0:width]
    for _ in range(n_strokes):
        theta = angle + rng.normal(0.0, jitter)
        length = rng.uniform(60, 140)
        half_w = rng.uniform(4, 7)
        cy, cx = rng.uniform(0, height), rng.uniform(0, width)
        dy, dx = np.sin(theta), np.cos(theta)
        r = int(length / 2 + half_w) + 1
        y0, y1 = max(int(cy) - r, 0), min(int(cy) + r + 1, height)
        x0, x1 = max(int(cx) - r, 0), min(int(cx) + r + 1, width)
        if y0 >= y1 or x0 >= x1:
            continue
        py, px = yy[y0:y1, x0:x1] - cy, xx[y0:y1, x0:x1] - cx
        along = np.clip(py * dy + px * dx, -length / 2, length / 2)
        dist = np.hypot(py - along * dy, px - along * dx)
        alpha = np.clip(half_w - dist, 0.0, 1.0)[..., None]
        colour = palette[rng.integers(len(palette))] + rng.normal(0, 0.05, 3)
        img[y0:y1, x0:x1] = (1 - alpha) * img[y0:y1, x0:x1] + alpha * colour
    return np.clip(img, 0.0, 1.0)


def make_texture_corpus(
    out_dir,
    n_per_class: int = 20,
    seed: int = 0,
    size=(600, 640),
    contrast_label: str = "imitation",
) -> List[PaintingRecord]:
    """Write PNG paintings plus ``manifest.csv`` into ``out_dir``; return the records."""
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    palette = rng.uniform(0.1, 0.9, size=(6, 3))
    records = []
    for label in ("authentic", contrast_label):
        for i in range(n_per_class):
            pid = f"{label[:3]}{i:03d}"
            arr = render_strokes(rng, size[0], size[1], ORIENTATION[label], palette)
            path = out / "images" / f"{pid}.png"
            Image.fromarray(np.rint(arr * 255).astype(np.uint8), mode="RGB").save(path)
            records.append(PaintingRecord(pid, f"images/{pid}.png", label, "synthetic"))
    write_manifest(out / "manifest.csv", records)
    return records


def orientation_score(images: np.ndarray) -> np.ndarray:
    """Vertical minus horizontal gradient energy per image; > 0 means horizontal strokes dominate."""
    gray = np.asarray(images, dtype=np.float64).mean(axis=-1)
    gy = np.diff(gray, axis=-2)
    gx = np.diff(gray, axis=-1)
    return (gy**2).mean(axis=(-2, -1)) - (gx**2).mean(axis=(-2, -1))
