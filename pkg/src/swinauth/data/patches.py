"""Sub-image extraction: a 2^p x 2^p grid of equal units plus one centre crop."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import List

import numpy as np
from PIL import Image, UnidentifiedImageError

from swinauth.data.resample import resample_bicubic
from swinauth.errors import IngestionError

PATCH_SIZE = 256

Image.MAX_IMAGE_PIXELS = None


@dataclass
class Patch:
    index: int
    kind: str  # "grid" or "center_crop"
    pixels: np.ndarray  # (256, 256, 3) float32 in [0, 1]
    box: tuple  # (top, left, height, width) in source pixels


def grid_exponent(min_side: int) -> int:
    """p = 2 above 1024 px, 1 above 512 px, else 0 (centre crop only)."""
    if min_side < 1:
        raise ValueError(f"min_side must be >= 1, got {min_side}")
    if min_side > 1024:
        return 2
    if min_side > 512:
        return 1
    return 0


def patch_count(p: int) -> int:
    return 4**p + 1 if p > 0 else 1


def load_image(path) -> np.ndarray:
    """Decode to (H, W, 3) float32 with channel values in [0, 1]."""
    path = Path(path)
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
    except (OSError, UnidentifiedImageError, ValueError, SyntaxError) as exc:
        raise IngestionError(f"cannot decode image ({exc})", path) from exc
    if arr.ndim != 3 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise IngestionError(f"degenerate image of shape {arr.shape}", path)
    return arr


def _to_patch(image: np.ndarray, top: int, left: int, height: int, width: int, size: int) -> np.ndarray:
    unit = image[top : top + height, left : left + width]
    out = resample_bicubic(unit, size, size)
    return np.clip(out, 0.0, 1.0).astype(np.float32)


def extract_patches(image: np.ndarray, p: int | None = None, size: int = PATCH_SIZE) -> List[Patch]:
    """Split ``image`` into sub-images resized to ``size`` x ``size``.

    Grid units are the 2^p x 2^p equal rectangles covering the image
    (row-major, indices 0 .. 4^p - 1); a remainder of fewer than 2^p pixels
    is trimmed symmetrically. The centred largest square comes last. For
    p = 0 only the centre crop is produced.
    """
    h, w = image.shape[:2]
    if h < 1 or w < 1:
        raise IngestionError(f"degenerate image of shape {image.shape}")
    if p is None:
        p = grid_exponent(min(h, w))
    patches = []
    if p > 0:
        n = 2**p
        uh, uw = h // n, w // n
        if uh < 1 or uw < 1:
            raise IngestionError(f"image {h}x{w} too small for a {n}x{n} grid")
        top0, left0 = (h - n * uh) // 2, (w - n * uw) // 2
        for r in range(n):
            for c in range(n):
                box = (top0 + r * uh, left0 + c * uw, uh, uw)
                patches.append(Patch(len(patches), "grid", _to_patch(image, *box, size), box))
    side = min(h, w)
    box = ((h - side) // 2, (w - side) // 2, side, side)
    patches.append(Patch(len(patches), "center_crop", _to_patch(image, *box, size), box))
    return patches
