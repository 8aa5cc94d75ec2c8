"""Corpus manifests and the on-disk patch cache."""

from __future__ import annotations

import csv
import io
import logging
import os
import re
import shutil
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional

import numpy as np
from PIL import Image

from swinauth.data.patches import extract_patches, load_image
from swinauth.errors import IngestionError, UsageError

logger = logging.getLogger(__name__)

LABELS = ("authentic", "imitation", "proxy")
MANIFEST_COLUMNS = ("painting_id", "path", "label", "note")
INDEX_COLUMNS = ("painting_id", "patch_index", "kind", "label", "file")
INDEX_NAME = "index.csv"
_SAFE_ID = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._-]*$")


@dataclass(frozen=True)
class PaintingRecord:
    painting_id: str
    path: str
    label: str
    note: str = ""

    @property
    def is_authentic(self) -> bool:
        return self.label == "authentic"


@dataclass(frozen=True)
class PatchRecord:
    painting_id: str
    patch_index: int
    kind: str
    label: str
    file: str
    weight: float = 1.0


def _sniff_delimiter(header: str) -> str:
    return "\t" if "\t" in header else ","


def read_manifest(path) -> List[PaintingRecord]:
    """Parse a ``painting_id, path, label, note`` table; relative paths resolve against the manifest."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IngestionError(f"cannot read manifest ({exc})", path) from exc
    lines = text.splitlines()
    if not lines:
        raise IngestionError("empty manifest", path)
    reader = csv.DictReader(io.StringIO(text), delimiter=_sniff_delimiter(lines[0]), skipinitialspace=True)
    fields = [f.strip() for f in (reader.fieldnames or [])]
    if tuple(fields[:3]) != MANIFEST_COLUMNS[:3]:
        raise IngestionError(f"manifest header must start with {', '.join(MANIFEST_COLUMNS)}; got {fields}", path)
    reader.fieldnames = fields
    records, seen = [], set()
    for lineno, row in enumerate(reader, start=2):
        pid = (row.get("painting_id") or "").strip()
        label = (row.get("label") or "").strip().lower()
        image = (row.get("path") or "").strip()
        if not _SAFE_ID.match(pid):
            raise IngestionError(f"line {lineno}: invalid painting id {pid!r}", path)
        if pid in seen:
            raise IngestionError(f"line {lineno}: duplicate painting id {pid!r}", path)
        if label not in LABELS:
            raise IngestionError(f"line {lineno}: label {label!r} not one of {LABELS}", path)
        if not image:
            raise IngestionError(f"line {lineno}: missing image path", path)
        seen.add(pid)
        resolved = Path(image) if os.path.isabs(image) else path.parent / image
        records.append(PaintingRecord(pid, str(resolved), label, (row.get("note") or "").strip()))
    return records


def write_manifest(path, records: Iterable[PaintingRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_COLUMNS)
        for r in records:
            writer.writerow([r.painting_id, r.path, r.label, r.note])


def label_counts(records: Iterable[PaintingRecord]) -> Dict[str, int]:
    counts = Counter(r.label for r in records)
    return {label: counts.get(label, 0) for label in LABELS}


# -- patch cache ---------------------------------------------------------------


def _save_png(path: Path, pixels: np.ndarray) -> None:
    arr = np.clip(np.rint(pixels * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(arr, mode="RGB").save(path, format="PNG")


def prepare_cache(records: List[PaintingRecord], out_dir, force: bool = False) -> dict:
    """Extract sub-images for every painting into ``out_dir``.

    Lays out one directory per painting holding lossless PNG patches, plus
    ``index.csv``. Ingestion failures are collected, not raised; the returned
    summary lists them under ``"failures"`` as (path, message) pairs.
    """
    out = Path(out_dir)
    if (out / INDEX_NAME).exists():
        if not force:
            raise UsageError(f"patch cache already exists at {out}; pass --force to overwrite")
        shutil.rmtree(out)
    out.mkdir(parents=True, exist_ok=True)
    rows, failures = [], []
    per_class = Counter()
    for record in records:
        try:
            image = load_image(record.path)
            patches = extract_patches(image)
        except IngestionError as exc:
            failures.append((record.path, str(exc)))
            logger.info("%s", exc)
            continue
        pdir = out / record.painting_id
        pdir.mkdir(exist_ok=True)
        for patch in patches:
            rel = f"{record.painting_id}/patch_{patch.index:02d}.png"
            _save_png(out / rel, patch.pixels)
            rows.append((record.painting_id, patch.index, patch.kind, record.label, rel))
        per_class[record.label] += len(patches)
    tmp = out / (INDEX_NAME + ".tmp")
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(INDEX_COLUMNS)
        writer.writerows(rows)
    os.replace(tmp, out / INDEX_NAME)
    return {
        "paintings": len({r[0] for r in rows}),
        "patches": len(rows),
        "patches_per_class": {label: per_class.get(label, 0) for label in LABELS},
        "failures": failures,
    }


def read_cache_index(cache_dir) -> List[PatchRecord]:
    cache = Path(cache_dir)
    index = cache / INDEX_NAME
    if not index.exists():
        raise IngestionError("no patch cache index found; run `swinauth prepare` first", index)
    with open(index, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        return [
            PatchRecord(row["painting_id"], int(row["patch_index"]), row["kind"], row["label"], row["file"])
            for row in reader
        ]


def load_patch(cache_dir, record: PatchRecord) -> np.ndarray:
    path = Path(cache_dir) / record.file
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0


def cache_labels(records: Iterable[PatchRecord]) -> Dict[str, str]:
    return {r.painting_id: r.label for r in records}


def default_cache_dir() -> Optional[str]:
    return os.environ.get("SWINAUTH_CACHE")
