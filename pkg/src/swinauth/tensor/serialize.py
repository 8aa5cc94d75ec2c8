"""Flat binary weight container.

Layout (all integers little-endian uint64 unless noted)::

    magic      8 bytes  b"SWAWGT\\x00\\x01"
    version    uint32
    count      number of entries
    per entry:
      name_len, name (UTF-8 bytes)
      rank, extents[rank]
      data       float32 little-endian, row-major, prod(extents) values
"""

from __future__ import annotations

import io
import os
import struct
import tempfile
from pathlib import Path
from typing import Mapping

import numpy as np

from swinauth.errors import WeightsError

MAGIC = b"SWAWGT\x00\x01"
VERSION = 1
_U64 = struct.Struct("<Q")
_U32 = struct.Struct("<I")


def dumps(arrays: Mapping[str, np.ndarray]) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(_U32.pack(VERSION))
    buf.write(_U64.pack(len(arrays)))
    for name, value in arrays.items():
        value = np.asarray(getattr(value, "data", value))
        raw = name.encode("utf-8")
        buf.write(_U64.pack(len(raw)))
        buf.write(raw)
        buf.write(_U64.pack(value.ndim))
        for extent in value.shape:
            buf.write(_U64.pack(extent))
        buf.write(np.ascontiguousarray(value, dtype="<f4").tobytes())
    return buf.getvalue()


def loads(blob: bytes) -> dict:
    view = memoryview(blob)
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(view):
            raise WeightsError("weight container is truncated")
        chunk = view[pos : pos + n]
        pos += n
        return chunk

    if bytes(take(len(MAGIC))) != MAGIC:
        raise WeightsError("not a weight container (bad magic)")
    (version,) = _U32.unpack(take(4))
    if version != VERSION:
        raise WeightsError(f"unsupported weight container version {version}")
    (count,) = _U64.unpack(take(8))
    out = {}
    for _ in range(count):
        (name_len,) = _U64.unpack(take(8))
        name = bytes(take(name_len)).decode("utf-8")
        (rank,) = _U64.unpack(take(8))
        shape = tuple(_U64.unpack(take(8))[0] for _ in range(rank))
        n = int(np.prod(shape, dtype=np.int64)) if shape else 1
        out[name] = np.frombuffer(bytes(take(4 * n)), dtype="<f4").reshape(shape).astype(np.float32)
    if pos != len(view):
        raise WeightsError("trailing bytes after last weight entry")
    return out


def atomic_write_bytes(path, payload: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_weights(path, arrays: Mapping[str, np.ndarray]) -> None:
    atomic_write_bytes(path, dumps(arrays))


def load_weights(path) -> dict:
    return loads(Path(path).read_bytes())


def assign_weights(params: Mapping, loaded: Mapping[str, np.ndarray]) -> None:
    """Copy ``loaded`` into ``params`` after checking names and shapes agree exactly."""
    missing = sorted(set(params) - set(loaded))
    extra = sorted(set(loaded) - set(params))
    if missing or extra:
        raise WeightsError(f"weight names disagree: missing={missing[:5]} unexpected={extra[:5]}")
    for name, p in params.items():
        if tuple(p.shape) != tuple(loaded[name].shape):
            raise WeightsError(f"{name}: stored shape {loaded[name].shape} != model shape {p.shape}")
    for name, p in params.items():
        p.data = loaded[name].astype(p.dtype)
