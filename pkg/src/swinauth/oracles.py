"""Slow reference computations used to verify the fast paths.

Nothing here shares code with the vectorised implementations it checks:
shifted windows are materialised directly on the unshifted grid, one token
group at a time, with explicit loops.
"""

from __future__ import annotations

from typing import Dict

import numpy as np


def natural_groups(n: int, m: int, shift: int) -> np.ndarray:
    """Window group of each coordinate when the tiling starts ``shift`` tokens in.

    Coordinates before the first boundary form their own (partial) group.
    """
    a = np.arange(n)
    return np.floor_divide(a - shift, m) if shift else a // m


def window_slot_coords(h: int, w: int, m: int, shift: int) -> np.ndarray:
    """(nW, m*m, 2) original-grid coordinates held by each slot of each cyclic window."""
    coords = []
    for wi in range(h // m):
        for wj in range(w // m):
            slots = []
            for i in range(m):
                for j in range(m):
                    slots.append(((wi * m + i + shift) % h, (wj * m + j + shift) % w))
            coords.append(slots)
    return np.asarray(coords)


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def shifted_attention_oracle(
    x: np.ndarray,
    params: Dict[str, np.ndarray],
    prefix: str,
    heads: int,
    m: int,
    shift: int,
) -> np.ndarray:
    """Attention restricted to natural shifted-window groups, in float64.

    Each token attends only to tokens sharing both its row group and its
    column group; relative-position bias is looked up from the offset of
    the two tokens on the original grid.
    """
    x = np.asarray(x, dtype=np.float64)
    b, h, w, d = x.shape
    hd = d // heads
    wq = np.asarray(params[f"{prefix}.qkv.weight"], dtype=np.float64)
    bq = np.asarray(params[f"{prefix}.qkv.bias"], dtype=np.float64)
    wp = np.asarray(params[f"{prefix}.proj.weight"], dtype=np.float64)
    bp = np.asarray(params[f"{prefix}.proj.bias"], dtype=np.float64)
    table = params.get(f"{prefix}.rel_bias")
    table = None if table is None else np.asarray(table, dtype=np.float64)
    gr, gc = natural_groups(h, m, shift), natural_groups(w, m, shift)
    out = np.zeros_like(x)
    for n in range(b):
        for g_row in np.unique(gr):
            for g_col in np.unique(gc):
                rows = np.flatnonzero(gr == g_row)
                cols = np.flatnonzero(gc == g_col)
                pos = [(r, c) for r in rows for c in cols]
                tokens = np.stack([x[n, r, c] for r, c in pos])
                qkv = tokens @ wq + bq
                heads_out = []
                for hh in range(heads):
                    q = qkv[:, hh * hd : (hh + 1) * hd]
                    k = qkv[:, d + hh * hd : d + (hh + 1) * hd]
                    v = qkv[:, 2 * d + hh * hd : 2 * d + (hh + 1) * hd]
                    logits = (q @ k.T) / np.sqrt(hd)
                    if table is not None:
                        for i, (ri, ci) in enumerate(pos):
                            for j, (rj, cj) in enumerate(pos):
                                idx = (ri - rj + m - 1) * (2 * m - 1) + (ci - cj + m - 1)
                                logits[i, j] += table[idx, hh]
                    heads_out.append(_softmax(logits) @ v)
                y = np.concatenate(heads_out, axis=1) @ wp + bp
                for i, (r, c) in enumerate(pos):
                    out[n, r, c] = y[i]
    return out


def cross_region_mass(attn: np.ndarray, h: int, w: int, m: int, shift: int, batch: int) -> float:
    """Largest total post-softmax weight any row puts on tokens outside its natural group.

    ``attn`` is (batch * nW, heads, m*m, m*m) as captured from the cyclic path.
    """
    coords = window_slot_coords(h, w, m, shift)
    gr, gc = natural_groups(h, m, shift), natural_groups(w, m, shift)
    group = gr[coords[..., 0]] * 100003 + gc[coords[..., 1]]  # (nW, n)
    foreign = group[:, :, None] != group[:, None, :]
    nw = coords.shape[0]
    a = attn.reshape(batch, nw, attn.shape[1], attn.shape[2], attn.shape[3])
    mass = (a * foreign[None, :, None]).sum(axis=-1)
    return float(mass.max()) if mass.size else 0.0
