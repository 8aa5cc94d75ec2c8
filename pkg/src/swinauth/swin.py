"""Swin Transformer backbone with a single-neuron authenticity head.

Token maps are NHWC arrays ``(batch, h, w, channels)``; every flattening
step (patch pixels, window tokens, 2x2 merge quads) is row-major so stored
weights are portable.

Stage layout::

    patch embed [-> layer norm] -> pair x depths[0]
    merge -> pair x depths[1]
    merge -> pair x depths[2]      (the "N" of the Tiny/Base variants)
    merge -> pair x depths[3]
    layer norm -> mean over tokens -> linear(8C -> 1) -> sigmoid
"""

from __future__ import annotations

import contextlib
import json
from dataclasses import asdict, dataclass
from typing import Dict, Iterator, Optional, Tuple

import numpy as np

from swinauth.errors import ConfigError, DimensionError
from swinauth.tensor import Tensor, gelu, layer_norm, linear, roll, sigmoid, softmax
from swinauth.tensor.init import he_normal_init, truncated_normal

PATCH = 4
# per-channel standardisation applied to unit-interval pixels (ImageNet statistics)
INPUT_MEAN = (0.485, 0.456, 0.406)
INPUT_STD = (0.229, 0.224, 0.225)
MASK_VALUE = -1e9
INIT_STD = 0.02

_faults = {"mask": False}


@contextlib.contextmanager
def inject_mask_fault() -> Iterator[None]:
    """Test hook: shifted-window masks come back all-zero while active."""
    _faults["mask"] = True
    try:
        yield
    finally:
        _faults["mask"] = False


@dataclass(frozen=True)
class SwinConfig:
    input_size: Tuple[int, int] = (224, 224)
    embed_dim: int = 96
    depths: Tuple[int, ...] = (1, 1, 3, 1)
    num_heads: Tuple[int, ...] = (3, 6, 12, 24)
    window_size: int = 7
    mlp_ratio: float = 4.0
    relative_position_bias: bool = True
    patch_norm: bool = True
    merge_norm: bool = True
    standardize_input: bool = True
    name: str = "swin-tiny"

    def __post_init__(self):
        size = self.input_size
        if isinstance(size, int):
            size = (size, size)
        object.__setattr__(self, "input_size", tuple(int(s) for s in size))
        object.__setattr__(self, "depths", tuple(int(d) for d in self.depths))
        object.__setattr__(self, "num_heads", tuple(int(h) for h in self.num_heads))
        if len(self.depths) != len(self.num_heads) or not self.depths:
            raise ConfigError(f"depths {self.depths} and num_heads {self.num_heads} must have equal nonzero length")
        if self.window_size < 1 or self.embed_dim < 1:
            raise ConfigError("window_size and embed_dim must be positive")
        scale = PATCH * 2 ** (len(self.depths) - 1)
        for extent in self.input_size:
            if extent % scale:
                raise ConfigError(f"input extent {extent} must be divisible by {scale} for {len(self.depths)} stages")
        for stage in range(len(self.depths)):
            dim = self.stage_dim(stage)
            if dim % self.num_heads[stage]:
                raise ConfigError(f"stage {stage}: {dim} channels not divisible by {self.num_heads[stage]} heads")
            grid = self.stage_grid(stage)
            m = self.stage_window(stage)
            if grid[0] % m or grid[1] % m:
                raise ConfigError(f"stage {stage}: token grid {grid} not divisible by window {m}")

    @property
    def stage3_pairs(self) -> int:
        return self.depths[2] if len(self.depths) > 2 else 0

    @property
    def num_features(self) -> int:
        return self.stage_dim(len(self.depths) - 1)

    def stage_dim(self, stage: int) -> int:
        return self.embed_dim * 2**stage

    def stage_grid(self, stage: int) -> Tuple[int, int]:
        f = PATCH * 2**stage
        return self.input_size[0] // f, self.input_size[1] // f

    def stage_window(self, stage: int) -> int:
        # a window never exceeds the token grid; a grid that fits in one window is not shifted
        return min(self.window_size, *self.stage_grid(stage))

    def stage_shift(self, stage: int) -> int:
        if min(self.stage_grid(stage)) <= self.window_size:
            return 0
        return self.window_size // 2

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = "swin"
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "SwinConfig":
        d = {k: v for k, v in d.items() if k != "kind"}
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown Swin config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def tiny(cls, **overrides) -> "SwinConfig":
        return cls(**{"embed_dim": 96, "depths": (1, 1, 3, 1), "num_heads": (3, 6, 12, 24), "name": "swin-tiny", **overrides})

    @classmethod
    def base(cls, **overrides) -> "SwinConfig":
        return cls(**{"embed_dim": 128, "depths": (1, 1, 9, 1), "num_heads": (4, 8, 16, 32), "name": "swin-base", **overrides})


# -- parameter layout ---------------------------------------------------------


def _block_shapes(prefix: str, dim: int, heads: int, window: int, mlp_ratio: float, rel_bias: bool) -> dict:
    hidden = int(dim * mlp_ratio)
    shapes = {
        f"{prefix}.norm1.gamma": (dim,),
        f"{prefix}.norm1.beta": (dim,),
        f"{prefix}.attn.qkv.weight": (dim, 3 * dim),
        f"{prefix}.attn.qkv.bias": (3 * dim,),
    }
    if rel_bias:
        shapes[f"{prefix}.attn.rel_bias"] = ((2 * window - 1) ** 2, heads)
    shapes.update(
        {
            f"{prefix}.attn.proj.weight": (dim, dim),
            f"{prefix}.attn.proj.bias": (dim,),
            f"{prefix}.norm2.gamma": (dim,),
            f"{prefix}.norm2.beta": (dim,),
            f"{prefix}.mlp.fc1.weight": (dim, hidden),
            f"{prefix}.mlp.fc1.bias": (hidden,),
            f"{prefix}.mlp.fc2.weight": (hidden, dim),
            f"{prefix}.mlp.fc2.bias": (dim,),
        }
    )
    return shapes


def param_shapes(config: SwinConfig) -> Dict[str, tuple]:
    """Name -> shape for every learnable tensor, in a fixed order."""
    c = config.embed_dim
    shapes: Dict[str, tuple] = {
        "patch_embed.weight": (PATCH * PATCH * 3, c),
        "patch_embed.bias": (c,),
    }
    if config.patch_norm:
        shapes["patch_embed.norm.gamma"] = (c,)
        shapes["patch_embed.norm.beta"] = (c,)
    for s, depth in enumerate(config.depths):
        dim = config.stage_dim(s)
        if s > 0:
            if config.merge_norm:
                shapes[f"stages.{s}.merge.norm.gamma"] = (2 * dim,)
                shapes[f"stages.{s}.merge.norm.beta"] = (2 * dim,)
            shapes[f"stages.{s}.merge.weight"] = (2 * dim, dim)
        for p in range(depth):
            for b in range(2):
                shapes.update(
                    _block_shapes(
                        f"stages.{s}.pairs.{p}.blocks.{b}",
                        dim,
                        config.num_heads[s],
                        config.stage_window(s),
                        config.mlp_ratio,
                        config.relative_position_bias,
                    )
                )
    nf = config.num_features
    shapes["norm.gamma"] = (nf,)
    shapes["norm.beta"] = (nf,)
    shapes["head.weight"] = (nf, 1)
    shapes["head.bias"] = (1,)
    return shapes


def count_parameters(config: SwinConfig) -> int:
    return int(sum(np.prod(shape) for shape in param_shapes(config).values()))


def init_params(config: SwinConfig, seed: int | np.random.Generator = 0, dtype=np.float32) -> Dict[str, Tensor]:
    """Fresh weights: truncated normal(0.02) for projections, He normal for the head."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    params = {}
    for name, shape in param_shapes(config).items():
        if name == "head.weight":
            value = he_normal_init(shape[0], rng, shape)
        elif name.endswith(".gamma"):
            value = np.ones(shape)
        elif name.endswith((".bias", ".beta")):
            value = np.zeros(shape)
        else:
            value = truncated_normal(rng, shape, INIT_STD)
        params[name] = Tensor(value.astype(dtype), requires_grad=True, dtype=dtype, name=name)
    return params


# -- token map operations ------------------------------------------------------


def standardize(images: Tensor) -> Tensor:
    mean = np.asarray(INPUT_MEAN, dtype=images.dtype)
    inv_std = 1.0 / np.asarray(INPUT_STD, dtype=images.dtype)
    return (images - mean) * inv_std


def patch_embed(images: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """(B, H, W, 3) pixels -> (B, H/4, W/4, C) tokens; each 4x4x3 block is flattened row-major."""
    b, h, w, ch = images.shape
    if h % PATCH or w % PATCH:
        raise DimensionError(f"image {h}x{w} is not divisible into {PATCH}x{PATCH} patches")
    x = images.reshape(b, h // PATCH, PATCH, w // PATCH, PATCH, ch)
    x = x.transpose(0, 1, 3, 2, 4, 5).reshape(b, h // PATCH, w // PATCH, PATCH * PATCH * ch)
    return linear(x, weight, bias)


def window_partition(t: Tensor, m: int) -> Tensor:
    """(B, h, w, d) -> (B * nW, m*m, d); windows in row-major order, tokens row-major inside."""
    b, h, w, d = t.shape
    if h % m or w % m:
        raise DimensionError(f"token grid {h}x{w} not divisible by window {m}")
    x = t.reshape(b, h // m, m, w // m, m, d).transpose(0, 1, 3, 2, 4, 5)
    return x.reshape(b * (h // m) * (w // m), m * m, d)


def window_reverse(windows: Tensor, m: int, h: int, w: int) -> Tensor:
    d = windows.shape[-1]
    b = windows.shape[0] // ((h // m) * (w // m))
    x = windows.reshape(b, h // m, w // m, m, m, d).transpose(0, 1, 3, 2, 4, 5)
    return x.reshape(b, h, w, d)


def region_ids(h: int, w: int, m: int, shift: int) -> np.ndarray:
    """Label each cyclically shifted grid cell with the contiguous region it came from."""
    ids = np.zeros((h, w), dtype=np.int64)
    bounds_h = (slice(0, h - m), slice(h - m, h - shift), slice(h - shift, h))
    bounds_w = (slice(0, w - m), slice(w - m, w - shift), slice(w - shift, w))
    label = 0
    for sh in bounds_h:
        for sw in bounds_w:
            ids[sh, sw] = label
            label += 1
    return ids


def attention_mask(h: int, w: int, m: int, shift: int) -> np.ndarray:
    """Additive (nW, m*m, m*m) mask: 0 within a region, ``MASK_VALUE`` across regions."""
    n_windows = (h // m) * (w // m)
    if shift == 0 or _faults["mask"]:
        return np.zeros((n_windows, m * m, m * m))
    ids = region_ids(h, w, m, shift)
    win = ids.reshape(h // m, m, w // m, m).transpose(0, 2, 1, 3).reshape(n_windows, m * m)
    return np.where(win[:, :, None] != win[:, None, :], MASK_VALUE, 0.0)


def relative_position_index(m: int) -> np.ndarray:
    """(m*m, m*m) index into a ((2m-1)**2)-row bias table."""
    coords = np.stack(np.meshgrid(np.arange(m), np.arange(m), indexing="ij")).reshape(2, -1)
    rel = coords[:, :, None] - coords[:, None, :] + (m - 1)
    return rel[0] * (2 * m - 1) + rel[1]


def window_attention(
    windows: Tensor,
    params: Dict[str, Tensor],
    prefix: str,
    heads: int,
    mask: Optional[np.ndarray] = None,
    attn_out: Optional[list] = None,
) -> Tensor:
    """Multi-head self-attention inside each window.

    ``windows`` is (B * nW, n, d) with ``n`` a square token count; ``mask``
    is an additive (nW, n, n) array or None. Post-softmax weights of shape
    (B * nW, heads, n, n) are appended to ``attn_out`` when it is given.
    """
    bw, n, d = windows.shape
    if d % heads:
        raise ConfigError(f"{d} channels not divisible by {heads} heads")
    hd = d // heads
    qkv = linear(windows, params[f"{prefix}.qkv.weight"], params[f"{prefix}.qkv.bias"])
    qkv = qkv.reshape(bw, n, 3, heads, hd).transpose(2, 0, 3, 1, 4)
    q, k, v = qkv[0], qkv[1], qkv[2]
    scores = (q * (hd**-0.5)) @ k.swapaxes(-1, -2)
    table = params.get(f"{prefix}.rel_bias")
    if table is not None:
        m = int(round(n**0.5))
        index = relative_position_index(m).reshape(-1)
        bias = table[index].reshape(n, n, heads).transpose(2, 0, 1)
        scores = scores + bias
    if mask is not None:
        nw = mask.shape[0]
        scores = scores.reshape(bw // nw, nw, heads, n, n) + mask[None, :, None].astype(scores.dtype)
        scores = scores.reshape(bw, heads, n, n)
    attn = softmax(scores, axis=-1)
    if attn_out is not None:
        attn_out.append(attn.data)
    out = (attn @ v).transpose(0, 2, 1, 3).reshape(bw, n, d)
    return linear(out, params[f"{prefix}.proj.weight"], params[f"{prefix}.proj.bias"])


def shifted_window_attention(
    t: Tensor,
    params: Dict[str, Tensor],
    prefix: str,
    heads: int,
    window: int,
    shift: int,
    attn_out: Optional[list] = None,
) -> Tensor:
    """Windowed attention on a (B, h, w, d) map, windows displaced by ``shift`` tokens."""
    b, h, w, d = t.shape
    if shift:
        t = roll(t, (-shift, -shift), (1, 2))
    windows = window_partition(t, window)
    mask = attention_mask(h, w, window, shift) if shift else None
    out = window_attention(windows, params, prefix, heads, mask, attn_out)
    out = window_reverse(out, window, h, w)
    if shift:
        out = roll(out, (shift, shift), (1, 2))
    return out


def swin_block(t: Tensor, params: Dict[str, Tensor], prefix: str, heads: int, window: int, shift: int) -> Tensor:
    h = layer_norm(t, params[f"{prefix}.norm1.gamma"], params[f"{prefix}.norm1.beta"])
    t = t + shifted_window_attention(h, params, f"{prefix}.attn", heads, window, shift)
    h = layer_norm(t, params[f"{prefix}.norm2.gamma"], params[f"{prefix}.norm2.beta"])
    h = gelu(linear(h, params[f"{prefix}.mlp.fc1.weight"], params[f"{prefix}.mlp.fc1.bias"]))
    return t + linear(h, params[f"{prefix}.mlp.fc2.weight"], params[f"{prefix}.mlp.fc2.bias"])


def swin_pair(t: Tensor, params: Dict[str, Tensor], prefix: str, heads: int, window: int, shift: int) -> Tensor:
    """Regular-window block followed by a shifted-window block."""
    t = swin_block(t, params, f"{prefix}.blocks.0", heads, window, 0)
    return swin_block(t, params, f"{prefix}.blocks.1", heads, window, shift)


def merge_quads(t: Tensor) -> Tensor:
    """(B, h, w, d) -> (B, h/2, w/2, 4d); each 2x2 quad concatenated row-major."""
    b, h, w, d = t.shape
    if h % 2 or w % 2:
        raise DimensionError(f"patch merging needs even token grid, got {h}x{w}")
    return t.reshape(b, h // 2, 2, w // 2, 2, d).transpose(0, 1, 3, 2, 4, 5).reshape(b, h // 2, w // 2, 4 * d)


def patch_merge(t: Tensor, weight: Tensor, norm: Optional[Tuple[Tensor, Tensor]] = None) -> Tensor:
    """(B, h, w, d) -> (B, h/2, w/2, 2d): concatenate quads, optionally layer-normalise, project 4d -> 2d."""
    x = merge_quads(t)
    if norm is not None:
        x = layer_norm(x, *norm)
    return linear(x, weight)


def features(images, config: SwinConfig, params: Dict[str, Tensor], stages: Optional[list] = None) -> Tensor:
    """Pooled, normalised feature vector per image, shape (B, 8C).

    When ``stages`` is a list, each stage's output token map is appended to it.
    """
    x = images if isinstance(images, Tensor) else Tensor(images)
    if x.ndim == 3:
        x = x.reshape(1, *x.shape)
    if tuple(x.shape[1:3]) != config.input_size or x.shape[3] != 3:
        raise DimensionError(f"images of shape {x.shape[1:]} do not match config input {config.input_size}x3")
    if config.standardize_input:
        x = standardize(x)
    t = patch_embed(x, params["patch_embed.weight"], params["patch_embed.bias"])
    if config.patch_norm:
        t = layer_norm(t, params["patch_embed.norm.gamma"], params["patch_embed.norm.beta"])
    for s, depth in enumerate(config.depths):
        if s > 0:
            norm = None
            if config.merge_norm:
                norm = (params[f"stages.{s}.merge.norm.gamma"], params[f"stages.{s}.merge.norm.beta"])
            t = patch_merge(t, params[f"stages.{s}.merge.weight"], norm)
        window, shift = config.stage_window(s), config.stage_shift(s)
        for p in range(depth):
            t = swin_pair(t, params, f"stages.{s}.pairs.{p}", config.num_heads[s], window, shift)
        if stages is not None:
            stages.append(t)
    t = layer_norm(t, params["norm.gamma"], params["norm.beta"])
    return t.mean(axis=(1, 2))


def forward(images, config: SwinConfig, params: Dict[str, Tensor], stages: Optional[list] = None) -> Tensor:
    """Authenticity score in (0, 1) per image, shape (B,)."""
    pooled = features(images, config, params, stages)
    logit = linear(pooled, params["head.weight"], params["head.bias"])
    return sigmoid(logit.reshape(-1))
