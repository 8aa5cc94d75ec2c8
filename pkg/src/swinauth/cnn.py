"""Small residual CNN used as the convolutional contender in comparisons.

Layout (NHWC throughout)::

    stem conv (stride 2) -> stage 0 blocks
    conv (stride 2) -> stage i blocks          for i >= 1
    relu -> global mean -> linear -> sigmoid

Each block is pre-activation: ``x + conv(relu(norm(conv(relu(norm(x))))))``
when ``use_skip`` is set, so a block whose second conv is zero is the identity.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Dict, Tuple

import numpy as np

from swinauth.errors import ConfigError, DimensionError
from swinauth.swin import standardize
from swinauth.tensor import Tensor, channel_norm, conv2d, linear, relu, sigmoid
from swinauth.tensor.init import he_normal_init


@dataclass(frozen=True)
class BaselineConfig:
    input_size: Tuple[int, int] = (224, 224)
    widths: Tuple[int, ...] = (16, 32, 64)
    blocks: Tuple[int, ...] = (2, 2, 2)
    kernel_size: int = 3
    use_skip: bool = True
    standardize_input: bool = True
    name: str = "baseline-cnn"

    def __post_init__(self):
        size = self.input_size
        if isinstance(size, int):
            size = (size, size)
        object.__setattr__(self, "input_size", tuple(int(s) for s in size))
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        object.__setattr__(self, "blocks", tuple(int(b) for b in self.blocks))
        if not self.widths or len(self.widths) != len(self.blocks):
            raise ConfigError(f"widths {self.widths} and blocks {self.blocks} must have equal length >= 1")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ConfigError("kernel_size must be a positive odd number")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kind"] = "cnn"
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "BaselineConfig":
        d = {k: v for k, v in d.items() if k != "kind"}
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown baseline config keys: {sorted(unknown)}")
        return cls(**d)


def param_shapes(config: BaselineConfig) -> Dict[str, tuple]:
    k = config.kernel_size
    shapes: Dict[str, tuple] = {}
    c_in = 3
    for s, (width, n_blocks) in enumerate(zip(config.widths, config.blocks)):
        name = "stem" if s == 0 else f"stages.{s}.down"
        shapes[f"{name}.weight"] = (k, k, c_in, width)
        shapes[f"{name}.bias"] = (width,)
        for b in range(n_blocks):
            prefix = f"stages.{s}.blocks.{b}"
            for j in (1, 2):
                shapes[f"{prefix}.norm{j}.gamma"] = (width,)
                shapes[f"{prefix}.norm{j}.beta"] = (width,)
                shapes[f"{prefix}.conv{j}.weight"] = (k, k, width, width)
                shapes[f"{prefix}.conv{j}.bias"] = (width,)
        c_in = width
    shapes["head.weight"] = (c_in, 1)
    shapes["head.bias"] = (1,)
    return shapes


def count_parameters(config: BaselineConfig) -> int:
    return int(sum(np.prod(s) for s in param_shapes(config).values()))


def init_params(config: BaselineConfig, seed: int | np.random.Generator = 0, dtype=np.float32) -> Dict[str, Tensor]:
    """He-normal convolution and head weights, unit norms, zero biases."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    params = {}
    for name, shape in param_shapes(config).items():
        if name.endswith(".gamma"):
            value = np.ones(shape)
        elif name.endswith((".bias", ".beta")):
            value = np.zeros(shape)
        else:
            fan_in = int(np.prod(shape[:-1]))
            value = he_normal_init(fan_in, rng, shape)
        params[name] = Tensor(value.astype(dtype), requires_grad=True, dtype=dtype, name=name)
    return params


def residual_block(x: Tensor, params: Dict[str, Tensor], prefix: str, pad: int, use_skip: bool) -> Tensor:
    h = relu(channel_norm(x, params[f"{prefix}.norm1.gamma"], params[f"{prefix}.norm1.beta"]))
    h = conv2d(h, params[f"{prefix}.conv1.weight"], params[f"{prefix}.conv1.bias"], padding=pad)
    h = relu(channel_norm(h, params[f"{prefix}.norm2.gamma"], params[f"{prefix}.norm2.beta"]))
    h = conv2d(h, params[f"{prefix}.conv2.weight"], params[f"{prefix}.conv2.bias"], padding=pad)
    return x + h if use_skip else h


def features(images, config: BaselineConfig, params: Dict[str, Tensor], stages: list | None = None) -> Tensor:
    x = images if isinstance(images, Tensor) else Tensor(images)
    if x.ndim == 3:
        x = x.reshape(1, *x.shape)
    if tuple(x.shape[1:3]) != config.input_size or x.shape[3] != 3:
        raise DimensionError(f"images of shape {x.shape[1:]} do not match config input {config.input_size}x3")
    if config.standardize_input:
        x = standardize(x)
    pad = config.kernel_size // 2
    for s, n_blocks in enumerate(config.blocks):
        name = "stem" if s == 0 else f"stages.{s}.down"
        x = conv2d(x, params[f"{name}.weight"], params[f"{name}.bias"], stride=2, padding=pad)
        for b in range(n_blocks):
            x = residual_block(x, params, f"stages.{s}.blocks.{b}", pad, config.use_skip)
        if stages is not None:
            stages.append(x)
    return relu(x).mean(axis=(1, 2))


def baseline_forward(images, config: BaselineConfig, params: Dict[str, Tensor], stages: list | None = None) -> Tensor:
    """Authenticity score in (0, 1) per image, shape (B,)."""
    pooled = features(images, config, params, stages)
    logit = linear(pooled, params["head.weight"], params["head.bias"])
    return sigmoid(logit.reshape(-1))


forward = baseline_forward
