"""Named model presets behind one small interface."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Union

from swinauth import cnn, swin
from swinauth.cnn import BaselineConfig
from swinauth.errors import ConfigError
from swinauth.swin import SwinConfig

PRESETS: Dict[str, Union[SwinConfig, BaselineConfig]] = {
    "swin-tiny": SwinConfig.tiny(),
    "swin-base": SwinConfig.base(),
    "baseline-cnn": BaselineConfig(),
    # desk-scale variants used by the sanity campaign
    "swin-toy": SwinConfig(
        input_size=(64, 64), embed_dim=24, depths=(1, 1, 2, 1), num_heads=(1, 2, 4, 8), window_size=4, name="swin-toy"
    ),
    "cnn-toy": BaselineConfig(input_size=(64, 64), name="cnn-toy"),
}


@dataclass(frozen=True)
class Architecture:
    config: Union[SwinConfig, BaselineConfig]

    @property
    def name(self) -> str:
        return self.config.name

    @property
    def kind(self) -> str:
        return "swin" if isinstance(self.config, SwinConfig) else "cnn"

    @property
    def input_size(self):
        return self.config.input_size

    @property
    def module(self):
        return swin if self.kind == "swin" else cnn

    def init(self, seed):
        return self.module.init_params(self.config, seed)

    def forward(self, images, params):
        return self.module.forward(images, self.config, params)

    def n_params(self) -> int:
        return self.module.count_parameters(self.config)

    def to_dict(self) -> dict:
        return self.config.to_dict()


def build_architecture(arch) -> Architecture:
    """Resolve a preset name, a config object, or a dict with ``kind`` (and optional ``preset``)."""
    if isinstance(arch, Architecture):
        return arch
    if isinstance(arch, (SwinConfig, BaselineConfig)):
        return Architecture(arch)
    if isinstance(arch, str):
        if arch not in PRESETS:
            raise ConfigError(f"unknown architecture {arch!r}; presets: {sorted(PRESETS)}")
        return Architecture(PRESETS[arch])
    if isinstance(arch, dict):
        arch = dict(arch)
        preset = arch.pop("preset", None)
        if preset is not None:
            base = build_architecture(preset).config.to_dict()
            base.update(arch)
            arch = base
        kind = arch.get("kind")
        if kind == "swin":
            return Architecture(SwinConfig.from_dict(arch))
        if kind == "cnn":
            return Architecture(BaselineConfig.from_dict(arch))
        raise ConfigError(f"architecture dict needs kind 'swin' or 'cnn', got {kind!r}")
    raise ConfigError(f"cannot build an architecture from {type(arch).__name__}")
