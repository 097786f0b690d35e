"""UNet used for the high-frequency bands and as the ablation substitute for either stage."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .nn import Params
from .tensorad import Tensor, ops

HF_CHANNELS = 9  # LH, HL, HH x RGB


@dataclass(frozen=True)
class UNetConfig:
    channels: int
    depth: int = 3
    base_channels: int = 16
    seed: int = 1

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError(f"depth must be >= 1, got {self.depth}")
        if self.channels < 1 or self.base_channels < 1:
            raise ValueError("channel counts must be positive")

    @property
    def multiple(self) -> int:
        return 2 ** (self.depth - 1)

    def width(self, level: int) -> int:
        return self.base_channels * 2 ** level


@dataclass(frozen=True)
class HfrConfig:
    depth: int = 3
    base_channels: int = 16
    seed: int = 1

    def unet(self) -> UNetConfig:
        return UNetConfig(HF_CHANNELS, self.depth, self.base_channels, self.seed)


def init_unet(cfg: UNetConfig, prefix: str, dtype=np.float32) -> Params:
    rng = np.random.default_rng(cfg.seed)
    params: Params = {}
    cin = cfg.channels
    for level in range(cfg.depth):
        w = cfg.width(level)
        nn.init_conv(params, f"{prefix}.enc{level}.0", cin, w, 3, rng, dtype=dtype)
        nn.init_conv(params, f"{prefix}.enc{level}.1", w, w, 3, rng, dtype=dtype)
        cin = w
    for level in reversed(range(cfg.depth - 1)):
        w = cfg.width(level)
        nn.init_conv(params, f"{prefix}.dec{level}.0", cfg.width(level + 1) + w, w, 3, rng, dtype=dtype)
        nn.init_conv(params, f"{prefix}.dec{level}.1", w, w, 3, rng, dtype=dtype)
    nn.init_conv(params, f"{prefix}.out", cfg.width(0), cfg.channels, 1, rng, zero=True, dtype=dtype)
    return params


def unet_forward(x: Tensor, params: Params, cfg: UNetConfig, prefix: str) -> Tensor:
    if x.shape[1] != cfg.channels:
        raise ValueError(f"UNet {prefix!r} expects {cfg.channels} channels, got {x.shape[1]}")
    nn.check_multiple(x.shape, cfg.multiple, f"UNet {prefix!r}")
    h = x
    skips = []
    for level in range(cfg.depth):
        if level:
            h = ops.avg_pool2d(h, 2)
        h = ops.relu(nn.conv(h, params, f"{prefix}.enc{level}.0"))
        h = ops.relu(nn.conv(h, params, f"{prefix}.enc{level}.1"))
        skips.append(h)
    for level in reversed(range(cfg.depth - 1)):
        h = ops.concat([ops.upsample_nearest(h, 2), skips[level]], axis=1)
        h = ops.relu(nn.conv(h, params, f"{prefix}.dec{level}.0"))
        h = ops.relu(nn.conv(h, params, f"{prefix}.dec{level}.1"))
    return x + nn.conv(h, params, f"{prefix}.out")


def init_hfr(cfg: HfrConfig, dtype=np.float32, prefix: str = "hfr") -> Params:
    return init_unet(cfg.unet(), prefix, dtype)


def hfr_forward(bands_hf: Tensor, params: Params, cfg: HfrConfig, prefix: str = "hfr") -> Tensor:
    """Refine the stacked (N, 9, h, w) high-frequency bands."""
    return unet_forward(bands_hf, params, cfg.unet(), prefix)
