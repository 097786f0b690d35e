"""Detailed parametric refinement: a per-pixel 1x1 network modulated by a global condition vector."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .nn import Params
from .tensorad import Tensor, ops


@dataclass(frozen=True)
class DprConfig:
    refine_layers: int = 3
    refine_channels: int = 64
    cond_dim: int = 32
    encoder_blocks: int = 3
    seed: int = 2

    def __post_init__(self):
        if self.refine_layers < 1:
            raise ValueError(f"refine_layers must be >= 1, got {self.refine_layers}")
        if self.cond_dim < 1 or self.refine_channels < 1 or self.encoder_blocks < 1:
            raise ValueError("cond_dim, refine_channels and encoder_blocks must be positive")


def init_dpr(cfg: DprConfig, dtype=np.float32, prefix: str = "dpr") -> Params:
    rng = np.random.default_rng(cfg.seed)
    params: Params = {}
    width = cfg.cond_dim
    cin = 3
    for i in range(cfg.encoder_blocks):
        nn.init_conv(params, f"{prefix}.encoder.{i}", cin, width, 3, rng, dtype=dtype)
        cin = width
    nn.init_linear(params, f"{prefix}.encoder.fc", width, cfg.cond_dim, rng, dtype=dtype)
    cin = 3
    for i in range(cfg.refine_layers):
        nn.init_conv(params, f"{prefix}.refine.{i}", cin, cfg.refine_channels, 1, rng, dtype=dtype)
        # gamma = 1, beta = 0 whenever the condition vector is zero
        nn.init_linear(params, f"{prefix}.gfm.{i}.gamma", cfg.cond_dim, cfg.refine_channels, rng, bias_value=1.0, dtype=dtype)
        nn.init_linear(params, f"{prefix}.gfm.{i}.beta", cfg.cond_dim, cfg.refine_channels, rng, bias_value=0.0, dtype=dtype)
        cin = cfg.refine_channels
    nn.init_conv(params, f"{prefix}.out", cin, 3, 1, rng, zero=True, dtype=dtype)
    return params


def global_encoder_forward(img: Tensor, params: Params, cfg: DprConfig, prefix: str = "dpr") -> Tensor:
    """(N, 3, H, W) -> (N, cond_dim) condition vector."""
    h, w = img.shape[-2:]
    if min(h, w) < 2 ** cfg.encoder_blocks:
        raise ValueError(f"global encoder needs H, W >= {2 ** cfg.encoder_blocks}, got {h}x{w}")
    x = img
    for i in range(cfg.encoder_blocks):
        x = ops.relu(nn.conv(x, params, f"{prefix}.encoder.{i}"))
        hh, ww = x.shape[-2:]
        if hh % 2 or ww % 2:
            x = x[:, :, : hh - hh % 2, : ww - ww % 2]
        x = ops.avg_pool2d(x, 2)
    return nn.linear(ops.mean(x, axis=(2, 3)), params, f"{prefix}.encoder.fc")


def gfm(x: Tensor, gamma: Tensor, beta: Tensor) -> Tensor:
    """Per-channel scale and shift, broadcast over space, with no normalization."""
    n, c = x.shape[:2]
    if gamma.shape != (n, c) or beta.shape != (n, c):
        raise ValueError(f"gfm: feature map {x.shape} needs gamma/beta of shape {(n, c)}, "
                         f"got {gamma.shape} and {beta.shape}")
    return x * ops.reshape(gamma, (n, c, 1, 1)) + ops.reshape(beta, (n, c, 1, 1))


def pixel_refine_forward(img: Tensor, cond: Tensor, params: Params, cfg: DprConfig, prefix: str = "dpr") -> Tensor:
    if cond.shape != (img.shape[0], cfg.cond_dim):
        raise ValueError(f"condition vector shape {cond.shape} does not match batch {img.shape[0]} x {cfg.cond_dim}")
    x = img
    for i in range(cfg.refine_layers):
        x = nn.conv(x, params, f"{prefix}.refine.{i}")
        gamma = nn.linear(cond, params, f"{prefix}.gfm.{i}.gamma")
        beta = nn.linear(cond, params, f"{prefix}.gfm.{i}.beta")
        x = ops.relu(gfm(x, gamma, beta))
    return img + nn.conv(x, params, f"{prefix}.out")


def dpr_forward(img: Tensor, params: Params, cfg: DprConfig, prefix: str = "dpr") -> Tensor:
    return pixel_refine_forward(img, global_encoder_forward(img, params, cfg, prefix), params, cfg, prefix)
