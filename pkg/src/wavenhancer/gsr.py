"""Global stylization remapping: a 4-level channel-attention encoder-decoder for the LL band."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .nn import Params
from .tensorad import Tensor, ops


@dataclass(frozen=True)
class GsrConfig:
    base_channels: int = 16
    levels: int = 4
    blocks_per_level: tuple[int, ...] = (1, 2, 2, 4)
    heads_per_level: tuple[int, ...] = (1, 2, 2, 4)
    ffn_expansion: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.levels != 4:
            raise ValueError(f"levels must be 4, got {self.levels}")
        if len(self.blocks_per_level) != self.levels or len(self.heads_per_level) != self.levels:
            raise ValueError("blocks_per_level and heads_per_level need one entry per level")
        if any(b2 < b1 for b1, b2 in zip(self.blocks_per_level, self.blocks_per_level[1:])):
            raise ValueError(f"blocks_per_level must be non-decreasing, got {self.blocks_per_level}")
        for level, heads in enumerate(self.heads_per_level):
            if heads < 1 or self.channels(level) % heads:
                raise ValueError(f"level {level}: {self.channels(level)} channels not divisible by {heads} heads")

    def channels(self, level: int) -> int:
        return self.base_channels * 2 ** level

    @property
    def multiple(self) -> int:
        return 2 ** (self.levels - 1)


def init_block(params: Params, name: str, channels: int, heads: int, expansion: int,
               rng: np.random.Generator, dtype) -> None:
    c = channels
    hidden = expansion * c
    nn.init_layer_norm(params, f"{name}.mca.norm", c, dtype)
    nn.init_conv(params, f"{name}.mca.qkv", c, 3 * c, 1, rng, bias=False, dtype=dtype)
    nn.init_conv(params, f"{name}.mca.qkv_dw", 3 * c, 3 * c, 3, rng, groups=3 * c, bias=False, dtype=dtype)
    params[f"{name}.mca.temperature"] = Tensor(np.ones((1, heads, 1, 1), dtype=dtype), requires_grad=True, dtype=dtype)
    nn.init_conv(params, f"{name}.mca.proj", c, c, 1, rng, bias=False, dtype=dtype)
    nn.init_layer_norm(params, f"{name}.ifm.norm", c, dtype)
    nn.init_conv(params, f"{name}.ifm.expand", c, 2 * hidden, 1, rng, bias=False, dtype=dtype)
    nn.init_conv(params, f"{name}.ifm.dw", 2 * hidden, 2 * hidden, 3, rng, groups=2 * hidden, bias=False, dtype=dtype)
    nn.init_conv(params, f"{name}.ifm.proj", hidden, c, 1, rng, bias=False, dtype=dtype)


def mca_forward(x: Tensor, params: Params, name: str, heads: int, return_attention: bool = False):
    """Multi-channel attention: a (C/heads x C/heads) attention map per head, plus residual."""
    n, c, h, w = x.shape
    if c % heads:
        raise ValueError(f"{c} channels not divisible by {heads} heads")
    y = nn.layer_norm(x, params, f"{name}.norm")
    qkv = nn.conv(nn.conv(y, params, f"{name}.qkv"), params, f"{name}.qkv_dw", groups=3 * c)
    q, k, v = (ops.reshape(t, (n, heads, c // heads, h * w)) for t in ops.split(qkv, 3, axis=1))
    q = ops.l2_normalize(q, axis=-1)
    k = ops.l2_normalize(k, axis=-1)
    scores = ops.matmul(q, ops.transpose(k, (0, 1, 3, 2))) * params[f"{name}.temperature"]
    attn = ops.softmax(scores, axis=-1)
    out = ops.reshape(ops.matmul(attn, v), (n, c, h, w))
    out = x + nn.conv(out, params, f"{name}.proj")
    return (out, attn) if return_attention else out


def ifm_forward(x: Tensor, params: Params, name: str) -> Tensor:
    """Gated feed-forward: GELU(gate) * value between a 1x1 expand and a 1x1 project."""
    y = nn.layer_norm(x, params, f"{name}.norm")
    y = nn.conv(y, params, f"{name}.expand")
    y = nn.conv(y, params, f"{name}.dw", groups=y.shape[1])
    gate, value = ops.split(y, 2, axis=1)
    return x + nn.conv(ops.gelu(gate) * value, params, f"{name}.proj")


def block_forward(x: Tensor, params: Params, name: str, heads: int) -> Tensor:
    return ifm_forward(mca_forward(x, params, f"{name}.mca", heads), params, f"{name}.ifm")


def init_gsr(cfg: GsrConfig, dtype=np.float32, prefix: str = "gsr") -> Params:
    rng = np.random.default_rng(cfg.seed)
    params: Params = {}
    c0 = cfg.channels(0)
    nn.init_conv(params, f"{prefix}.in", 3, c0, 3, rng, dtype=dtype)
    for level in range(cfg.levels):
        c = cfg.channels(level)
        for b in range(cfg.blocks_per_level[level]):
            init_block(params, f"{prefix}.enc{level}.{b}", c, cfg.heads_per_level[level], cfg.ffn_expansion, rng, dtype)
        if level < cfg.levels - 1:
            nn.init_conv(params, f"{prefix}.down{level}", 4 * c, 2 * c, 1, rng, bias=False, dtype=dtype)
    for level in reversed(range(cfg.levels - 1)):
        c = cfg.channels(level)
        nn.init_conv(params, f"{prefix}.up{level}", 2 * c, 4 * c, 1, rng, bias=False, dtype=dtype)
        nn.init_conv(params, f"{prefix}.fuse{level}", 2 * c, c, 1, rng, dtype=dtype)
        for b in range(cfg.blocks_per_level[level]):
            init_block(params, f"{prefix}.dec{level}.{b}", c, cfg.heads_per_level[level], cfg.ffn_expansion, rng, dtype)
    nn.init_conv(params, f"{prefix}.out", c0, 3, 3, rng, zero=True, dtype=dtype)
    return params


def gsr_forward(ll: Tensor, params: Params, cfg: GsrConfig, prefix: str = "gsr") -> Tensor:
    """Enhance an (N, 3, h, w) LL band; h and w must be divisible by 8."""
    nn.check_multiple(ll.shape, cfg.multiple, "GSR")
    x = nn.conv(ll, params, f"{prefix}.in")
    skips = []
    for level in range(cfg.levels):
        for b in range(cfg.blocks_per_level[level]):
            x = block_forward(x, params, f"{prefix}.enc{level}.{b}", cfg.heads_per_level[level])
        if level < cfg.levels - 1:
            skips.append(x)
            x = nn.conv(ops.pixel_unshuffle(x, 2), params, f"{prefix}.down{level}")
    for level in reversed(range(cfg.levels - 1)):
        x = ops.pixel_shuffle(nn.conv(x, params, f"{prefix}.up{level}"), 2)
        x = nn.conv(ops.concat([x, skips[level]], axis=1), params, f"{prefix}.fuse{level}")
        for b in range(cfg.blocks_per_level[level]):
            x = block_forward(x, params, f"{prefix}.dec{level}.{b}", cfg.heads_per_level[level])
    return ll + nn.conv(x, params, f"{prefix}.out")
