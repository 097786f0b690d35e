"""Registry of 64-bit finite-difference checks, one per differentiable op or stage.

Each check builds small random inputs away from kinks (ReLU/abs at 0, clip
bounds, the Smooth L1 transition, the sRGB/Lab branch points) and returns the
max relative error reported by :func:`grad_check`.
"""

from __future__ import annotations

import time
import zlib
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import colorm, dpr, gsr, hfr, losses, nn
from .tensorad import Tensor, directional_check, grad_check, ops
from .wavelet import WaveletBands, dwt2, idwt2

TOLERANCE = 1e-4
CHECKS: dict[str, Callable[[], float]] = {}


def register(name: str):
    def deco(fn):
        CHECKS[name] = fn
        return fn
    return deco


def _rng(name: str) -> np.random.Generator:
    return np.random.default_rng(zlib.crc32(name.encode()))


def _t(a) -> Tensor:
    return Tensor(np.asarray(a, dtype=np.float64), dtype=np.float64)


def _away_from(x: np.ndarray, points, margin: float = 0.02) -> np.ndarray:
    for p in points:
        close = np.abs(x - p) < margin
        x = np.where(close, p + np.where(x >= p, margin, -margin) * 2, x)
    return x


def _weighted_sum(shape, rng):
    r = rng.normal(size=shape)
    return lambda out: ops.sum(out * r)


def _randomize_zero_init(params: nn.Params, rng: np.random.Generator, scale: float = 0.3) -> None:
    for p in params.values():
        if not np.any(p.data):
            p.data = rng.uniform(-scale, scale, size=p.shape)


def _param_checks(f: Callable[[], Tensor], params: nn.Params, directions: int = 2, seed: int = 0) -> float:
    """Directional checks on every parameter tensor.

    Deep parameters have many coordinates whose gradient sits near the
    round-off floor of a central difference at h=1e-6; random directions
    aggregate them into a measurable quantity.
    """
    worst = 0.0
    for i, p in enumerate(params.values()):
        worst = max(worst, directional_check(lambda _: f(), p, directions=directions, seed=seed + i))
        p.requires_grad = True
    return worst


# ---------------------------------------------------------------- kernels

@register("conv2d.dense")
def _conv_dense():
    rng = _rng("conv2d.dense")
    x, w, b = _t(rng.normal(size=(2, 4, 6, 6))), _t(rng.normal(size=(5, 4, 3, 3))), _t(rng.normal(size=5))
    f = _weighted_sum((2, 5, 6, 6), rng)
    return max(grad_check(lambda t: f(ops.conv2d(t, w, b, padding=1)), x),
               grad_check(lambda t: f(ops.conv2d(x, t, b, padding=1)), w),
               grad_check(lambda t: f(ops.conv2d(x, w, t, padding=1)), b))


@register("conv2d.strided")
def _conv_strided():
    rng = _rng("conv2d.strided")
    x, w = _t(rng.normal(size=(1, 3, 6, 6))), _t(rng.normal(size=(4, 3, 3, 3)))
    f = _weighted_sum((1, 4, 3, 3), rng)
    return max(grad_check(lambda t: f(ops.conv2d(t, w, stride=2, padding=1)), x),
               grad_check(lambda t: f(ops.conv2d(x, t, stride=2, padding=1)), w))


@register("conv2d.grouped")
def _conv_grouped():
    rng = _rng("conv2d.grouped")
    x, w = _t(rng.normal(size=(2, 4, 6, 6))), _t(rng.normal(size=(6, 2, 3, 3)))
    f = _weighted_sum((2, 6, 6, 6), rng)
    return max(grad_check(lambda t: f(ops.conv2d(t, w, padding=1, groups=2)), x),
               grad_check(lambda t: f(ops.conv2d(x, t, padding=1, groups=2)), w))


@register("conv2d.depthwise")
def _conv_depthwise():
    rng = _rng("conv2d.depthwise")
    x, w = _t(rng.normal(size=(2, 4, 6, 6))), _t(rng.normal(size=(4, 1, 3, 3)))
    f = _weighted_sum((2, 4, 6, 6), rng)
    return max(grad_check(lambda t: f(ops.conv2d(t, w, padding=1, groups=4)), x),
               grad_check(lambda t: f(ops.conv2d(x, t, padding=1, groups=4)), w))


@register("conv2d.pointwise")
def _conv_pointwise():
    rng = _rng("conv2d.pointwise")
    x, w = _t(rng.normal(size=(2, 4, 6, 6))), _t(rng.normal(size=(3, 4, 1, 1)))
    f = _weighted_sum((2, 3, 6, 6), rng)
    return max(grad_check(lambda t: f(ops.conv2d(t, w)), x), grad_check(lambda t: f(ops.conv2d(x, t)), w))


@register("relu")
def _relu():
    rng = _rng("relu")
    x = _t(_away_from(rng.normal(size=(2, 4, 6, 6)), [0.0]))
    f = _weighted_sum(x.shape, rng)
    return grad_check(lambda t: f(ops.relu(t)), x)


@register("gelu")
def _gelu():
    rng = _rng("gelu")
    # the derivative vanishes near -0.7518 and in the far negative tail
    x = _t(_away_from(rng.uniform(-3.0, 3.0, size=(2, 4, 6, 6)), [-0.7518], margin=0.1))
    f = _weighted_sum(x.shape, rng)
    return grad_check(lambda t: f(ops.gelu(t)), x)


@register("elementwise")
def _elementwise():
    rng = _rng("elementwise")
    x = _t(rng.uniform(0.5, 2.0, size=(2, 3, 4, 4)))
    y = _t(rng.uniform(0.5, 2.0, size=(1, 3, 1, 1)))
    f = _weighted_sum(x.shape, rng)
    worst = grad_check(lambda t: f(ops.exp(t) * y + ops.log(t) - ops.sqrt(t) / y + t ** 1.7), x)
    worst = max(worst, grad_check(lambda t: f(x * t - x / t + t), y))
    s = _t(_away_from(rng.normal(size=(2, 3, 4, 4)), [0.0, -0.5, 0.5]))
    worst = max(worst, grad_check(lambda t: f(ops.abs(t) + ops.clip(t, -0.5, 0.5)), s))
    mask = rng.random(size=(2, 3, 4, 4)) < 0.5
    return max(worst, grad_check(lambda t: f(ops.where(mask, t * 2.0, ops.exp(t))), s))


@register("reductions")
def _reductions():
    rng = _rng("reductions")
    x = _t(rng.normal(size=(2, 4, 6, 6)))
    r1, r2 = rng.normal(size=(2, 6)), rng.normal(size=(4, 6))
    return max(grad_check(lambda t: ops.sum(ops.mean(t, axis=(1, 3)) * r1), x),
               grad_check(lambda t: ops.sum(ops.sum(t, axis=(0, 2)) * r2), x))


@register("shape_ops")
def _shape_ops():
    rng = _rng("shape_ops")
    x = _t(rng.normal(size=(2, 4, 6, 6)))
    r = rng.normal(size=(2, 6, 6, 6))

    def f(t):
        a, b = ops.split(t, 2, axis=1)
        y = ops.concat([a, ops.transpose(b, (0, 1, 3, 2)), t[:, 1:3]], axis=1)
        return ops.sum(ops.reshape(y, (2, 6, 36)) * r.reshape(2, 6, 36))

    return grad_check(f, x)


@register("pixel_shuffle")
def _pixel_shuffle():
    rng = _rng("pixel_shuffle")
    x = _t(rng.normal(size=(2, 4, 6, 6)))
    f = _weighted_sum((2, 16, 3, 3), rng)
    g = _weighted_sum((2, 1, 12, 12), rng)
    return max(grad_check(lambda t: f(ops.pixel_unshuffle(t, 2)), x),
               grad_check(lambda t: g(ops.pixel_shuffle(t, 2)), x))


@register("pooling")
def _pooling():
    rng = _rng("pooling")
    x = _t(rng.normal(size=(2, 4, 6, 6)))
    f = _weighted_sum((2, 4, 3, 3), rng)
    g = _weighted_sum((2, 4, 12, 12), rng)
    return max(grad_check(lambda t: f(ops.avg_pool2d(t, 2)), x),
               grad_check(lambda t: g(ops.upsample_nearest(t, 2)), x))


@register("matmul")
def _matmul():
    rng = _rng("matmul")
    a, b = _t(rng.normal(size=(2, 3, 4))), _t(rng.normal(size=(2, 4, 5)))
    f = _weighted_sum((2, 3, 5), rng)
    return max(grad_check(lambda t: f(ops.matmul(t, b)), a), grad_check(lambda t: f(ops.matmul(a, t)), b))


@register("softmax")
def _softmax():
    rng = _rng("softmax")
    x = _t(rng.normal(size=(2, 4, 6, 6)))
    f = _weighted_sum(x.shape, rng)
    return max(grad_check(lambda t: f(ops.softmax(t, axis=-1)), x), grad_check(lambda t: f(ops.softmax(t, axis=1)), x))


@register("l2_normalize")
def _l2():
    rng = _rng("l2_normalize")
    x = _t(rng.normal(size=(2, 4, 6, 6)))
    f = _weighted_sum(x.shape, rng)
    return grad_check(lambda t: f(ops.l2_normalize(t, axis=-1)), x)


@register("layer_norm_channel")
def _layer_norm():
    rng = _rng("layer_norm_channel")
    x, gain, shift = _t(rng.normal(size=(2, 4, 6, 6))), _t(rng.normal(size=4)), _t(rng.normal(size=4))
    f = _weighted_sum(x.shape, rng)
    return max(grad_check(lambda t: f(ops.layer_norm_channel(t, gain, shift)), x),
               grad_check(lambda t: f(ops.layer_norm_channel(x, t, shift)), gain),
               grad_check(lambda t: f(ops.layer_norm_channel(x, gain, t)), shift))


# ---------------------------------------------------------------- wavelet and colour

@register("dwt2")
def _dwt():
    rng = _rng("dwt2")
    x = _t(rng.normal(size=(2, 3, 6, 6)))
    rs = [rng.normal(size=(2, 3, 3, 3)) for _ in range(4)]

    def f(t):
        b = dwt2(t)
        return ops.sum(b.ll * rs[0]) + ops.sum(b.lh * rs[1]) + ops.sum(b.hl * rs[2]) + ops.sum(b.hh * rs[3])

    odd = _t(rng.normal(size=(1, 3, 5, 5)))
    r_odd = rng.normal(size=(1, 3, 5, 5))
    return max(grad_check(f, x), grad_check(lambda t: ops.sum(idwt2(dwt2(t)) * r_odd), odd))


@register("idwt2")
def _idwt():
    rng = _rng("idwt2")
    ll = _t(rng.normal(size=(2, 3, 3, 3)))
    high = _t(rng.normal(size=(2, 9, 3, 3)))
    f = _weighted_sum((2, 3, 6, 6), rng)
    return max(grad_check(lambda t: f(idwt2(WaveletBands.from_high(t, high))), ll),
               grad_check(lambda t: f(idwt2(WaveletBands.from_high(ll, t))), high))


@register("srgb_to_lab")
def _lab():
    rng = _rng("srgb_to_lab")
    # stay clear of the 0.04045 gamma knee and the Lab linear segment
    x = _t(rng.uniform(0.1, 0.95, size=(2, 3, 4, 4)))
    f = _weighted_sum(x.shape, rng)
    dark = _t(rng.uniform(0.001, 0.03, size=(1, 3, 4, 4)))
    g = _weighted_sum(dark.shape, rng)
    return max(grad_check(lambda t: f(colorm.srgb_to_lab(t)), x), grad_check(lambda t: g(colorm.srgb_to_lab(t)), dark))


@register("ms_ssim")
def _ms_ssim():
    rng = _rng("ms_ssim")
    # each probed coordinate drives a 6x6 block of a 36x36 image (two scales);
    # a single border pixel only reaches the Gaussian tail and its gradient
    # falls below the finite-difference noise floor
    x = _t(rng.uniform(0.1, 0.9, size=(1, 2, 6, 6)))
    ref = _t(np.clip(ops.upsample_nearest(x, 6).data + rng.normal(0, 0.2, size=(1, 2, 36, 36)), 0, 1))
    return grad_check(lambda t: colorm.ms_ssim(ops.upsample_nearest(t, 6), ref) * 10.0, x)


# ---------------------------------------------------------------- stages

@register("gfm")
def _gfm():
    rng = _rng("gfm")
    x, gamma, beta = _t(rng.normal(size=(2, 4, 6, 6))), _t(rng.normal(size=(2, 4))), _t(rng.normal(size=(2, 4)))
    f = _weighted_sum(x.shape, rng)
    return max(grad_check(lambda t: f(dpr.gfm(t, gamma, beta)), x),
               grad_check(lambda t: f(dpr.gfm(x, t, beta)), gamma),
               grad_check(lambda t: f(dpr.gfm(x, gamma, t)), beta))


def _block_params(name: str, c: int, heads: int):
    rng = _rng(name)
    params: nn.Params = {}
    gsr.init_block(params, "blk", c, heads, 2, rng, np.float64)
    _randomize_zero_init(params, rng)
    for p in params.values():
        p.data = p.data * 1.5  # larger weights keep attention away from uniform
    return params, rng


@register("mca")
def _mca():
    params, rng = _block_params("mca", 4, 2)
    x = _t(rng.normal(size=(1, 4, 6, 6)))
    f = _weighted_sum(x.shape, rng)
    worst = grad_check(lambda t: f(gsr.mca_forward(t, params, "blk.mca", 2)), x)
    mca_params = nn.subset(params, "blk.mca")
    return max(worst, _param_checks(lambda: f(gsr.mca_forward(x, params, "blk.mca", 2)), mca_params, 3))


@register("ifm")
def _ifm():
    params, rng = _block_params("ifm", 4, 1)
    x = _t(rng.normal(size=(1, 4, 6, 6)))
    f = _weighted_sum(x.shape, rng)
    worst = grad_check(lambda t: f(gsr.ifm_forward(t, params, "blk.ifm")), x)
    ifm_params = nn.subset(params, "blk.ifm")
    return max(worst, _param_checks(lambda: f(gsr.ifm_forward(x, params, "blk.ifm")), ifm_params, 3))


def tiny_model_config():
    from .training.config import ModelConfig
    return ModelConfig(gsr_channels=4, gsr_blocks=(1, 1, 1, 1), gsr_heads=(1, 2, 2, 4), gsr_ffn=2,
                       hfr_depth=2, hfr_channels=4, dpr_layers=2, dpr_channels=8, dpr_cond=4,
                       dpr_encoder_blocks=3, unet1_depth=2, unet1_channels=4, unet2_depth=2,
                       unet2_channels=4, seed=11)


@register("gsr")
def _gsr():
    cfg = tiny_model_config().gsr
    rng = _rng("gsr")
    params = gsr.init_gsr(cfg, np.float64)
    _randomize_zero_init(params, rng)
    # 16x16 keeps the deepest level at 2x2; at 1x1 the spatial L2 norm is a sign function
    x = _t(rng.uniform(0.0, 2.0, size=(1, 3, 16, 16)))
    f = _weighted_sum(x.shape, rng)
    worst = grad_check(lambda t: f(gsr.gsr_forward(t, params, cfg)), x, max_elements=256)
    return max(worst, _param_checks(lambda: f(gsr.gsr_forward(x, params, cfg)), params))


@register("hfr")
def _hfr():
    cfg = hfr.HfrConfig(depth=2, base_channels=4, seed=3)
    rng = _rng("hfr")
    params = hfr.init_hfr(cfg, np.float64)
    _randomize_zero_init(params, rng)
    x = _t(rng.normal(size=(1, 9, 8, 8)) * 0.3)
    f = _weighted_sum(x.shape, rng)
    worst = grad_check(lambda t: f(hfr.hfr_forward(t, params, cfg)), x)
    return max(worst, _param_checks(lambda: f(hfr.hfr_forward(x, params, cfg)), params))


@register("dpr")
def _dpr():
    cfg = dpr.DprConfig(refine_layers=2, refine_channels=8, cond_dim=4, encoder_blocks=3, seed=5)
    rng = _rng("dpr")
    params = dpr.init_dpr(cfg, np.float64)
    _randomize_zero_init(params, rng)
    x = _t(rng.uniform(0.0, 1.0, size=(1, 3, 8, 8)))
    f = _weighted_sum(x.shape, rng)
    worst = grad_check(lambda t: f(dpr.dpr_forward(t, params, cfg)), x)
    return max(worst, _param_checks(lambda: f(dpr.dpr_forward(x, params, cfg)), params))


# ---------------------------------------------------------------- losses and pipeline

@register("smooth_l1")
def _smooth_l1():
    rng = _rng("smooth_l1")
    b = rng.normal(size=(2, 3, 4, 4))
    d = _away_from(rng.normal(size=b.shape) * 1.5, [-1.0, 1.0, 0.0])
    a = _t(b + d)
    return grad_check(lambda t: losses.smooth_l1(t, _t(b)) * 10.0, a)


@register("refinement_loss")
def _refinement():
    rng = _rng("refinement_loss")
    tgt = _t(rng.uniform(0.3, 1.7, size=(1, 3, 12, 12)))
    enh = _t(np.clip(tgt.data + rng.normal(0, 0.2, size=tgt.shape), 0.25, 1.75))
    return grad_check(lambda t: losses.refinement_loss(t, tgt), enh)


@register("perceptual_loss")
def _perceptual():
    rng = _rng("perceptual_loss")
    extractor = losses.FeatureExtractor(seed=3, dtype=np.float64)
    tgt = _t(rng.uniform(size=(1, 3, 32, 32)))
    enh = _t(tgt.data + rng.normal(0, 0.1, size=tgt.shape))
    return grad_check(lambda t: losses.perceptual_loss(t, tgt, extractor) * 100.0, enh, max_elements=256)


@register("pipeline")
def _pipeline():
    from .training.pipeline import forward_pipeline, init_model
    cfg = tiny_model_config()
    rng = _rng("pipeline")
    params = init_model(cfg, np.float64)
    _randomize_zero_init(params, rng, scale=0.2)
    x = _t(rng.uniform(0.1, 0.9, size=(1, 3, 32, 32)))
    target = _t(np.clip(x.data ** 0.8 * 1.05, 0.0, 1.0))
    tb = dwt2(target)
    extractor = losses.FeatureExtractor(seed=3, dtype=np.float64)

    def f(inp):
        out = forward_pipeline(inp, params, cfg)
        loss, _ = losses.total_loss(out.final, target, out.ll_enh, tb.ll, out.hf_enh, tb.high, extractor)
        return loss

    # a 32x32 input has pixels whose gradient is ~1e-5 of the median, below
    # what a coordinate probe can resolve through this deep a graph
    worst = directional_check(f, x, directions=4)
    return max(worst, _param_checks(lambda: f(x), params))


@dataclass
class CheckResult:
    name: str
    error: float
    seconds: float

    @property
    def ok(self) -> bool:
        return self.error < TOLERANCE


def run_all(names=None, report=None) -> list[CheckResult]:
    results = []
    for name in names or CHECKS:
        start = time.perf_counter()
        err = CHECKS[name]()
        res = CheckResult(name, float(err), time.perf_counter() - start)
        if report is not None:
            report(res)
        results.append(res)
    return results
