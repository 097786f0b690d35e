"""Training criteria: LL refinement loss, perceptual loss, Smooth L1 and their weighted total."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import colorm
from .tensorad import Tensor, ops

TAP_WIDTHS = (8, 16, 32, 32, 32)


class PerceptualTapWarning(UserWarning):
    pass


@dataclass(frozen=True)
class LossWeights:
    w_lab: float = 1.0
    w_ms: float = 0.5
    tap_weights: tuple[float, ...] = (1.0,) * (len(TAP_WIDTHS) + 1)
    lambda_r: float = 2.0
    lambda_smooth: float = 2.0
    smooth_beta: float = 1.0

    def __post_init__(self):
        values = (self.w_lab, self.w_ms, self.lambda_r, self.lambda_smooth, *self.tap_weights)
        if any(v < 0 for v in values):
            raise ValueError("loss weights must be nonnegative")
        if self.smooth_beta <= 0:
            raise ValueError("smooth_beta must be positive")
        if len(self.tap_weights) != len(TAP_WIDTHS) + 1:
            raise ValueError(f"need {len(TAP_WIDTHS) + 1} tap weights, got {len(self.tap_weights)}")


class FeatureExtractor:
    """Frozen, seeded stack of [3x3 conv, ReLU, 2x avg-pool] stages.

    Tap 0 is the image itself; tap k (k >= 1) is the output of stage k and
    has spatial size H / 2**k.
    """

    def __init__(self, seed: int = 7, widths: tuple[int, ...] = TAP_WIDTHS, dtype=np.float32):
        rng = np.random.default_rng(seed)
        self.seed = seed
        self.widths = tuple(widths)
        self.weights: list[tuple[Tensor, Tensor]] = []
        cin = 3
        for cout in self.widths:
            std = np.sqrt(2.0 / (cin * 9))
            w = rng.normal(0.0, std, size=(cout, cin, 3, 3))
            b = rng.normal(0.0, 0.01, size=cout)
            self.weights.append((Tensor(w.astype(dtype), dtype=dtype), Tensor(b.astype(dtype), dtype=dtype)))
            cin = cout

    def to(self, dtype) -> "FeatureExtractor":
        out = object.__new__(FeatureExtractor)
        out.seed, out.widths = self.seed, self.widths
        out.weights = [(Tensor(w.data.astype(dtype), dtype=dtype), Tensor(b.data.astype(dtype), dtype=dtype))
                       for w, b in self.weights]
        return out

    def available_taps(self, height: int, width: int) -> int:
        stages = 0
        h, w = height, width
        while stages < len(self.widths) and h >= 2 and w >= 2 and h % 2 == 0 and w % 2 == 0:
            h, w = h // 2, w // 2
            stages += 1
        return stages + 1

    def taps(self, x: Tensor, count: int | None = None) -> list[Tensor]:
        if count is None:
            count = self.available_taps(*x.shape[-2:])
        out = [x]
        for w, b in self.weights[: count - 1]:
            x = ops.avg_pool2d(ops.relu(ops.conv2d(x, w, b, padding=1)), 2)
            out.append(x)
        return out


def _check(a: Tensor, b: Tensor, what: str) -> None:
    if a.shape != b.shape:
        raise ValueError(f"{what}: shape mismatch {a.shape} vs {b.shape}")


def smooth_l1(a: Tensor, b, beta: float = 1.0) -> Tensor:
    b = b if isinstance(b, Tensor) else Tensor(np.asarray(b, dtype=a.dtype), dtype=a.dtype)
    _check(a, b, "smooth_l1")
    d = a - b
    ad = ops.abs(d)
    quadratic = ad.data < beta
    return ops.mean(ops.where(quadratic, d * d * (0.5 / beta), ad - 0.5 * beta))


def refinement_loss(ll_enhanced: Tensor, ll_target: Tensor, w: LossWeights = LossWeights()) -> Tensor:
    """Lab L1 plus (1 - MS-SSIM) on lightness, for LL bands in [0, 2]."""
    _check(ll_enhanced, ll_target, "refinement_loss")
    lab_e = colorm.srgb_to_lab(ll_enhanced * 0.5)
    lab_t = colorm.srgb_to_lab(ll_target * 0.5)
    lab_term = ops.mean(ops.abs(lab_e - lab_t))
    light_e = lab_e[:, 0:1] * 0.01
    light_t = lab_t[:, 0:1] * 0.01
    ms_term = 1.0 - colorm.ms_ssim(light_e, light_t)
    return lab_term * w.w_lab + ms_term * w.w_ms


def perceptual_loss(enhanced: Tensor, target: Tensor, extractor: FeatureExtractor,
                    w: LossWeights = LossWeights()) -> Tensor:
    _check(enhanced, target, "perceptual_loss")
    count = extractor.available_taps(*enhanced.shape[-2:])
    if count < len(extractor.widths) + 1:
        warnings.warn(f"image {enhanced.shape[-2:]} supports only {count} of "
                      f"{len(extractor.widths) + 1} perceptual taps", PerceptualTapWarning, stacklevel=2)
    total = None
    for k, (fe, ft) in enumerate(zip(extractor.taps(enhanced, count), extractor.taps(target, count))):
        term = ops.mean(ops.abs(fe - ft)) * w.tap_weights[k]
        total = term if total is None else total + term
    return total


@dataclass
class LossBreakdown:
    perceptual: float
    refinement: float
    smooth_final: float
    smooth_hf: float
    lambda_r: float
    lambda_smooth: float
    total: float
    extra: dict = field(default_factory=dict)

    def contributions(self) -> dict[str, float]:
        return {
            "perceptual": self.perceptual,
            "refinement": self.lambda_r * self.refinement,
            "smooth_final": self.lambda_smooth * self.smooth_final,
            "smooth_hf": self.lambda_smooth * self.smooth_hf,
        }

    def as_row(self) -> dict[str, float]:
        return {"total": self.total, "perceptual": self.perceptual, "refinement": self.refinement,
                "smooth_final": self.smooth_final, "smooth_hf": self.smooth_hf}


def total_loss(final_out: Tensor, final_target: Tensor, ll_enh: Tensor, ll_tgt: Tensor,
               hf_enh: Tensor, hf_tgt: Tensor, extractor: FeatureExtractor,
               w: LossWeights = LossWeights()) -> tuple[Tensor, LossBreakdown]:
    perc = perceptual_loss(final_out, final_target, extractor, w)
    refine = refinement_loss(ll_enh, ll_tgt, w)
    sm_final = smooth_l1(final_out, final_target, w.smooth_beta)
    sm_hf = smooth_l1(hf_enh, hf_tgt, w.smooth_beta)
    loss = perc + refine * w.lambda_r + (sm_final + sm_hf) * w.lambda_smooth
    breakdown = LossBreakdown(
        perceptual=perc.item(), refinement=refine.item(), smooth_final=sm_final.item(),
        smooth_hf=sm_hf.item(), lambda_r=w.lambda_r, lambda_smooth=w.lambda_smooth, total=loss.item(),
    )
    return loss, breakdown
