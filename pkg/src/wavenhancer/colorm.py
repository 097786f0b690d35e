"""Colour conversion and image-quality metrics.

``srgb_to_lab`` and ``ms_ssim`` are differentiable (they sit inside the
refinement loss); the remaining metrics are evaluation-only and computed in
64-bit.
"""

from __future__ import annotations

import math

import numpy as np

from .tensorad import Tensor, ops

# sRGB primaries -> XYZ, D65
_RGB_TO_XYZ = np.array([
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
])
# reference white as the image of RGB (1, 1, 1), so white maps to exactly (100, 0, 0)
_WHITE = _RGB_TO_XYZ.sum(axis=1)
_DELTA = 6.0 / 29.0
_F_TO_LAB = np.array([
    [0.0, 116.0, 0.0],
    [500.0, -500.0, 0.0],
    [0.0, 200.0, -200.0],
])
_LAB_OFFSET = np.array([-16.0, 0.0, 0.0])

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
MS_SSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)


def _to_tensor(x, dtype=None) -> Tensor:
    if isinstance(x, Tensor):
        return x if dtype is None else Tensor(x.data.astype(dtype), dtype=dtype)
    return Tensor(np.asarray(x, dtype=dtype or np.float64))


def _check_same_shape(a, b, what: str) -> None:
    if a.shape != b.shape:
        raise ValueError(f"{what}: shape mismatch {a.shape} vs {b.shape}")


def _pointwise(x: Tensor, matrix: np.ndarray, offset: np.ndarray | None = None) -> Tensor:
    w = Tensor(matrix.reshape(3, 3, 1, 1), dtype=x.dtype)
    b = None if offset is None else Tensor(offset, dtype=x.dtype)
    return ops.conv2d(x, w, b)


def srgb_to_lab(x: Tensor) -> Tensor:
    """(N, 3, H, W) sRGB in [0, 1] -> CIELab (L in [0, 100]). Inputs are clamped first."""
    if x.ndim != 4 or x.shape[1] != 3:
        raise ValueError(f"srgb_to_lab expects (N, 3, H, W), got {x.shape}")
    x = ops.clip(x, 0.0, 1.0)
    low = x.data <= 0.04045
    # evaluate the power branch only on a safe operand so its gradient stays finite
    gamma = ((ops.where(low, 1.0, x) + 0.055) / 1.055) ** 2.4
    linear = ops.where(low, x / 12.92, gamma)

    xyz = _pointwise(linear, _RGB_TO_XYZ / _WHITE[:, None])
    cube = xyz.data > _DELTA ** 3
    f = ops.where(cube, ops.where(cube, xyz, 1.0) ** (1.0 / 3.0), xyz / (3.0 * _DELTA ** 2) + 4.0 / 29.0)
    return _pointwise(f, _F_TO_LAB, _LAB_OFFSET)


def lightness(x: Tensor) -> Tensor:
    """CIELab L channel of an sRGB image, shape (N, 1, H, W)."""
    return srgb_to_lab(x)[:, 0:1]


def delta_e(a, b) -> float:
    """Mean per-pixel CIE76 distance between two sRGB images in [0, 1]."""
    a, b = _to_tensor(a, np.float64), _to_tensor(b, np.float64)
    _check_same_shape(a, b, "delta_e")
    diff = srgb_to_lab(a).data - srgb_to_lab(b).data
    return float(np.sqrt((diff * diff).sum(axis=1)).mean())


def psnr(a, b, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; ``inf`` for identical inputs."""
    a = np.asarray(a.data if isinstance(a, Tensor) else a, dtype=np.float64)
    b = np.asarray(b.data if isinstance(b, Tensor) else b, dtype=np.float64)
    _check_same_shape(a, b, "psnr")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    coords = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(coords ** 2) / (2.0 * sigma ** 2))
    return g / g.sum()


def _blur(x: Tensor, window: np.ndarray) -> Tensor:
    c = x.shape[1]
    k = window.size
    wh = Tensor(np.tile(window.reshape(1, 1, 1, k), (c, 1, 1, 1)), dtype=x.dtype)
    wv = Tensor(np.tile(window.reshape(1, 1, k, 1), (c, 1, 1, 1)), dtype=x.dtype)
    return ops.conv2d(ops.conv2d(x, wh, groups=c), wv, groups=c)


def _ssim_maps(a: Tensor, b: Tensor, peak: float = 1.0) -> tuple[Tensor, Tensor]:
    """Per-pixel luminance term and contrast-structure term over valid windows."""
    window = gaussian_window()
    c1 = (SSIM_K1 * peak) ** 2
    c2 = (SSIM_K2 * peak) ** 2
    mu_a = _blur(a, window)
    mu_b = _blur(b, window)
    mu_aa = mu_a * mu_a
    mu_bb = mu_b * mu_b
    mu_ab = mu_a * mu_b
    var_a = _blur(a * a, window) - mu_aa
    var_b = _blur(b * b, window) - mu_bb
    cov = _blur(a * b, window) - mu_ab
    luminance = (mu_ab * 2.0 + c1) / (mu_aa + mu_bb + c1)
    cs = (cov * 2.0 + c2) / (var_a + var_b + c2)
    return luminance, cs


def _check_window(shape, what: str) -> None:
    if len(shape) != 4:
        raise ValueError(f"{what} expects (N, C, H, W), got {shape}")
    if min(shape[-2:]) < SSIM_WINDOW:
        raise ValueError(f"{what}: image {shape[-2:]} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")


def ssim(a, b) -> float:
    """Mean SSIM over all channels and valid window positions (peak 1)."""
    a, b = _to_tensor(a, np.float64), _to_tensor(b, np.float64)
    _check_same_shape(a, b, "ssim")
    _check_window(a.shape, "ssim")
    lum, cs = _ssim_maps(a, b)
    return float((lum.data * cs.data).mean())


def ms_ssim_scales(height: int, width: int, max_scales: int = len(MS_SSIM_WEIGHTS)) -> int:
    """Largest scale count whose coarsest level still fits the SSIM window."""
    side = min(height, width)
    scales = 0
    while scales < max_scales and side >= SSIM_WINDOW * 2 ** scales:
        scales += 1
    return scales


def ms_ssim_weights(scales: int) -> np.ndarray:
    w = np.asarray(MS_SSIM_WEIGHTS[:scales], dtype=np.float64)
    return w / w.sum()


def ms_ssim(a: Tensor, b: Tensor) -> Tensor:
    """Differentiable multi-scale SSIM, averaged over batch and channels.

    Uses as many of the five standard scales as the input supports and
    renormalizes the exponents to sum to one.
    """
    a, b = _to_tensor(a), _to_tensor(b)
    _check_same_shape(a, b, "ms_ssim")
    _check_window(a.shape, "ms_ssim")
    scales = ms_ssim_scales(*a.shape[-2:])
    weights = ms_ssim_weights(scales)

    result = None
    for j in range(scales):
        lum, cs = _ssim_maps(a, b)
        term = cs if j < scales - 1 else lum * cs
        value = ops.clip(ops.mean(term, axis=(2, 3)), 1e-8, np.inf) ** float(weights[j])
        result = value if result is None else result * value
        if j < scales - 1:
            h, w = a.shape[-2:]
            a = ops.avg_pool2d(a[:, :, : h - h % 2, : w - w % 2], 2)
            b = ops.avg_pool2d(b[:, :, : h - h % 2, : w - w % 2], 2)
    return ops.mean(result)
