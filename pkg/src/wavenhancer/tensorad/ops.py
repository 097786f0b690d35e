"""Differentiable kernels.

Every function takes and returns :class:`Tensor`. Backward rules are closures
returning one gradient (or ``None``) per input, in input order.
"""

from __future__ import annotations

import builtins
import math

import numpy as np
from scipy.special import erf

from .core import Tensor, as_tensor, make_result

_SQRT_2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def _pair(a, b) -> tuple[Tensor, Tensor]:
    if isinstance(a, Tensor):
        return a, as_tensor(b, like=a)
    b = as_tensor(b)
    return as_tensor(a, like=b), b


# ---------------------------------------------------------------- elementwise

def add(a, b) -> Tensor:
    a, b = _pair(a, b)
    return make_result(a.data + b.data, (a, b),
                       lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)))


def sub(a, b) -> Tensor:
    a, b = _pair(a, b)
    return make_result(a.data - b.data, (a, b),
                       lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)))


def mul(a, b) -> Tensor:
    a, b = _pair(a, b)
    return make_result(a.data * b.data, (a, b),
                       lambda g: (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)))


def div(a, b) -> Tensor:
    a, b = _pair(a, b)
    out = a.data / b.data

    def back(g):
        ga = g / b.data
        return _unbroadcast(ga, a.shape), _unbroadcast(-ga * out, b.shape)

    return make_result(out, (a, b), back)


def neg(x: Tensor) -> Tensor:
    return make_result(-x.data, (x,), lambda g: (-g,))


def power(x: Tensor, exponent: float) -> Tensor:
    p = float(exponent)
    out = x.data ** p
    return make_result(out, (x,), lambda g: (g * p * x.data ** (p - 1.0),))


def exp(x: Tensor) -> Tensor:
    out = np.exp(x.data)
    return make_result(out, (x,), lambda g: (g * out,))


def log(x: Tensor) -> Tensor:
    return make_result(np.log(x.data), (x,), lambda g: (g / x.data,))


def sqrt(x: Tensor) -> Tensor:
    out = np.sqrt(x.data)
    return make_result(out, (x,), lambda g: (g * 0.5 / out,))


def abs(x: Tensor) -> Tensor:  # noqa: A001
    return make_result(np.abs(x.data), (x,), lambda g: (g * np.sign(x.data),))


def relu(x: Tensor) -> Tensor:
    """max(x, 0); the subgradient at exactly 0 is 0."""
    mask = x.data > 0
    return make_result(x.data * mask, (x,), lambda g: (g * mask,))


def gelu(x: Tensor) -> Tensor:
    """Exact Gaussian-error linear unit x * Phi(x)."""
    cdf = 0.5 * (1.0 + erf(x.data / _SQRT_2))
    pdf = _INV_SQRT_2PI * np.exp(-0.5 * x.data * x.data)
    return make_result(x.data * cdf, (x,), lambda g: (g * (cdf + x.data * pdf),))


def clip(x: Tensor, lo: float, hi: float) -> Tensor:
    inside = (x.data >= lo) & (x.data <= hi)
    return make_result(np.clip(x.data, lo, hi), (x,), lambda g: (g * inside,))


def where(cond: np.ndarray, a, b) -> Tensor:
    """Select ``a`` where ``cond`` holds, else ``b``. ``cond`` is a constant mask."""
    a, b = _pair(a, b)
    cond = np.asarray(cond, dtype=bool)
    out = np.where(cond, a.data, b.data)

    def back(g):
        zero = np.zeros_like(g)
        return (_unbroadcast(np.where(cond, g, zero), a.shape),
                _unbroadcast(np.where(cond, zero, g), b.shape))

    return make_result(out, (a, b), back)


# ---------------------------------------------------------------- reductions

def _norm_axes(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


def sum(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    axes = _norm_axes(axis, x.ndim)
    out = x.data.sum(axis=axes, keepdims=keepdims)

    def back(g):
        if not keepdims:
            g = np.expand_dims(g, axes)
        return (np.broadcast_to(g, x.shape).copy(),)

    return make_result(np.asarray(out, dtype=x.dtype), (x,), back)


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    axes = _norm_axes(axis, x.ndim)
    count = int(np.prod([x.shape[a] for a in axes])) if axes else 1
    return mul(sum(x, axis=axes, keepdims=keepdims), 1.0 / count)


# ---------------------------------------------------------------- shape ops

def reshape(x: Tensor, shape) -> Tensor:
    shape = tuple(shape)
    return make_result(x.data.reshape(shape), (x,), lambda g: (g.reshape(x.shape),))


def transpose(x: Tensor, axes) -> Tensor:
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    return make_result(x.data.transpose(axes), (x,), lambda g: (g.transpose(inverse),))


def getitem(x: Tensor, index) -> Tensor:
    def back(g):
        full = np.zeros_like(x.data)
        if _has_fancy(index):
            np.add.at(full, index, g)
        else:
            full[index] += g
        return (full,)

    return make_result(np.array(x.data[index]), (x,), back)


def _has_fancy(index) -> bool:
    items = index if isinstance(index, tuple) else (index,)
    return builtins.any(isinstance(i, (list, np.ndarray)) for i in items)


def concat(tensors, axis: int = 1) -> Tensor:
    tensors = list(tensors)
    sizes = [t.shape[axis] for t in tensors]
    bounds = np.cumsum([0] + sizes)

    def back(g):
        return tuple(np.take(g, np.arange(bounds[i], bounds[i + 1]), axis=axis)
                     for i in range(len(tensors)))

    return make_result(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), back)


def split(x: Tensor, sections: int, axis: int = 1) -> list[Tensor]:
    n = x.shape[axis]
    if n % sections:
        raise ValueError(f"cannot split axis of size {n} into {sections} equal parts")
    step = n // sections
    out = []
    for i in range(sections):
        index = [slice(None)] * x.ndim
        index[axis] = slice(i * step, (i + 1) * step)
        out.append(getitem(x, tuple(index)))
    return out


# ---------------------------------------------------------------- linear algebra

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """Batched product over the last two axes: (..., m, k) @ (..., k, n)."""
    a, b = _pair(a, b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    out = np.matmul(a.data, b.data)

    def back(g):
        ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
        gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return make_result(out, (a, b), back)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def back(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return make_result(out, (x,), back)


def layer_norm_channel(x: Tensor, gain: Tensor, shift: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize each pixel over the channel axis, then apply a per-channel affine."""
    mu = x.data.mean(axis=1, keepdims=True)
    centered = x.data - mu
    var = (centered * centered).mean(axis=1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv_std
    view = (1, -1) + (1,) * (x.ndim - 2)
    out = xhat * gain.data.reshape(view) + shift.data.reshape(view)
    red = (0,) + tuple(range(2, x.ndim))

    def back(g):
        gxhat = g * gain.data.reshape(view)
        gx = inv_std * (gxhat - gxhat.mean(axis=1, keepdims=True)
                        - xhat * (gxhat * xhat).mean(axis=1, keepdims=True))
        return gx, (g * xhat).sum(axis=red), g.sum(axis=red)

    return make_result(out, (x, gain, shift), back)


# ---------------------------------------------------------------- spatial ops

def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None,
           stride: int = 1, padding: int = 0, groups: int = 1) -> Tensor:
    """2-D cross-correlation with zero padding. ``weight`` is (Cout, Cin/groups, kh, kw)."""
    if x.ndim != 4 or weight.ndim != 4:
        raise ValueError(f"conv2d expects 4-D input and weight, got {x.shape} and {weight.shape}")
    n, c, h, w = x.shape
    cout, cg, kh, kw = weight.shape
    if groups < 1 or c % groups or cout % groups:
        raise ValueError(f"groups={groups} must divide Cin={c} and Cout={cout}")
    if cg != c // groups:
        raise ValueError(f"conv2d shape mismatch: input {x.shape} vs weight {weight.shape} with groups={groups}")
    if bias is not None and bias.shape != (cout,):
        raise ValueError(f"conv2d bias shape {bias.shape} does not match Cout={cout}")
    ho = (h + 2 * padding - kh) // stride + 1
    wo = (w + 2 * padding - kw) // stride + 1
    if ho < 1 or wo < 1:
        raise ValueError(f"conv2d kernel {kh}x{kw} larger than padded input {x.shape}")

    if groups == 1:
        out, back_xw = _conv_dense(x.data, weight.data, stride, padding, ho, wo)
    else:
        out, back_xw = _conv_grouped(x.data, weight.data, stride, padding, groups, ho, wo)
    if bias is not None:
        out += bias.data.reshape(1, cout, 1, 1)

    def back(g):
        gx, gw = back_xw(g, x.requires_grad, weight.requires_grad)
        gb = g.sum(axis=(0, 2, 3)) if bias is not None else None
        return gx, gw, gb

    inputs = (x, weight) if bias is None else (x, weight, bias)
    return make_result(out, inputs, back)


def _pad(a: np.ndarray, padding: int) -> np.ndarray:
    return np.pad(a, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else a


def _window(i: int, j: int, ho: int, wo: int, stride: int) -> tuple:
    return (slice(None), slice(None),
            slice(i, i + stride * (ho - 1) + 1, stride),
            slice(j, j + stride * (wo - 1) + 1, stride))


def _conv_dense(x, wd, stride, padding, ho, wo):
    """groups == 1: patch-matrix expansion and one matrix product."""
    n, c, h, w = x.shape
    cout, _, kh, kw = wd.shape
    xp = _pad(x, padding)
    if kh == kw == 1 and stride == 1:
        cols = xp.transpose(1, 0, 2, 3).reshape(c, n * ho * wo)
    else:
        win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::stride, ::stride]
        cols = win.transpose(1, 4, 5, 0, 2, 3).reshape(c * kh * kw, n * ho * wo)
    w2 = wd.reshape(cout, -1)
    out = (w2 @ cols).reshape(cout, n, ho, wo).transpose(1, 0, 2, 3)

    def back(g, need_x, need_w):
        g2 = g.transpose(1, 0, 2, 3).reshape(cout, -1)
        gw = (g2 @ cols.T).reshape(wd.shape) if need_w else None
        gx = None
        if need_x:
            gcols = (w2.T @ g2).reshape(c, kh, kw, n, ho, wo).transpose(3, 0, 1, 2, 4, 5)
            if kh == kw == 1 and stride == 1:
                gx = gcols[:, :, 0, 0]
            else:
                gxp = np.zeros_like(xp)
                for i in range(kh):
                    for j in range(kw):
                        gxp[_window(i, j, ho, wo, stride)] += gcols[:, :, i, j]
                gx = gxp[:, :, padding:padding + h, padding:padding + w]
            gx = np.ascontiguousarray(gx)
        return gx, gw

    return np.ascontiguousarray(out), back


def _conv_grouped(x, wd, stride, padding, groups, ho, wo):
    """groups > 1: shifted-slice accumulation; depthwise is a per-channel multiply."""
    n, c, h, w = x.shape
    cout, cg, kh, kw = wd.shape
    og = cout // groups
    depthwise = groups == c and cout == c
    xp = _pad(x, padding)
    out = np.zeros((n, cout, ho, wo), dtype=np.result_type(x, wd))
    for i in range(kh):
        for j in range(kw):
            xs = xp[_window(i, j, ho, wo, stride)]
            if depthwise:
                out += xs * wd[:, 0, i, j].reshape(1, c, 1, 1)
            else:
                xs_g = xs.reshape(n, groups, cg, ho * wo)
                w_g = wd[:, :, i, j].reshape(groups, og, cg)
                out += np.matmul(w_g[None], xs_g).reshape(n, cout, ho, wo)

    def back(g, need_x, need_w):
        gxp = np.zeros_like(xp) if need_x else None
        gw = np.zeros_like(wd) if need_w else None
        g_g = None if depthwise else g.reshape(n, groups, og, ho * wo)
        for i in range(kh):
            for j in range(kw):
                win = _window(i, j, ho, wo, stride)
                if depthwise:
                    if gw is not None:
                        gw[:, 0, i, j] = (g * xp[win]).sum(axis=(0, 2, 3))
                    if gxp is not None:
                        gxp[win] += g * wd[:, 0, i, j].reshape(1, c, 1, 1)
                else:
                    if gw is not None:
                        xs_g = xp[win].reshape(n, groups, cg, ho * wo)
                        gw[:, :, i, j] = np.matmul(g_g, np.swapaxes(xs_g, -1, -2)).sum(axis=0).reshape(cout, cg)
                    if gxp is not None:
                        w_g = wd[:, :, i, j].reshape(groups, og, cg)
                        gxp[win] += np.matmul(np.swapaxes(w_g, -1, -2)[None], g_g).reshape(n, c, ho, wo)
        gx = None
        if gxp is not None:
            gx = gxp[:, :, padding:padding + h, padding:padding + w] if padding else gxp
        return gx, gw

    return out, back


def avg_pool2d(x: Tensor, k: int = 2) -> Tensor:
    """Non-overlapping k x k mean pooling; H and W must be divisible by k."""
    n, c, h, w = x.shape
    if h % k or w % k:
        raise ValueError(f"avg_pool2d needs H, W divisible by {k}, got {x.shape}")
    out = x.data.reshape(n, c, h // k, k, w // k, k).mean(axis=(3, 5))

    def back(g):
        g = g / (k * k)
        return (np.repeat(np.repeat(g, k, axis=2), k, axis=3),)

    return make_result(out, (x,), back)


def upsample_nearest(x: Tensor, k: int = 2) -> Tensor:
    n, c, h, w = x.shape
    out = np.repeat(np.repeat(x.data, k, axis=2), k, axis=3)
    return make_result(out, (x,), lambda g: (g.reshape(n, c, h, k, w, k).sum(axis=(3, 5)),))


def pixel_unshuffle(x: Tensor, r: int) -> Tensor:
    """(N, C, H, W) -> (N, C*r*r, H/r, W/r); sub-pixel (i, j) of channel c lands in channel c*r*r + i*r + j."""
    n, c, h, w = x.shape
    if h % r or w % r:
        raise ValueError(f"pixel_unshuffle needs H, W divisible by {r}, got {x.shape}")
    out = x.data.reshape(n, c, h // r, r, w // r, r).transpose(0, 1, 3, 5, 2, 4).reshape(n, c * r * r, h // r, w // r)

    def back(g):
        return (g.reshape(n, c, r, r, h // r, w // r).transpose(0, 1, 4, 2, 5, 3).reshape(n, c, h, w),)

    return make_result(np.ascontiguousarray(out), (x,), back)


def pixel_shuffle(x: Tensor, r: int) -> Tensor:
    """Exact inverse of :func:`pixel_unshuffle`."""
    n, c, h, w = x.shape
    if c % (r * r):
        raise ValueError(f"pixel_shuffle needs C divisible by {r * r}, got {x.shape}")
    co = c // (r * r)
    out = x.data.reshape(n, co, r, r, h, w).transpose(0, 1, 4, 2, 5, 3).reshape(n, co, h * r, w * r)

    def back(g):
        return (g.reshape(n, co, h, r, w, r).transpose(0, 1, 3, 5, 2, 4).reshape(n, c, h, w),)

    return make_result(np.ascontiguousarray(out), (x,), back)


# ---------------------------------------------------------------- composites

def l2_normalize(x: Tensor, axis: int = -1, eps: float = 1e-12) -> Tensor:
    norm = sqrt(sum(x * x, axis=axis, keepdims=True) + eps)
    return x / norm
