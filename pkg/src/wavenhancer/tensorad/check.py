"""Central-difference gradient verification."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .core import Tape, Tensor


def grad_check(f: Callable[[Tensor], Tensor], x: Tensor, h: float = 1e-6,
               max_elements: int | None = None, seed: int = 0) -> float:
    """Max elementwise relative error between the tape gradient and central differences.

    The error per element is |a - n| / max(|a|, |n|, 1e-8). ``x`` should be
    64-bit. With ``max_elements`` a seeded random subset of coordinates is
    probed instead of all of them.
    """
    if x.dtype != np.float64:
        raise TypeError("grad_check needs a 64-bit input")
    analytic = _analytic(f, x)

    flat = x.data.reshape(-1)
    if max_elements is not None and max_elements < flat.size:
        idx = np.random.default_rng(seed).choice(flat.size, size=max_elements, replace=False)
    else:
        idx = np.arange(flat.size)

    worst = 0.0
    a_flat = analytic.reshape(-1)
    for i in idx:
        orig = flat[i]
        flat[i] = orig + h
        fp = f(x).item()
        flat[i] = orig - h
        fm = f(x).item()
        flat[i] = orig
        numeric = (fp - fm) / (2.0 * h)
        a = a_flat[i]
        err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
        worst = max(worst, err)
    return worst


def _analytic(f, x: Tensor) -> np.ndarray:
    x.requires_grad = True
    x.grad = None
    with Tape() as tape:
        y = f(x)
    tape.backward(y)
    g = np.zeros_like(x.data) if x.grad is None else x.grad.copy()
    x.grad = None
    return g


def directional_check(f: Callable[[Tensor], Tensor], x: Tensor, h: float = 1e-6,
                      directions: int = 2, seed: int = 0) -> float:
    """Like :func:`grad_check`, but probes whole-tensor directions instead of coordinates.

    Compares <g, v> with (f(x + h v) - f(x - h v)) / 2h, where g is the tape
    gradient and v_i = s_i u_i with s_i = sign(g_i) (a random sign where g_i is
    zero) and u_i ~ U(0.5, 1.5). Every coordinate moves by about h and carries
    a random positive weight, so an error in any entry of g shifts the
    comparison almost surely, while <g, v> stays a weighted L1 norm of g: far
    above the round-off floor that makes single small-gradient coordinates
    unmeasurable in deep graphs.
    """
    if x.dtype != np.float64:
        raise TypeError("directional_check needs a 64-bit input")
    analytic = _analytic(f, x)
    rng = np.random.default_rng(seed)
    orig = x.data.copy()
    worst = 0.0
    for _ in range(directions):
        sign = np.sign(analytic)
        sign[sign == 0] = rng.choice([-1.0, 1.0], size=int(np.count_nonzero(sign == 0)))
        v = sign * rng.uniform(0.5, 1.5, size=x.shape)
        x.data[...] = orig + h * v
        fp = f(x).item()
        x.data[...] = orig - h * v
        fm = f(x).item()
        x.data[...] = orig
        numeric = (fp - fm) / (2.0 * h)
        a = float(np.sum(analytic * v))
        worst = max(worst, abs(a - numeric) / max(abs(a), abs(numeric), 1e-8))
    return worst
