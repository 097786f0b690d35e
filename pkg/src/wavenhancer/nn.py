"""Parameter initialization and layer helpers shared by the three stages.

Parameters live in a flat, insertion-ordered ``dict[str, Tensor]`` keyed by
dotted names, which is also the checkpoint order.
"""

from __future__ import annotations

import numpy as np

from .tensorad import Tensor, ops

Params = dict[str, Tensor]


def _uniform(rng: np.random.Generator, shape, fan_in: int, dtype) -> Tensor:
    bound = np.sqrt(1.0 / fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape).astype(dtype), requires_grad=True, dtype=dtype)


def init_conv(params: Params, name: str, cin: int, cout: int, k: int, rng: np.random.Generator, *,
              groups: int = 1, bias: bool = True, zero: bool = False, dtype=np.float32) -> None:
    fan_in = (cin // groups) * k * k
    shape = (cout, cin // groups, k, k)
    if zero:
        params[f"{name}.weight"] = Tensor(np.zeros(shape, dtype=dtype), requires_grad=True, dtype=dtype)
    else:
        params[f"{name}.weight"] = _uniform(rng, shape, fan_in, dtype)
    if bias:
        if zero:
            params[f"{name}.bias"] = Tensor(np.zeros(cout, dtype=dtype), requires_grad=True, dtype=dtype)
        else:
            params[f"{name}.bias"] = _uniform(rng, (cout,), fan_in, dtype)


def conv(x: Tensor, params: Params, name: str, *, groups: int = 1, stride: int = 1) -> Tensor:
    weight = params[f"{name}.weight"]
    k = weight.shape[-1]
    return ops.conv2d(x, weight, params.get(f"{name}.bias"), stride=stride, padding=k // 2, groups=groups)


def init_linear(params: Params, name: str, fan_in: int, fan_out: int, rng: np.random.Generator, *,
                bias_value: float | None = None, dtype=np.float32) -> None:
    params[f"{name}.weight"] = _uniform(rng, (fan_in, fan_out), fan_in, dtype)
    if bias_value is None:
        params[f"{name}.bias"] = _uniform(rng, (fan_out,), fan_in, dtype)
    else:
        params[f"{name}.bias"] = Tensor(np.full(fan_out, bias_value, dtype=dtype), requires_grad=True, dtype=dtype)


def linear(x: Tensor, params: Params, name: str) -> Tensor:
    return ops.matmul(x, params[f"{name}.weight"]) + params[f"{name}.bias"]


def init_layer_norm(params: Params, name: str, channels: int, dtype=np.float32) -> None:
    params[f"{name}.gain"] = Tensor(np.ones(channels, dtype=dtype), requires_grad=True, dtype=dtype)
    params[f"{name}.shift"] = Tensor(np.zeros(channels, dtype=dtype), requires_grad=True, dtype=dtype)


def layer_norm(x: Tensor, params: Params, name: str) -> Tensor:
    return ops.layer_norm_channel(x, params[f"{name}.gain"], params[f"{name}.shift"])


def count(params: Params) -> int:
    return sum(p.size for p in params.values())


def subset(params: Params, prefix: str) -> Params:
    return {k: v for k, v in params.items() if k.startswith(prefix)}


def check_multiple(shape, multiple: int, what: str) -> None:
    h, w = shape[-2:]
    if h % multiple or w % multiple:
        ph, pw = -h % multiple, -w % multiple
        raise ValueError(
            f"{what} needs spatial dims divisible by {multiple}, got {h}x{w}; "
            f"pad by ({ph}, {pw}) rows/cols to {h + ph}x{w + pw}"
        )
