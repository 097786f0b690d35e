"""Minimal dense tensors with reverse-mode differentiation."""

from . import ops
from .check import directional_check, grad_check
from .core import NonFiniteError, Tape, TapeError, Tensor, backward, debug_enabled, set_debug, zero_grad
from .optim import AdamState, adam_step

__all__ = [
    "AdamState",
    "NonFiniteError",
    "Tape",
    "TapeError",
    "Tensor",
    "adam_step",
    "backward",
    "debug_enabled",
    "directional_check",
    "grad_check",
    "ops",
    "set_debug",
    "zero_grad",
]
