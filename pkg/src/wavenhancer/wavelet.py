"""Single-level orthonormal 2-D Haar transform.

For each 2x2 block [[a, b], [c, d]] of every channel::

    ll = ( a + b + c + d) / 2
    lh = (-a - b + c + d) / 2     # bottom row minus top row
    hl = (-a + b - c + d) / 2     # right column minus left column
    hh = ( a - b - c + d) / 2

The 4x4 matrix is symmetric and orthogonal, so the inverse uses the same
coefficients. Both directions are built from differentiable tensor ops.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensorad import Tensor, ops


@dataclass
class WaveletBands:
    ll: Tensor
    lh: Tensor
    hl: Tensor
    hh: Tensor
    padded: tuple[bool, bool] = (False, False)

    def __post_init__(self):
        shapes = {self.ll.shape, self.lh.shape, self.hl.shape, self.hh.shape}
        if len(shapes) != 1:
            raise ValueError(f"wavelet bands disagree in shape: {sorted(shapes)}")

    @property
    def high(self) -> Tensor:
        """LH, HL, HH stacked along channels: (N, 3C, h, w)."""
        return ops.concat([self.lh, self.hl, self.hh], axis=1)

    @classmethod
    def from_high(cls, ll: Tensor, high: Tensor, padded=(False, False)) -> "WaveletBands":
        lh, hl, hh = ops.split(high, 3, axis=1)
        return cls(ll, lh, hl, hh, padded)


def _reflect_pad_odd(image: Tensor) -> tuple[Tensor, tuple[bool, bool]]:
    h, w = image.shape[-2:]
    pad_h, pad_w = h % 2, w % 2
    if not (pad_h or pad_w):
        return image, (False, False)
    if (pad_h and h < 2) or (pad_w and w < 2):
        raise ValueError(f"cannot reflect-pad image of shape {image.shape}")
    # reflect of one row/column = copy of the second-to-last one
    rows = list(range(h)) + ([h - 2] if pad_h else [])
    cols = list(range(w)) + ([w - 2] if pad_w else [])
    padded = ops.getitem(image, (slice(None), slice(None), np.array(rows)[:, None], np.array(cols)[None, :]))
    return padded, (bool(pad_h), bool(pad_w))


def dwt2(image: Tensor) -> WaveletBands:
    """Split (N, C, H, W) into four (N, C, H/2, W/2) bands.

    Odd H or W is reflect-padded by one on the bottom/right; the flag is kept
    on the result so :func:`idwt2` crops it away again.
    """
    if image.ndim != 4:
        raise ValueError(f"dwt2 expects (N, C, H, W), got {image.shape}")
    image, padded = _reflect_pad_odd(image)
    n, c, h, w = image.shape
    blocks = ops.reshape(image, (n, c, h // 2, 2, w // 2, 2))
    a = blocks[:, :, :, 0, :, 0]
    b = blocks[:, :, :, 0, :, 1]
    cc = blocks[:, :, :, 1, :, 0]
    d = blocks[:, :, :, 1, :, 1]
    s1 = a + b
    s2 = cc + d
    d1 = b - a
    d2 = d - cc
    ll = (s1 + s2) * 0.5
    lh = (s2 - s1) * 0.5
    hl = (d1 + d2) * 0.5
    hh = (d2 - d1) * 0.5
    return WaveletBands(ll, lh, hl, hh, padded)


def idwt2(bands: WaveletBands) -> Tensor:
    ll, lh, hl, hh = bands.ll, bands.lh, bands.hl, bands.hh
    if ll.ndim != 4:
        raise ValueError(f"idwt2 expects 4-D bands, got {ll.shape}")
    a = (ll - lh - hl + hh) * 0.5
    b = (ll - lh + hl - hh) * 0.5
    c = (ll + lh - hl - hh) * 0.5
    d = (ll + lh + hl + hh) * 0.5
    n, ch, h2, w2 = ll.shape
    top = ops.concat([ops.reshape(a, (n, ch, h2, w2, 1)), ops.reshape(b, (n, ch, h2, w2, 1))], axis=4)
    bottom = ops.concat([ops.reshape(c, (n, ch, h2, w2, 1)), ops.reshape(d, (n, ch, h2, w2, 1))], axis=4)
    top = ops.reshape(top, (n, ch, h2, 1, w2 * 2))
    bottom = ops.reshape(bottom, (n, ch, h2, 1, w2 * 2))
    image = ops.reshape(ops.concat([top, bottom], axis=3), (n, ch, h2 * 2, w2 * 2))
    pad_h, pad_w = bands.padded
    if pad_h or pad_w:
        image = image[:, :, : h2 * 2 - int(pad_h), : w2 * 2 - int(pad_w)]
    return image
