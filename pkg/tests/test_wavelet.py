import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from wavenhancer.tensorad import Tape, Tensor, grad_check, ops
from wavenhancer.wavelet import WaveletBands, dwt2, idwt2

from conftest import t64

sizes = st.integers(1, 6).map(lambda k: 2 * k)


def test_constant_image():
    b = dwt2(t64(np.full((1, 3, 4, 6), 0.3)))
    np.testing.assert_allclose(b.ll.data, 0.6)
    for band in (b.lh, b.hl, b.hh):
        np.testing.assert_array_equal(band.data, 0.0)


def test_block_formula():
    b = dwt2(t64([[[[1.0, 2.0], [3.0, 4.0]]]]))
    assert (b.ll.data.item(), b.lh.data.item(), b.hl.data.item(), b.hh.data.item()) == (5.0, 2.0, 1.0, 0.0)


def test_480p_band_shapes():
    b = dwt2(Tensor(np.zeros((1, 3, 480, 720), dtype=np.float32)))
    assert {t.shape for t in (b.ll, b.lh, b.hl, b.hh)} == {(1, 3, 240, 360)}


def test_idwt_of_constant_ll():
    z = np.zeros((1, 3, 2, 2))
    out = idwt2(WaveletBands(t64(np.full((1, 3, 2, 2), 1.4)), t64(z), t64(z), t64(z))).data
    np.testing.assert_allclose(out, 0.7)


def test_band_shape_mismatch_errors():
    with pytest.raises(ValueError, match="shape"):
        WaveletBands(t64(np.zeros((1, 3, 2, 2))), t64(np.zeros((1, 3, 2, 2))),
                     t64(np.zeros((1, 3, 2, 3))), t64(np.zeros((1, 3, 2, 2))))


def test_perfect_reconstruction_float32():
    x = np.random.default_rng(0).uniform(size=(2, 3, 16, 10)).astype(np.float32)
    y = idwt2(dwt2(Tensor(x)))
    assert y.dtype == np.float32
    assert np.max(np.abs(y.data - x)) < 1e-6


@given(st.integers(0, 2 ** 31), sizes, sizes)
def test_perfect_reconstruction_float64(seed, h, w):
    x = np.random.default_rng(seed).normal(size=(1, 3, h, w))
    assert np.max(np.abs(idwt2(dwt2(t64(x))).data - x)) < 1e-12


@given(st.integers(0, 2 ** 31), sizes, sizes)
def test_parseval(seed, h, w):
    x = np.random.default_rng(seed).normal(size=(1, 2, h, w))
    b = dwt2(t64(x))
    energy = sum(float(np.sum(t.data ** 2)) for t in (b.ll, b.lh, b.hl, b.hh))
    assert abs(energy - np.sum(x ** 2)) <= 1e-4 * np.sum(x ** 2)


@given(st.integers(0, 2 ** 31), st.floats(-3, 3), st.floats(-3, 3))
def test_linearity(seed, alpha, beta):
    rng = np.random.default_rng(seed)
    x, y = rng.normal(size=(2, 1, 3, 4, 6))
    lhs = dwt2(t64(alpha * x + beta * y))
    bx, by = dwt2(t64(x)), dwt2(t64(y))
    for band in ("ll", "lh", "hl", "hh"):
        expect = alpha * getattr(bx, band).data + beta * getattr(by, band).data
        np.testing.assert_allclose(getattr(lhs, band).data, expect, atol=1e-5)


def test_horizontal_step_orientation():
    x = np.zeros((1, 1, 8, 8))
    x[..., 5:] = 1.0  # step between columns 4 and 5, inside block column 2
    b = dwt2(t64(x))
    np.testing.assert_array_equal(b.lh.data, 0.0)
    assert np.all(b.hl.data[..., 2] != 0.0)
    np.testing.assert_array_equal(np.delete(b.hl.data, 2, axis=-1), 0.0)
    # the transposed edge swaps the roles
    bt = dwt2(t64(x.transpose(0, 1, 3, 2)))
    np.testing.assert_array_equal(bt.hl.data, 0.0)
    assert np.all(bt.lh.data[..., 2, :] != 0.0)


@pytest.mark.parametrize("shape", [(1, 3, 5, 6), (1, 3, 6, 7), (2, 1, 7, 9)])
def test_odd_sizes_are_padded_and_cropped(shape):
    x = np.random.default_rng(1).normal(size=shape)
    b = dwt2(t64(x))
    assert b.padded == (shape[2] % 2 == 1, shape[3] % 2 == 1)
    assert b.ll.shape[-2:] == ((shape[2] + 1) // 2, (shape[3] + 1) // 2)
    np.testing.assert_allclose(idwt2(b).data, x, atol=1e-12)


def test_gradient_of_sum_idwt():
    rng = np.random.default_rng(2)
    ll, high = t64(rng.normal(size=(1, 3, 3, 3))), t64(rng.normal(size=(1, 9, 3, 3)))
    assert grad_check(lambda t: ops.sum(idwt2(WaveletBands.from_high(t, high))), ll) < 1e-4
    # each detail coefficient adds +-1/2 to its four pixels: the exact gradient
    # of the plain sum is zero, which a relative error cannot score
    high.requires_grad = True
    with Tape() as tape:
        total = ops.sum(idwt2(WaveletBands.from_high(ll, high)))
    tape.backward(total)
    np.testing.assert_array_equal(high.grad, 0.0)
    shifted = ops.sum(idwt2(WaveletBands.from_high(ll, t64(high.data + 1e-3)))).item()
    assert abs(shifted - total.item()) < 1e-12
    r = rng.normal(size=(1, 3, 6, 6))
    assert grad_check(lambda t: ops.sum(idwt2(WaveletBands.from_high(ll, t)) * r), high) < 1e-4


def test_high_roundtrip():
    b = dwt2(t64(np.random.default_rng(3).normal(size=(1, 3, 4, 4))))
    again = WaveletBands.from_high(b.ll, b.high)
    for band in ("lh", "hl", "hh"):
        np.testing.assert_array_equal(getattr(again, band).data, getattr(b, band).data)
