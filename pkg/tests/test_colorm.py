import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from skimage.color import rgb2lab
from skimage.metrics import structural_similarity

from wavenhancer import colorm
from wavenhancer.tensorad import grad_check, ops

from conftest import t64

colors = st.tuples(*[st.floats(0, 1)] * 3)


def frame(rgb, size=4):
    return np.broadcast_to(np.asarray(rgb, dtype=np.float64).reshape(1, 3, 1, 1), (1, 3, size, size)).copy()


def lab_of(rgb):
    return colorm.srgb_to_lab(t64(frame(rgb, 1))).data.reshape(3)


# ---------------------------------------------------------------- Lab

def test_white_and_black():
    np.testing.assert_allclose(lab_of((1, 1, 1)), [100, 0, 0], atol=1e-3)
    np.testing.assert_allclose(lab_of((0, 0, 0)), [0, 0, 0], atol=1e-12)


def test_pure_red_against_reference_formulas():
    np.testing.assert_allclose(lab_of((1, 0, 0)), [53.24, 80.09, 67.20], atol=0.05)


@given(colors)
def test_lab_matches_skimage(rgb):
    np.testing.assert_allclose(lab_of(rgb), rgb2lab(np.asarray(rgb).reshape(1, 1, 3)).reshape(3), atol=0.05)


def test_lightness_strictly_increasing_in_gray():
    grays = np.linspace(0, 1, 257)
    img = t64(np.broadcast_to(grays.reshape(1, 1, 1, -1), (1, 3, 1, 257)))
    light = colorm.lightness(img).data.reshape(-1)
    assert np.all(np.diff(light) > 0)
    assert np.all(light >= 0)


def test_inputs_are_clamped():
    np.testing.assert_allclose(lab_of((1.5, 1.2, 2.0)), lab_of((1, 1, 1)))
    np.testing.assert_allclose(lab_of((-0.5, 0, -1)), [0, 0, 0], atol=1e-12)


def test_lab_gradient_on_both_branches():
    rng = np.random.default_rng(0)
    x = t64(rng.uniform(0.1, 0.95, size=(1, 3, 3, 3)))
    r = rng.normal(size=x.shape)
    assert grad_check(lambda t: ops.sum(colorm.srgb_to_lab(t) * r), x) < 1e-4
    dark = t64(rng.uniform(0.001, 0.03, size=(1, 3, 3, 3)))
    assert grad_check(lambda t: ops.sum(colorm.srgb_to_lab(t) * r), dark) < 1e-4


def test_lab_gradient_finite_at_zero():
    from wavenhancer.tensorad import Tape
    x = t64(np.zeros((1, 3, 2, 2)), requires_grad=True)
    with Tape() as tape:
        y = ops.sum(colorm.srgb_to_lab(x))
    tape.backward(y)
    assert np.all(np.isfinite(x.grad))


# ---------------------------------------------------------------- Delta E

def test_delta_e_examples():
    x = np.random.default_rng(0).uniform(size=(1, 3, 8, 8))
    assert colorm.delta_e(x, x) == 0.0
    assert abs(colorm.delta_e(frame((1, 1, 1)), frame((0, 0, 0))) - 100.0) < 1e-6


def test_delta_e_red_green_is_lab_distance():
    expect = np.linalg.norm(rgb2lab(np.array([[[1.0, 0, 0]]])) - rgb2lab(np.array([[[0, 1.0, 0]]])))
    assert colorm.delta_e(frame((1, 0, 0)), frame((0, 1, 0))) == pytest.approx(expect, abs=0.1)
    exact = np.linalg.norm(lab_of((1, 0, 0)) - lab_of((0, 1, 0)))
    assert colorm.delta_e(frame((1, 0, 0)), frame((0, 1, 0))) == pytest.approx(exact, abs=1e-9)


@given(colors, colors, colors)
def test_delta_e_metric_axioms(a, b, c):
    fa, fb, fc = frame(a), frame(b), frame(c)
    assert colorm.delta_e(fa, fa) == 0.0
    assert colorm.delta_e(fa, fb) == pytest.approx(colorm.delta_e(fb, fa), abs=1e-9)
    assert colorm.delta_e(fa, fc) <= colorm.delta_e(fa, fb) + colorm.delta_e(fb, fc) + 1e-6


def test_delta_e_shape_mismatch():
    with pytest.raises(ValueError):
        colorm.delta_e(np.zeros((1, 3, 2, 2)), np.zeros((1, 3, 2, 3)))


# ---------------------------------------------------------------- PSNR

def test_psnr_one_level_step():
    x = np.random.default_rng(0).uniform(0, 0.9, size=(1, 3, 16, 16))
    assert colorm.psnr(x, x + 1 / 255) == pytest.approx(20 * math.log10(255), abs=1e-3)
    assert colorm.psnr(x, x + 1 / 255) == pytest.approx(48.131, abs=1e-3)


def test_psnr_identical_and_tenth():
    x = np.random.default_rng(1).uniform(size=(1, 3, 8, 8))
    assert colorm.psnr(x, x) == math.inf
    assert colorm.psnr(x, x + 0.1) == pytest.approx(20.0, abs=1e-3)


def test_psnr_monotone_in_noise():
    rng = np.random.default_rng(2)
    x = rng.uniform(size=(1, 3, 32, 32))
    noise = rng.normal(size=x.shape)
    values = [colorm.psnr(x, x + s * noise) for s in (0.01, 0.05, 0.1)]
    assert values[0] > values[1] > values[2]


def test_psnr_shape_mismatch():
    with pytest.raises(ValueError):
        colorm.psnr(np.zeros((2, 2)), np.zeros((2, 3)))


# ---------------------------------------------------------------- SSIM

def test_ssim_identity():
    x = np.random.default_rng(0).uniform(size=(1, 3, 24, 24))
    assert colorm.ssim(x, x) == pytest.approx(1.0, abs=1e-6)


def test_ssim_inverted_below_one():
    x = np.random.default_rng(1).uniform(size=(1, 3, 24, 24))
    assert colorm.ssim(x, 1 - x) < 1.0


def test_ssim_constant_frames_closed_form():
    c1 = 0.01 ** 2
    # zero variances: the contrast-structure term is c2/c2 = 1
    expect = (2 * 0.5 * 0.6 + c1) / (0.5 ** 2 + 0.6 ** 2 + c1)
    assert colorm.ssim(np.full((1, 1, 16, 16), 0.5), np.full((1, 1, 16, 16), 0.6)) == pytest.approx(expect, abs=1e-12)


@given(st.integers(0, 2 ** 31), st.floats(0.01, 0.3))
def test_ssim_matches_skimage(seed, noise):
    rng = np.random.default_rng(seed)
    a = rng.uniform(size=(20, 23))
    b = np.clip(a + noise * rng.normal(size=a.shape), 0, 1)
    ref = structural_similarity(a, b, data_range=1.0, gaussian_weights=True, sigma=1.5,
                                use_sample_covariance=False)
    assert colorm.ssim(a[None, None], b[None, None]) == pytest.approx(ref, abs=1e-6)


def test_ssim_too_small_errors():
    with pytest.raises(ValueError, match="window"):
        colorm.ssim(np.zeros((1, 1, 10, 20)), np.zeros((1, 1, 10, 20)))


@given(st.integers(0, 2 ** 31))
def test_ssim_and_ms_ssim_below_one_unless_identical(seed):
    rng = np.random.default_rng(seed)
    a = rng.uniform(size=(1, 3, 48, 48))
    b = np.clip(a + 0.05 * rng.normal(size=a.shape), 0, 1)
    s = colorm.ssim(a, b)
    m = colorm.ms_ssim(t64(a), t64(b)).item()
    assert 0 < s < 1 and 0 < m < 1


# ---------------------------------------------------------------- MS-SSIM

def test_ms_ssim_identity_and_weights():
    x = t64(np.random.default_rng(0).uniform(size=(1, 1, 176, 176)))
    assert colorm.ms_ssim_scales(176, 176) == 5
    assert colorm.ms_ssim(x, x).item() == pytest.approx(1.0, abs=1e-6)
    # the published exponents sum to 1.0001; the applied ones are renormalized
    assert sum(colorm.MS_SSIM_WEIGHTS) == pytest.approx(1.0001, abs=1e-12)
    for k in range(1, 6):
        assert colorm.ms_ssim_weights(k).sum() == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("side,scales", [(11, 1), (21, 1), (22, 2), (43, 2), (44, 3), (88, 4), (175, 4), (176, 5), (480, 5)])
def test_ms_ssim_scale_count(side, scales):
    assert colorm.ms_ssim_scales(side, side + 7) == scales


def test_single_scale_ms_ssim_equals_ssim():
    rng = np.random.default_rng(3)
    a = rng.uniform(size=(1, 1, 16, 16))
    b = np.clip(a + 0.1 * rng.normal(size=a.shape), 0, 1)
    assert colorm.ms_ssim(t64(a), t64(b)).item() == pytest.approx(colorm.ssim(a, b), abs=1e-12)


def test_ms_ssim_decreases_with_noise():
    rng = np.random.default_rng(4)
    x = rng.uniform(size=(1, 1, 64, 64))
    noise = rng.normal(size=x.shape)
    values = [colorm.ms_ssim(t64(x), t64(x + s * noise)).item() for s in (0.01, 0.05, 0.1)]
    assert values[0] > values[1] > values[2]


def test_ms_ssim_too_small_errors():
    with pytest.raises(ValueError):
        colorm.ms_ssim(t64(np.zeros((1, 1, 8, 8))), t64(np.zeros((1, 1, 8, 8))))


def test_ms_ssim_gradient():
    rng = np.random.default_rng(5)
    x = t64(rng.uniform(0.1, 0.9, size=(1, 1, 5, 5)))
    ref = t64(np.clip(ops.upsample_nearest(x, 6).data + rng.normal(0, 0.2, size=(1, 1, 30, 30)), 0, 1))
    assert grad_check(lambda t: colorm.ms_ssim(ops.upsample_nearest(t, 6), ref) * 10.0, x) < 1e-4
