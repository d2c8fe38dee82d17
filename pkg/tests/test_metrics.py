"""Tests for PSNR, SSIM and VIF against independently written oracles."""

import math

import numpy as np
import pytest

from srfidelity.errors import DegenerateInputError
from srfidelity.imgcore import LumaPlane, blur_array
from srfidelity.metrics import MetricValue, mse, psnr, ssim, vif

# ---------------------------------------------------------------- oracles


def mse_loop_oracle(a, b):
    total = 0.0
    h, w = a.shape
    for i in range(h):
        for j in range(w):
            d = a[i, j] - b[i, j]
            total += d * d
    return total / (h * w)


def gaussian_window_oracle(size, sigma):
    half = (size - 1) / 2.0
    g = [math.exp(-((i - half) ** 2) / (2 * sigma**2)) for i in range(size)]
    win = np.array([[gi * gj for gj in g] for gi in g])
    return win / win.sum()


def ssim_direct_oracle(a, b):
    # Position-by-position windowed statistics; no convolution shortcuts.
    c1 = (0.01 * 255) ** 2
    c2 = (0.03 * 255) ** 2
    win = gaussian_window_oracle(11, 1.5)
    h, w = a.shape
    vals = []
    for i in range(h - 10):
        for j in range(w - 10):
            pa = a[i : i + 11, j : j + 11]
            pb = b[i : i + 11, j : j + 11]
            mu_a = (pa * win).sum()
            mu_b = (pb * win).sum()
            var_a = (pa * pa * win).sum() - mu_a**2
            var_b = (pb * pb * win).sum() - mu_b**2
            cov = (pa * pb * win).sum() - mu_a * mu_b
            var_a = max(var_a, 0.0)
            var_b = max(var_b, 0.0)
            num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
            den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
            vals.append(num / den)
    return sum(vals) / len(vals)


def vif_straightline_oracle(ref, dist):
    # Same formula, written independently with explicit window sweeps.
    sigma_n = 2.0
    eps = 1e-10
    num = 0.0
    den = 0.0
    x = ref.astype(np.float64)
    y = dist.astype(np.float64)
    for k in (1, 2, 3, 4):
        size = 2 ** (5 - k) + 1
        win = gaussian_window_oracle(size, size / 5.0)
        if k > 1:
            if x.shape[0] < size or x.shape[1] < size:
                break
            x = _window_sweep_filter(x, win)[::2, ::2]
            y = _window_sweep_filter(y, win)[::2, ::2]
        if x.shape[0] < size or x.shape[1] < size:
            break
        h, w = x.shape
        for i in range(h - size + 1):
            for j in range(w - size + 1):
                px = x[i : i + size, j : j + size]
                py = y[i : i + size, j : j + size]
                mu_x = (px * win).sum()
                mu_y = (py * win).sum()
                var_x = max((px * px * win).sum() - mu_x**2, 0.0)
                var_y = max((py * py * win).sum() - mu_y**2, 0.0)
                cov = (px * py * win).sum() - mu_x * mu_y
                g = cov / (var_x + eps)
                sv2 = var_y - g * cov
                if g < 0.0:
                    g = 0.0
                if sv2 < eps:
                    sv2 = eps
                num += math.log10(1 + g * g * var_x / (sv2 + sigma_n))
                den += math.log10(1 + var_x / sigma_n)
    return num / den


def _window_sweep_filter(arr, win):
    size = win.shape[0]
    h, w = arr.shape
    out = np.empty((h - size + 1, w - size + 1))
    fwin = win[::-1, ::-1]  # convolution orientation
    for i in range(out.shape[0]):
        for j in range(out.shape[1]):
            out[i, j] = (arr[i : i + size, j : j + size] * fwin).sum()
    return out


def natural_image(seed, size=96):
    # Multi-octave smoothed noise spanning most of the 8-bit range; gives
    # spatially varying local statistics like a photograph.
    rng = np.random.default_rng(seed)
    acc = np.zeros((size, size))
    for sigma, weight in ((8.0, 4.0), (4.0, 2.0), (2.0, 1.0), (1.0, 0.5)):
        acc += weight * blur_array(rng.uniform(-1.0, 1.0, (size, size)), sigma)
    lo, hi = acc.min(), acc.max()
    return (acc - lo) / (hi - lo) * 215.0 + 20.0


def planes(a, b):
    return LumaPlane.from_array(a), LumaPlane.from_array(b)


# ---------------------------------------------------------------- mse/psnr


def test_mse_identical_zero():
    x = LumaPlane.from_array(np.full((8, 8), 42.0))
    assert mse(x, x) == 0.0


def test_mse_uniform_unit_difference():
    a, b = planes(np.full((8, 8), 100.0), np.full((8, 8), 101.0))
    assert mse(a, b) == 1.0


def test_mse_matches_loop_oracle():
    rng = np.random.default_rng(30)
    xa = rng.uniform(0, 255, (16, 16))
    xb = rng.uniform(0, 255, (16, 16))
    a, b = planes(xa, xb)
    assert abs(mse(a, b) - mse_loop_oracle(xa, xb)) < 1e-9
    assert mse(a, b) == mse(b, a)


def test_mse_dimension_mismatch():
    a = LumaPlane.from_array(np.zeros((8, 8)))
    b = LumaPlane.from_array(np.zeros((8, 9)))
    with pytest.raises(ValueError):
        mse(a, b)


def test_psnr_identical_infinite():
    x = LumaPlane.from_array(np.full((8, 8), 10.0))
    v = psnr(x, x)
    assert v.infinite
    assert v.value == math.inf
    assert v.orientation == "higher_is_better"


def test_psnr_unit_difference_closed_form():
    a, b = planes(np.full((8, 8), 100.0), np.full((8, 8), 101.0))
    v = psnr(a, b)
    assert not v.infinite
    assert abs(v.value - 48.1308) < 1e-3
    assert abs(v.value - 20 * math.log10(255)) < 1e-9


def test_psnr_consistent_with_mse():
    rng = np.random.default_rng(31)
    a, b = planes(rng.uniform(0, 255, (12, 12)), rng.uniform(0, 255, (12, 12)))
    assert psnr(a, b).value == 10 * math.log10(255**2 / mse(a, b))


def test_psnr_decreases_with_error_magnitude():
    base = np.full((8, 8), 100.0)
    vals = [
        psnr(*planes(base, base + delta)).value for delta in (1.0, 2.0, 5.0, 20.0)
    ]
    assert all(vals[i] > vals[i + 1] for i in range(len(vals) - 1))


# ---------------------------------------------------------------- ssim


def test_ssim_identity():
    rng = np.random.default_rng(32)
    x = LumaPlane.from_array(rng.uniform(0, 255, (32, 32)))
    assert abs(ssim(x, x).value - 1.0) < 1e-9


def test_ssim_uniform_luminance_closed_form():
    a, b = planes(np.full((16, 16), 100.0), np.full((16, 16), 155.0))
    want = (2 * 100 * 155 + 6.5025) / (100**2 + 155**2 + 6.5025)
    assert abs(ssim(a, b).value - want) < 1e-4
    assert abs(ssim(a, b).value - 0.91111) < 1e-4


@pytest.mark.parametrize("seed", range(5))
def test_ssim_matches_direct_oracle(seed):
    rng = np.random.default_rng(100 + seed)
    xa = rng.uniform(0, 255, (64, 64))
    xb = np.clip(xa + rng.normal(0, 12, xa.shape), 0, 255)
    a, b = planes(xa, xb)
    assert abs(ssim(a, b).value - ssim_direct_oracle(xa, xb)) < 1e-6


def test_ssim_symmetry_and_bound():
    rng = np.random.default_rng(33)
    xa = rng.uniform(0, 255, (24, 24))
    xb = rng.uniform(0, 255, (24, 24))
    a, b = planes(xa, xb)
    assert abs(ssim(a, b).value - ssim(b, a).value) < 1e-9
    assert ssim(a, b).value <= 1.0
    assert ssim(a, b).value < 1.0 - 1e-6  # unrelated images far from equality


def test_ssim_too_small_rejected():
    a = LumaPlane.from_array(np.zeros((10, 11)))
    with pytest.raises(ValueError):
        ssim(a, a)


# ---------------------------------------------------------------- vif


@pytest.mark.parametrize("seed", range(5))
def test_vif_self_is_one(seed):
    x = LumaPlane.from_array(natural_image(seed))
    assert abs(vif(x, x).value - 1.0) < 1e-6


@pytest.mark.parametrize("seed", range(5))
def test_vif_decreases_with_blur(seed):
    img = natural_image(seed)
    x = LumaPlane.from_array(img)
    vals = [
        vif(x, LumaPlane.from_array(blur_array(img, s))).value
        for s in (0.5, 1.0, 2.0, 3.0)
    ]
    assert all(vals[i] > vals[i + 1] for i in range(len(vals) - 1)), vals


def test_vif_matches_straightline_oracle():
    img = natural_image(0, size=48)  # oracle is O(n^2); keep it small
    blurred = blur_array(img, 1.0)
    got = vif(LumaPlane.from_array(img), LumaPlane.from_array(blurred)).value
    want = vif_straightline_oracle(img, blurred)
    assert abs(got - want) < 1e-6


def test_vif_nonnegative_and_asymmetric():
    img = natural_image(1)
    noisy = np.clip(img + np.random.default_rng(34).normal(0, 25, img.shape), 0, 255)
    a, b = planes(img, noisy)
    forward = vif(a, b).value
    backward = vif(b, a).value
    assert forward >= 0.0
    assert forward != backward


def test_vif_constant_reference_degenerate():
    flat = LumaPlane.from_array(np.full((64, 64), 128.0))
    other = LumaPlane.from_array(natural_image(2, size=64))
    with pytest.raises(DegenerateInputError):
        vif(flat, other)


def test_vif_size_checks():
    a = LumaPlane.from_array(np.zeros((31, 64)))
    with pytest.raises(ValueError):
        vif(a, a)
    b = LumaPlane.from_array(np.zeros((64, 64)))
    c = LumaPlane.from_array(np.zeros((64, 32)))
    with pytest.raises(ValueError):
        vif(b, c)


# ---------------------------------------------------------------- value type


def test_metric_value_fields():
    v = MetricValue("ssim", 0.5)
    assert v.orientation == "higher_is_better"
    assert not v.infinite
