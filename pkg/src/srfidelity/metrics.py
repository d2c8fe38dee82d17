"""Native full-reference metrics computed on luma planes: PSNR, SSIM, VIF.

All three are deterministic pure functions of their operands. PSNR carries
an explicit infinite flag for the zero-MSE case instead of a sentinel
number, so downstream rank statistics stay uncorrupted.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import convolve2d

from .errors import DegenerateInputError
from .imgcore import LumaPlane

__all__ = ["MetricValue", "mse", "psnr", "ssim", "vif", "METRICS"]

PEAK = 255.0

# SSIM constants per the standard parameterization on 8-bit range.
_SSIM_C1 = (0.01 * PEAK) ** 2
_SSIM_C2 = (0.03 * PEAK) ** 2
_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5

_VIF_SIGMA_N_SQ = 2.0
_VIF_EPS = 1e-10


@dataclass(frozen=True)
class MetricValue:
    """A named score with its comparison orientation.

    ``infinite`` is only ever set for PSNR with zero MSE; ``value`` is
    +inf in that case.
    """

    name: str
    value: float
    orientation: str = "higher_is_better"
    infinite: bool = False


def _check_pair(a: LumaPlane, b: LumaPlane):
    if (a.width, a.height) != (b.width, b.height):
        raise ValueError(
            f"dimension mismatch: {a.width}x{a.height} vs {b.width}x{b.height}"
        )


def mse(a: LumaPlane, b: LumaPlane) -> float:
    """Mean squared error over all samples."""
    _check_pair(a, b)
    diff = a.data - b.data
    return float(np.mean(diff * diff))


def psnr(a: LumaPlane, b: LumaPlane) -> MetricValue:
    """Peak signal-to-noise ratio, 10*log10(255^2 / MSE), in dB.

    Identical planes have zero MSE; the result is flagged infinite rather
    than clipped to a large finite number.
    """
    err = mse(a, b)
    if err == 0.0:
        return MetricValue("psnr", math.inf, infinite=True)
    return MetricValue("psnr", 10.0 * math.log10(PEAK**2 / err))


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    ax = np.arange(size, dtype=np.float64) - half
    g = np.exp(-(ax**2) / (2.0 * sigma**2))
    win = np.outer(g, g)
    return win / win.sum()


def _windowed_moments(x: np.ndarray, y: np.ndarray, win: np.ndarray):
    # Weighted local moments over every position where the window fits.
    mu_x = convolve2d(x, win, mode="valid")
    mu_y = convolve2d(y, win, mode="valid")
    sigma_x = convolve2d(x * x, win, mode="valid") - mu_x * mu_x
    sigma_y = convolve2d(y * y, win, mode="valid") - mu_y * mu_y
    sigma_xy = convolve2d(x * y, win, mode="valid") - mu_x * mu_y
    np.maximum(sigma_x, 0.0, out=sigma_x)
    np.maximum(sigma_y, 0.0, out=sigma_y)
    return mu_x, mu_y, sigma_x, sigma_y, sigma_xy


def ssim(a: LumaPlane, b: LumaPlane) -> MetricValue:
    """Mean structural similarity with an 11x11 Gaussian window, sigma 1.5.

    The similarity map is restricted to the valid region (positions where
    the full window fits), so no padding convention enters the result.

    Parameters
    ----------
    a, b : LumaPlane
      Operands of identical dimensions, at least 11x11.

    Returns
    -------
    MetricValue
      Mean SSIM in [-1, 1]; 1.0 iff the planes agree on the valid region.
    """
    _check_pair(a, b)
    if a.width < _SSIM_WINDOW or a.height < _SSIM_WINDOW:
        raise ValueError(
            f"ssim needs at least {_SSIM_WINDOW}x{_SSIM_WINDOW}, got {a.width}x{a.height}"
        )
    win = _gaussian_window(_SSIM_WINDOW, _SSIM_SIGMA)
    mu_x, mu_y, sigma_x, sigma_y, sigma_xy = _windowed_moments(a.data, b.data, win)
    num = (2.0 * mu_x * mu_y + _SSIM_C1) * (2.0 * sigma_xy + _SSIM_C2)
    den = (mu_x**2 + mu_y**2 + _SSIM_C1) * (sigma_x + sigma_y + _SSIM_C2)
    return MetricValue("ssim", float(np.mean(num / den)))


def _vif_window(k: int) -> tuple[np.ndarray, int]:
    size = 2 ** (5 - k) + 1  # 17, 9, 5, 3 across the four scales
    return _gaussian_window(size, size / 5.0), size


def vif(ref: LumaPlane, dist: LumaPlane) -> MetricValue:
    """Pixel-domain visual information fidelity over 4 scales.

    Per scale the images are Gaussian-filtered (window std = size/5 with
    sizes 17, 9, 5, 3) and, from the second scale on, downsampled by 2
    after filtering. Local means, variances and covariance over the same
    window parameterize a gain-plus-noise channel: g = cov/(var_ref + eps),
    residual sv2 = var_dist - g*cov, floored at g >= 0 and sv2 >= eps.
    The score is the ratio of accumulated log10(1 + g^2*var_ref/(sv2 + s_n))
    to log10(1 + var_ref/s_n) with visual noise s_n = 2.

    The reference goes first; the metric is intentionally asymmetric.
    Raises DegenerateInputError when the reference is constant at every
    scale (the denominator is undefined).
    """
    _check_pair(ref, dist)
    if ref.width < 32 or ref.height < 32:
        raise ValueError(f"vif needs at least 32x32, got {ref.width}x{ref.height}")
    # With stride-1 windows the denominator is zero exactly when the
    # reference is globally constant; test that directly so float residue
    # in the windowed moments cannot mask it.
    if np.ptp(ref.data) == 0.0:
        raise DegenerateInputError("vif is undefined for a constant reference image")

    x = ref.data.copy()
    y = dist.data.copy()
    num = 0.0
    den = 0.0
    for k in range(1, 5):
        win, size = _vif_window(k)
        if k > 1:
            if x.shape[0] < size or x.shape[1] < size:
                break
            x = convolve2d(x, win, mode="valid")[::2, ::2]
            y = convolve2d(y, win, mode="valid")[::2, ::2]
        if x.shape[0] < size or x.shape[1] < size:
            break
        _, _, sigma_x, sigma_y, sigma_xy = _windowed_moments(x, y, win)

        g = sigma_xy / (sigma_x + _VIF_EPS)
        sv2 = sigma_y - g * sigma_xy
        np.maximum(g, 0.0, out=g)
        np.maximum(sv2, _VIF_EPS, out=sv2)

        num += float(np.sum(np.log10(1.0 + g * g * sigma_x / (sv2 + _VIF_SIGMA_N_SQ))))
        den += float(np.sum(np.log10(1.0 + sigma_x / _VIF_SIGMA_N_SQ)))

    if den == 0.0:
        raise DegenerateInputError("vif is undefined for a constant reference image")
    return MetricValue("vif", num / den)


METRICS = {"psnr": psnr, "ssim": ssim, "vif": vif}
