"""Signal-quality metrics: PSNR and a 1-D SSIM.

Both treat cycles as [0, 1]-valued traces (dynamic range 1.0).  SSIM uses
the standard image defaults transplanted to one dimension: window 11,
Gaussian weights with sigma 1.5, K1 = 0.01, K2 = 0.03.
"""

from __future__ import annotations

import math

import numpy as np

PSNR_CAP_DB = 100.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
DYNAMIC_RANGE = 1.0


def _check_pair(ref, pred) -> tuple[np.ndarray, np.ndarray]:
    r = np.asarray(ref, dtype=np.float64)
    p = np.asarray(pred, dtype=np.float64)
    if r.shape != p.shape:
        raise ValueError(f"length mismatch: {r.shape} vs {p.shape}")
    if r.ndim != 1 or r.size < 1:
        raise ValueError(f"expected non-empty 1-D arrays, got shape {r.shape}")
    return r, p


def psnr(ref, pred) -> float:
    """Peak signal-to-noise ratio in dB, capped at 100 so aggregates stay finite."""
    r, p = _check_pair(ref, pred)
    mse = float(np.mean((r - p) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * math.log10(DYNAMIC_RANGE**2 / mse))


def _gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    w = np.exp(-(x**2) / (2.0 * sigma**2))
    return w / w.sum()


def ssim_1d(ref, pred, window: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> float:
    """Mean structural similarity over sliding Gaussian-weighted windows."""
    r, p = _check_pair(ref, pred)
    if r.size < window:
        raise ValueError(f"signals of length {r.size} shorter than SSIM window {window}")
    w = _gaussian_window(window, sigma)
    # Weighted local moments via sliding windows (valid positions only).
    rw = np.lib.stride_tricks.sliding_window_view(r, window)
    pw = np.lib.stride_tricks.sliding_window_view(p, window)
    mu_r = rw @ w
    mu_p = pw @ w
    var_r = (rw**2) @ w - mu_r**2
    var_p = (pw**2) @ w - mu_p**2
    cov = (rw * pw) @ w - mu_r * mu_p
    c1 = (SSIM_K1 * DYNAMIC_RANGE) ** 2
    c2 = (SSIM_K2 * DYNAMIC_RANGE) ** 2
    num = (2.0 * mu_r * mu_p + c1) * (2.0 * cov + c2)
    den = (mu_r**2 + mu_p**2 + c1) * (var_r + var_p + c2)
    return float(np.mean(num / den))
