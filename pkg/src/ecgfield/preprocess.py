"""Signal preprocessing: resampling, amplitude normalization, demarcation
rescaling, and optional baseline-drift removal.

All functions are pure and operate on 1-D float arrays.
"""

from __future__ import annotations

import math

import numpy as np


class DegenerateSignalError(ValueError):
    """Signal too short to process."""


def resample(signal: np.ndarray, from_rate: float, to_rate: float) -> np.ndarray:
    """Linearly resample onto a uniform grid, preserving both endpoints.

    The output has ``round((len - 1) * to_rate / from_rate) + 1`` samples,
    so the spanned duration is kept and the first/last samples are
    reproduced exactly.  Equal rates return a copy of the input.
    """
    if from_rate <= 0 or to_rate <= 0:
        raise ValueError("sampling rates must be positive")
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1 or x.size < 2:
        raise DegenerateSignalError(f"need at least 2 samples to resample, got shape {x.shape}")
    if from_rate == to_rate:
        return x.copy()
    n_out = int(round((x.size - 1) * to_rate / from_rate)) + 1
    return resample_to_length(x, n_out)


def resample_to_length(signal: np.ndarray, n_out: int) -> np.ndarray:
    """Linearly interpolate a signal onto ``n_out`` evenly spaced samples."""
    x = np.asarray(signal, dtype=np.float64)
    if x.ndim != 1 or x.size < 2:
        raise DegenerateSignalError(f"need at least 2 samples to resample, got shape {x.shape}")
    if n_out < 2:
        raise ValueError("output length must be >= 2")
    if n_out == x.size:
        return x.copy()
    pos = np.linspace(0.0, x.size - 1, n_out)
    return np.interp(pos, np.arange(x.size), x)


def normalize(signal: np.ndarray) -> np.ndarray:
    """Min-max scale a signal to [0, 1].

    Constant signals map to all-0.5: flat traces are legitimate (a view
    orthogonal to the source) and must not error.
    """
    x = np.asarray(signal, dtype=np.float64)
    if x.size == 0:
        raise ValueError("cannot normalize an empty signal")
    lo = x.min()
    hi = x.max()
    if hi == lo:
        return np.full_like(x, 0.5)
    return (x - lo) / (hi - lo)


def rescale_demarcations(demarcations, t_old: int, t_new: int) -> np.ndarray:
    """Map demarcation indices from a length-``t_old`` grid to ``t_new``.

    Indices scale by ``t_new / t_old`` and round half-up.  Strict
    monotonicity is then restored deterministically: a forward pass shifts
    collisions up by one sample, and a backward pass pulls any overflow at
    the tail back down.  The end points map to 0 and ``t_new`` exactly.
    """
    d = np.asarray(demarcations, dtype=np.int64)
    if d.ndim != 1 or d.size != 7:
        raise ValueError(f"expected 7 demarcation points, got shape {d.shape}")
    if d[0] != 0 or d[-1] != t_old:
        raise ValueError(f"demarcations must span [0, {t_old}], got {d.tolist()}")
    if np.any(np.diff(d) <= 0):
        raise ValueError(f"demarcations must be strictly increasing, got {d.tolist()}")
    if t_new < d.size - 1:
        raise ValueError(f"target length {t_new} too short for {d.size - 1} deflections")
    scale = t_new / t_old
    out = np.floor(d * scale + 0.5).astype(np.int64)  # round half-up
    out[0] = 0
    out[-1] = t_new
    for i in range(1, out.size - 1):
        if out[i] <= out[i - 1]:
            out[i] = out[i - 1] + 1
    for i in range(out.size - 2, 0, -1):
        if out[i] >= out[i + 1]:
            out[i] = out[i + 1] - 1
    return out


def remove_baseline_drift(signal: np.ndarray, sampling_rate: float, window_s: float = 0.2) -> np.ndarray:
    """Subtract a centered moving-average baseline (default 0.2 s window).

    A lightweight stand-in for dedicated de-noising packages; disabled by
    default in the loading pipeline since synthetic data needs none.
    """
    x = np.asarray(signal, dtype=np.float64)
    if x.size == 0:
        raise ValueError("empty signal")
    w = max(1, int(round(window_s * sampling_rate)))
    if w % 2 == 0:
        w += 1
    if w >= x.size:
        return x - x.mean()
    pad = w // 2
    padded = np.pad(x, pad, mode="edge")
    kernel = np.full(w, 1.0 / w)
    baseline = np.convolve(padded, kernel, mode="valid")
    return x - baseline


def round_half_up(x: float) -> int:
    """Round to nearest integer with ties going up."""
    return int(math.floor(x + 0.5))
