"""Input-validation helpers shared by the estimator and data paths."""

from __future__ import annotations

import numpy as np

from .data import MultiViewCycle
from .viewpoints import Viewpoint, resolve_view


def check_cycles(X) -> list[MultiViewCycle]:
    """Validate a list of multi-view cycles with consistent lengths."""
    if isinstance(X, MultiViewCycle):
        X = [X]
    cycles = list(X)
    if not cycles:
        raise ValueError("expected at least one multi-view cycle")
    for i, mvc in enumerate(cycles):
        if not isinstance(mvc, MultiViewCycle):
            raise TypeError(f"X[{i}] is {type(mvc).__name__}, expected MultiViewCycle")
    length = cycles[0].length
    for i, mvc in enumerate(cycles):
        if mvc.length != length:
            raise ValueError(f"X[{i}] has length {mvc.length}, expected {length}")
    return cycles


def check_viewpoints(views) -> list[Viewpoint]:
    """Resolve lead names / angle pairs / Viewpoints into a non-empty list."""
    if views is None:
        raise ValueError("expected at least one viewpoint")
    if isinstance(views, (str, Viewpoint)) or (
        isinstance(views, (tuple, list)) and len(views) == 2
        and all(isinstance(x, (int, float)) for x in views)
    ):
        views = [views]
    resolved = [resolve_view(v) for v in views]
    if not resolved:
        raise ValueError("expected at least one viewpoint")
    return resolved


def check_signal(samples, length: int | None = None) -> np.ndarray:
    """A finite 1-D float array, optionally of an exact length."""
    x = np.asarray(samples, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise ValueError(f"expected a non-empty 1-D signal, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("signal contains non-finite values")
    if length is not None and x.size != length:
        raise ValueError(f"expected length {length}, got {x.size}")
    return x
