"""Deflection-span arithmetic and 1-D interpolated span pooling.

A cardiac cycle's six deflections occupy variable-length spans of the
feature grid.  ``roi_align_1d`` pools one span into a fixed number of bins
by sampling each bin at its center with linear interpolation, and
``reverse_roi_align_1d`` spreads a fixed-size representation back over its
span on the output grid.  Both are linear in their array inputs and fully
differentiable; ``pooling_matrix``/``assembly_matrix`` express the same maps
as dense matrices so whole batches reduce to a single matmul.

Feature values on a length-T grid are treated as samples at half-integer
coordinates (value at index i lives at coordinate i + 0.5).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch


class EmptySpanError(ValueError):
    """Span with zero or negative width."""


class TilingError(ValueError):
    """Deflection spans do not tile the feature grid exactly."""


N_DEFLECTIONS = 6


@dataclass(frozen=True)
class DeflectionSpans:
    """Real-valued deflection boundaries on the feature grid.

    ``tau[i] = (t_w / t_x) * demarcations[i]``, kept exact (no rounding).
    """

    tau: np.ndarray
    t_w: int
    t_x: int

    def __post_init__(self):
        tau = np.asarray(self.tau, dtype=np.float64)
        if tau.shape != (N_DEFLECTIONS + 1,):
            raise ValueError(f"expected {N_DEFLECTIONS + 1} boundaries, got shape {tau.shape}")
        if tau[0] != 0.0 or not math.isclose(tau[-1], self.t_w, rel_tol=0, abs_tol=1e-9):
            raise ValueError(f"spans must cover [0, {self.t_w}], got {tau.tolist()}")
        if np.any(np.diff(tau) <= 0):
            raise ValueError(f"span boundaries must be strictly increasing: {tau.tolist()}")
        object.__setattr__(self, "tau", tau)

    def pairs(self) -> list[tuple[float, float]]:
        """The six half-open spans [tau_{i-1}, tau_i)."""
        return [(float(self.tau[i]), float(self.tau[i + 1])) for i in range(N_DEFLECTIONS)]


def map_demarcations(demarcations, t_x: int, t_w: int) -> DeflectionSpans:
    """Scale signal-domain demarcations onto the feature grid."""
    d = np.asarray(demarcations, dtype=np.float64)
    if d.shape != (N_DEFLECTIONS + 1,):
        raise ValueError(f"expected 7 demarcation points, got shape {d.shape}")
    if t_w < N_DEFLECTIONS:
        raise ValueError(f"feature length {t_w} too short for {N_DEFLECTIONS} deflections")
    if d[0] != 0 or abs(d[-1] - t_x) > 1e-9:
        raise ValueError(f"demarcations must span [0, {t_x}], got {d.tolist()}")
    tau = d * (t_w / t_x)
    tau[0] = 0.0
    tau[-1] = float(t_w)
    return DeflectionSpans(tau=tau, t_w=t_w, t_x=t_x)


def spans_from_lengths(lengths, t_w: int) -> DeflectionSpans:
    """Spans for six deflection lengths (samples) that sum to the cycle length."""
    ln = np.asarray(lengths, dtype=np.float64)
    if ln.shape != (N_DEFLECTIONS,):
        raise ValueError(f"expected 6 deflection lengths, got shape {ln.shape}")
    if np.any(ln <= 0):
        raise ValueError(f"deflection lengths must be positive, got {ln.tolist()}")
    d = np.concatenate([[0.0], np.cumsum(ln)])
    return map_demarcations(d, t_x=int(round(d[-1])), t_w=t_w)


def _interp_index_weights(positions: np.ndarray, length: int):
    """Clamped linear-interpolation stencils for continuous grid coordinates.

    Returns (i0, i1, w): value = (1 - w) * f[i0] + w * f[i1], with positions
    expressed in index space (coordinate - 0.5) and clamped to [0, length-1].
    """
    p = np.clip(positions - 0.5, 0.0, float(length - 1))
    i0 = np.floor(p).astype(np.int64)
    i0 = np.minimum(i0, length - 1)
    i1 = np.minimum(i0 + 1, length - 1)
    w = p - i0
    return i0, i1, w


def _bin_centers(a: float, b: float, bins: int) -> np.ndarray:
    width = (b - a) / bins
    return a + (np.arange(bins) + 0.5) * width


def roi_align_1d(features: torch.Tensor, span: tuple[float, float], bins: int) -> torch.Tensor:
    """Pool one deflection span into ``bins`` interpolated samples.

    ``features`` is (C, T) or (B, C, T); bin k samples the continuous
    coordinate a + (k + 0.5) * (b - a) / bins.  Linear in ``features`` and
    differentiable.
    """
    a, b = float(span[0]), float(span[1])
    if b <= a:
        raise EmptySpanError(f"span [{a}, {b}) is empty")
    if bins < 1:
        raise ValueError("bins must be >= 1")
    length = features.shape[-1]
    i0, i1, w = _interp_index_weights(_bin_centers(a, b, bins), length)
    w_t = torch.as_tensor(w, dtype=features.dtype, device=features.device)
    f0 = features.index_select(-1, torch.as_tensor(i0, device=features.device))
    f1 = features.index_select(-1, torch.as_tensor(i1, device=features.device))
    return f0 * (1.0 - w_t) + f1 * w_t


def _span_grid_range(a: float, b: float) -> tuple[int, int]:
    """Output grid indices whose centers fall in [a, b)."""
    return int(math.ceil(a - 0.5)), int(math.ceil(b - 0.5))


def reverse_roi_align_1d(rep: torch.Tensor, span: tuple[float, float], out: torch.Tensor) -> None:
    """Spread a pooled representation back over its span of ``out``.

    Every output grid point whose center coordinate lies in [a, b) is
    interpolated from ``rep`` treated as samples at the span's bin centers;
    coordinates beyond the first/last bin center clamp to the edge bins.
    ``out`` is written in place over the span's grid points only.
    """
    a, b = float(span[0]), float(span[1])
    if b <= a:
        raise EmptySpanError(f"span [{a}, {b}) is empty")
    bins = rep.shape[-1]
    j0, j1 = _span_grid_range(a, b)
    if j1 <= j0:
        return  # span narrower than one grid cell: nothing to write
    width = (b - a) / bins
    centers = np.arange(j0, j1) + 0.5
    u = np.clip((centers - a) / width - 0.5, 0.0, float(bins - 1))
    k0 = np.minimum(np.floor(u).astype(np.int64), bins - 1)
    k1 = np.minimum(k0 + 1, bins - 1)
    w = u - k0
    w_t = torch.as_tensor(w, dtype=rep.dtype, device=rep.device)
    r0 = rep.index_select(-1, torch.as_tensor(k0, device=rep.device))
    r1 = rep.index_select(-1, torch.as_tensor(k1, device=rep.device))
    out[..., j0:j1] = r0 * (1.0 - w_t) + r1 * w_t


def assemble_deflections(reps: "list[torch.Tensor] | torch.Tensor", spans: DeflectionSpans) -> torch.Tensor:
    """Tile six pooled representations back onto the full feature grid.

    ``reps`` holds six (C, bins) tensors (or one (6, C, bins) tensor).  The
    spans must tile [0, t_w) exactly; a fractional boundary assigns each grid
    point to the span whose half-open interval contains its center.
    """
    pairs = spans.pairs()
    validate_tiling(pairs, spans.t_w)
    rep_list = [reps[i] for i in range(N_DEFLECTIONS)]
    c = rep_list[0].shape[0]
    out = torch.zeros(c, spans.t_w, dtype=rep_list[0].dtype, device=rep_list[0].device)
    for rep, pair in zip(rep_list, pairs):
        reverse_roi_align_1d(rep, pair, out)
    return out


def validate_tiling(pairs: list[tuple[float, float]], t_w: int, tol: float = 1e-9) -> None:
    """Raise TilingError unless the spans cover [0, t_w) without gap/overlap."""
    if not pairs:
        raise TilingError("no spans given")
    if abs(pairs[0][0]) > tol or abs(pairs[-1][1] - t_w) > tol:
        raise TilingError(f"spans must cover [0, {t_w}), got {pairs[0][0]}..{pairs[-1][1]}")
    for (_, b_prev), (a_next, _) in zip(pairs, pairs[1:]):
        if abs(b_prev - a_next) > tol:
            raise TilingError(f"gap or overlap between spans at {b_prev} vs {a_next}")
    for a, b in pairs:
        if b <= a:
            raise EmptySpanError(f"span [{a}, {b}) is empty")


def pooling_matrix(spans: DeflectionSpans, bins: int, dtype=torch.float32, device=None) -> torch.Tensor:
    """Dense (t_w, 6*bins) matrix P with ``features @ P`` == per-span pooling.

    Column i*bins + k holds the interpolation stencil of bin k of deflection
    i; exact equality with `roi_align_1d` follows from linearity.
    """
    mat = np.zeros((spans.t_w, N_DEFLECTIONS * bins), dtype=np.float64)
    for i, (a, b) in enumerate(spans.pairs()):
        i0, i1, w = _interp_index_weights(_bin_centers(a, b, bins), spans.t_w)
        for k in range(bins):
            col = i * bins + k
            mat[i0[k], col] += 1.0 - w[k]
            mat[i1[k], col] += w[k]
    return torch.as_tensor(mat, dtype=dtype, device=device)


def assembly_matrix(spans: DeflectionSpans, bins: int, dtype=torch.float32, device=None) -> torch.Tensor:
    """Dense (6*bins, t_w) matrix R with ``reps_flat @ R`` == span assembly."""
    pairs = spans.pairs()
    validate_tiling(pairs, spans.t_w)
    mat = np.zeros((N_DEFLECTIONS * bins, spans.t_w), dtype=np.float64)
    for i, (a, b) in enumerate(pairs):
        j0, j1 = _span_grid_range(a, b)
        if j1 <= j0:
            continue
        width = (b - a) / bins
        centers = np.arange(j0, j1) + 0.5
        u = np.clip((centers - a) / width - 0.5, 0.0, float(bins - 1))
        k0 = np.minimum(np.floor(u).astype(np.int64), bins - 1)
        k1 = np.minimum(k0 + 1, bins - 1)
        w = u - k0
        for j_off in range(j1 - j0):
            mat[i * bins + k0[j_off], j0 + j_off] += 1.0 - w[j_off]
            mat[i * bins + k1[j_off], j0 + j_off] += w[j_off]
    return torch.as_tensor(mat, dtype=dtype, device=device)
