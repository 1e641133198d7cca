"""Encoder-decoder network over the electrocardio field representation.

Encoding: a 1-D convolution trunk turns one view's trace into a
time-aligned feature volume; a gating vector computed from the view's
angle code multiplies every time column, removing viewpoint information;
two projection heads then split the result into a time-extended basic
representation and six fixed-size deflection representations (pooled over
the deflection spans).

Synthesizing runs the reverse: per-deflection convolutions (independent
parameters per deflection, realized as one grouped convolution), span
assembly back onto the feature grid, a convolution over the basic
representation, channel stacking, multiplicative gating by the queried
angle code, and a transposed-convolution upsampling stack with a sigmoid
head that emits a [0, 1] trace.

Representations from several views of one heartbeat fuse by simple
averaging; the same encoder weights process every view.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from typing import Optional, Sequence

import numpy as np
import torch
from torch import nn
from torch.nn import functional as F

from .angular import CODE_SIZE, PerturbationConfig, angular_encode
from .data import CardiacCycle, MultiViewCycle
from .fieldops import (
    DeflectionSpans,
    N_DEFLECTIONS,
    assembly_matrix,
    map_demarcations,
    pooling_matrix,
    spans_from_lengths,
)
from .viewpoints import Viewpoint


class NumericError(RuntimeError):
    """Non-finite activations; ``stage`` names the failing computation."""

    def __init__(self, stage: str):
        super().__init__(f"non-finite values produced at stage '{stage}'")
        self.stage = stage


class FusionError(ValueError):
    """Fields with mismatched shapes or deflection lengths."""


@dataclass(frozen=True)
class ModelConfig:
    """Static architecture description; all sizes are desk-scale defaults."""

    t_x: int = 512
    encoder_channels: tuple[int, ...] = (32, 64, 96, 128)
    encoder_kernels: tuple[int, ...] = (7, 5, 5, 3)
    basic_channels: int = 64
    deflection_channels: int = 32
    bins: int = 8
    angle_hidden: int = 64
    decoder_channels: tuple[int, ...] = (48, 24, 12, 8)
    summary_channels: int = 16
    param_gain: float = 1.0
    seed: int = 0
    use_basic_branch: bool = True

    def __post_init__(self):
        object.__setattr__(self, "encoder_channels", tuple(self.encoder_channels))
        object.__setattr__(self, "encoder_kernels", tuple(self.encoder_kernels))
        object.__setattr__(self, "decoder_channels", tuple(self.decoder_channels))
        if len(self.encoder_channels) != len(self.encoder_kernels):
            raise ValueError("encoder_channels and encoder_kernels must have equal length")
        if len(self.decoder_channels) != len(self.encoder_channels):
            raise ValueError("decoder stack must mirror the encoder's stride-2 block count")
        if self.t_x % self.downsample != 0:
            raise ValueError(f"t_x={self.t_x} not divisible by downsample={self.downsample}")
        if self.bins < 1:
            raise ValueError("bins must be >= 1")

    @property
    def downsample(self) -> int:
        return 2 ** len(self.encoder_channels)

    @property
    def feature_channels(self) -> int:
        return self.encoder_channels[-1]

    @property
    def t_w(self) -> int:
        return self.t_x // self.downsample

    @property
    def raw_channels(self) -> int:
        """Channels of the un-processed representation map (plus constant one).

        The constant-one channel lets the multiplicative angle gate express
        view-dependent additive offsets, which min-max-normalized traces need.
        """
        base = self.deflection_channels + 1
        return base + (self.basic_channels if self.use_basic_branch else 0)

    @property
    def mix_channels(self) -> int:
        """Channels of the stacked decoder feature map (raw plus processed)."""
        proc = self.deflection_channels + (self.basic_channels if self.use_basic_branch else 0)
        return self.raw_channels + proc


@dataclass
class ElectrocardioField:
    """The per-heartbeat field representation.

    ``z_b`` is the time-extended basic representation (basic_channels, t_w),
    absent for models trained without the basic branch.  ``z_d`` stacks the
    six deflection representations as (6, deflection_channels, bins).
    ``deflection_lengths`` are the six deflection durations in samples and
    sum to the cycle length.
    """

    z_d: torch.Tensor
    deflection_lengths: tuple[int, ...]
    z_b: Optional[torch.Tensor] = None

    def __post_init__(self):
        if self.z_d.ndim != 3 or self.z_d.shape[0] != N_DEFLECTIONS:
            raise ValueError(f"z_d must be (6, channels, bins), got {tuple(self.z_d.shape)}")
        lengths = tuple(int(x) for x in self.deflection_lengths)
        if len(lengths) != N_DEFLECTIONS or any(x <= 0 for x in lengths):
            raise ValueError(f"need 6 positive deflection lengths, got {lengths}")
        self.deflection_lengths = lengths
        if self.z_b is not None and self.z_b.ndim != 2:
            raise ValueError(f"z_b must be (channels, t_w), got {tuple(self.z_b.shape)}")

    @property
    def t_x(self) -> int:
        return sum(self.deflection_lengths)

    def detach(self) -> "ElectrocardioField":
        return ElectrocardioField(
            z_d=self.z_d.detach(),
            deflection_lengths=self.deflection_lengths,
            z_b=None if self.z_b is None else self.z_b.detach(),
        )


def _norm_groups(channels: int) -> int:
    for g in (4, 2, 1):
        if channels % g == 0:
            return g
    return 1


class ScaledConv1d(nn.Conv1d):
    """Conv1d whose stored parameters are a fixed factor below the effective ones.

    The forward pass multiplies weight and bias by ``gain``, so one SGD step
    moves the effective parameters by gain^2 times further for the same
    learning rate.  The effective initialization distribution is unchanged.
    At desk scale (a few hundred optimizer steps) this is what makes the
    fixed lr-0.1 schedule converge.
    """

    def __init__(self, *args, gain: float = 1.0, **kwargs):
        super().__init__(*args, **kwargs)
        self.gain = float(gain)

    def forward(self, x):
        bias = None if self.bias is None else self.bias * self.gain
        return self._conv_forward(x, self.weight * self.gain, bias)


class ScaledConvTranspose1d(nn.ConvTranspose1d):
    """Transposed-convolution counterpart of ScaledConv1d."""

    def __init__(self, *args, gain: float = 1.0, **kwargs):
        super().__init__(*args, **kwargs)
        self.gain = float(gain)

    def forward(self, x):
        bias = None if self.bias is None else self.bias * self.gain
        return F.conv_transpose1d(
            x, self.weight * self.gain, bias, self.stride, self.padding,
            self.output_padding, self.groups, self.dilation)


class ScaledLinear(nn.Linear):
    """Linear counterpart of ScaledConv1d."""

    def __init__(self, *args, gain: float = 1.0, **kwargs):
        super().__init__(*args, **kwargs)
        self.gain = float(gain)

    def forward(self, x):
        bias = None if self.bias is None else self.bias * self.gain
        return F.linear(x, self.weight * self.gain, bias)


class AngleGate(nn.Module):
    """Queried-angle code -> multiplicative channel gate.

    The gate is linear in a fixed trigonometric basis [1, ux, uy, uz]
    extracted from the code by sum-to-product identities (the unit-vector
    components of the viewpoint).  Since spherical projections are linear in
    that basis, this path extrapolates to unseen viewpoints instead of
    memorizing the training angles.  A second, zero-initialized path over
    the full 12-element code (raw angles down-scaled to O(1)) adds capacity
    beyond the projective structure when training asks for it.
    """

    # code layout: [t, sin t, cos t, p, sin p, cos p, s, sin s, cos s, d, sin d, cos d]
    _FULL_SCALE = torch.tensor([1 / (2 * math.pi) if i % 3 == 0 else 1.0 for i in range(12)])

    def __init__(self, out_channels: int, gain: float = 1.0):
        super().__init__()
        self.basis = ScaledLinear(4, out_channels, gain=gain)
        self.full = ScaledLinear(12, out_channels, bias=False, gain=gain)

    def forward(self, code: torch.Tensor) -> torch.Tensor:
        scale = self._FULL_SCALE.to(dtype=code.dtype, device=code.device)
        return self.basis(unit_basis(code)) + self.full(code * scale)

    def reset_parameters_gate(self) -> None:
        with torch.no_grad():
            self.basis.weight.zero_()
            self.basis.bias.fill_(1.0 / self.basis.gain)
            self.full.weight.zero_()


def _check_finite(t: torch.Tensor, stage: str) -> torch.Tensor:
    if not torch.isfinite(t).all():
        raise NumericError(stage)
    return t


def unit_basis(codes: torch.Tensor) -> torch.Tensor:
    """[1, ux, uy, uz] from an angle-code batch via sum-to-product identities."""
    ux = 0.5 * (codes[..., 7] + codes[..., 10])
    uy = 0.5 * (codes[..., 11] - codes[..., 8])
    uz = codes[..., 2]
    return torch.stack([torch.ones_like(ux), ux, uy, uz], dim=-1)


RANGE_EPS = 1e-6


def range_normalize(trace: torch.Tensor) -> torch.Tensor:
    """Min-max rescale each trace to [0, 1] along its last axis.

    Matches the target preprocessing convention, including flat traces
    mapping to all-0.5.  Applied after the sigmoid squashing, it removes
    whatever per-view amplitude affine the squashed trace still carries,
    so amplitude scaling never has to be learned as a function of the
    queried angle.
    """
    lo = trace.amin(dim=-1, keepdim=True)
    hi = trace.amax(dim=-1, keepdim=True)
    return (trace - lo + 0.5 * RANGE_EPS) / (hi - lo + RANGE_EPS)


class NefNet(nn.Module):
    """The full encoder/decoder pair with seeded initialization."""

    # Effective-lr multipliers by role: purely linear readout paths tolerate
    # (and need) far larger steps than the deep convolutional stacks.  Wide
    # readouts are additionally tempered by their fan-in so the per-step
    # output movement stays comparable across layer widths.
    GAIN_LINEAR = 4.0
    GAIN_HEAD = 2.0
    REF_FAN = 1024.0

    @classmethod
    def _fan_gain(cls, base: float, fan_in: int) -> float:
        return base * math.sqrt(cls.REF_FAN / max(fan_in, 1))

    def __init__(self, cfg: ModelConfig = ModelConfig()):
        super().__init__()
        self.cfg = cfg
        c = cfg.feature_channels
        c_b, c_d, bins = cfg.basic_channels, cfg.deflection_channels, cfg.bins
        gain = cfg.param_gain
        lin_gain = gain * self.GAIN_LINEAR
        head_gain = gain * self.GAIN_HEAD

        blocks: list[nn.Module] = []
        in_ch = 1
        for ch, k in zip(cfg.encoder_channels, cfg.encoder_kernels):
            blocks += [
                ScaledConv1d(in_ch, ch, k, stride=2, padding=k // 2, gain=gain),
                nn.GroupNorm(_norm_groups(ch), ch),
                nn.SiLU(),
            ]
            in_ch = ch
        self.encoder = nn.Sequential(*blocks)

        self.angle_in = nn.Sequential(
            ScaledLinear(CODE_SIZE, cfg.angle_hidden, gain=gain), nn.SiLU(),
            ScaledLinear(cfg.angle_hidden, c, gain=gain),
        )
        self.proj_basic = (
            ScaledConv1d(c, c_b, 3, padding=1, gain=gain) if cfg.use_basic_branch else None)
        self.proj_deflection = ScaledConv1d(c, c_d, 3, padding=1, gain=gain)

        # Normalization keeps the processed branch stable; the raw branch
        # flows past it, so per-heartbeat amplitude content survives.  Group
        # counts divide per-deflection blocks, so normalization never mixes
        # information across deflections.
        self.deflection_conv = nn.Sequential(
            ScaledConv1d(N_DEFLECTIONS * c_d, N_DEFLECTIONS * c_d, 3, padding=1,
                         groups=N_DEFLECTIONS, gain=gain),
            nn.GroupNorm(N_DEFLECTIONS * _norm_groups(c_d), N_DEFLECTIONS * c_d),
            nn.SiLU(),
            ScaledConv1d(N_DEFLECTIONS * c_d, N_DEFLECTIONS * c_d, 3, padding=1,
                         groups=N_DEFLECTIONS, gain=gain),
        )
        self.basic_conv = (
            nn.Sequential(
                ScaledConv1d(c_b, c_b, 3, padding=1, gain=gain),
                nn.GroupNorm(_norm_groups(c_b), c_b),
                nn.SiLU(),
                ScaledConv1d(c_b, c_b, 3, padding=1, gain=gain),
            )
            if cfg.use_basic_branch else None
        )
        self.angle_out = AngleGate(cfg.mix_channels, gain=lin_gain)
        # Global time-pooled statistics re-broadcast into the decoder so
        # whole-cycle context (which purely local convolutions cannot see)
        # can shape the output.
        self.summary_mlp = nn.Sequential(
            ScaledLinear(2 * cfg.mix_channels, 32, gain=head_gain), nn.SiLU(),
            ScaledLinear(32, cfg.summary_channels, gain=head_gain),
        )

        dec_in = cfg.mix_channels + cfg.summary_channels
        ups: list[nn.Module] = []
        in_ch = dec_in
        for ch in cfg.decoder_channels:
            ups += [
                ScaledConvTranspose1d(in_ch, ch, 4, stride=2, padding=1, gain=gain),
                nn.GroupNorm(_norm_groups(ch), ch),
                nn.SiLU(),
            ]
            in_ch = ch
        self.upsampler = nn.Sequential(*ups)
        self.head = ScaledConv1d(in_ch, 1, 3, padding=1, gain=head_gain)
        ds_f = cfg.downsample
        # Direct linear readout: spherical projections are bilinear in
        # (gate, features), so this path carries most of the signal and
        # converges within a small step budget; the deep path refines it.
        self.skip = ScaledConvTranspose1d(
            dec_in, 1, 2 * ds_f, stride=ds_f, padding=ds_f // 2,
            gain=self._fan_gain(lin_gain, dec_in * 2 * ds_f))
        # Projective readout: raw representations multiplied by each element
        # of the fixed [1, ux, uy, uz] basis before a wide linear upsampling
        # map.  This path can represent an exact spherical projection at any
        # queried angle, which is what makes far-from-training viewpoints
        # work; the wide window gives each output sample direct access to a
        # whole neighborhood of the representation grid.
        self.proj_skip = ScaledConvTranspose1d(
            4 * cfg.raw_channels, 1, 4 * ds_f, stride=ds_f, padding=3 * ds_f // 2,
            gain=self._fan_gain(lin_gain, 4 * cfg.raw_channels * 4 * ds_f))

        self._span_cache: dict = {}
        self.reset_parameters(cfg.seed)

    # ------------------------------------------------------------------ init

    def reset_parameters(self, seed: int) -> None:
        """Fan-in-scaled uniform init of the effective weights, seeded."""
        g = torch.Generator().manual_seed(int(seed))
        for module in self.modules():
            if isinstance(module, (nn.Conv1d, nn.ConvTranspose1d, nn.Linear)):
                gain = getattr(module, "gain", 1.0)
                fan_in, _ = nn.init._calculate_fan_in_and_fan_out(module.weight)
                # Variance-preserving bound for the effective weights.
                bound = (math.sqrt(6.0 / fan_in) if fan_in > 0 else 0.0) / gain
                with torch.no_grad():
                    module.weight.uniform_(-bound, bound, generator=g)
                    if module.bias is not None:
                        module.bias.uniform_(-bound / 4, bound / 4, generator=g)
        # Gating layers start near the identity gate so early training is not
        # throttled by near-zero multiplicative factors.  Linear readout and
        # summary paths start at zero: they are fast to grow and a random
        # start only injects output noise into the first steps.
        with torch.no_grad():
            self.angle_in[-1].bias.fill_(1.0 / self.angle_in[-1].gain)
            self.skip.weight.zero_()
            self.skip.bias.zero_()
            self.proj_skip.weight.zero_()
            self.proj_skip.bias.zero_()
            self.summary_mlp[-1].weight.zero_()
            self.summary_mlp[-1].bias.zero_()
        self.angle_out.reset_parameters_gate()

    # ------------------------------------------------------------ span utils

    def _matrices(self, demarcations: Sequence[int], t_x: int, dtype, device):
        key = (tuple(int(d) for d in demarcations), int(t_x), dtype)
        hit = self._span_cache.get(key)
        if hit is None:
            spans = map_demarcations(np.asarray(demarcations, dtype=np.float64), t_x, self.cfg.t_w)
            pool = pooling_matrix(spans, self.cfg.bins, dtype=dtype, device=device)
            assemble = assembly_matrix(spans, self.cfg.bins, dtype=dtype, device=device)
            hit = (pool, assemble)
            self._span_cache[key] = hit
        return hit

    @property
    def dtype(self) -> torch.dtype:
        return next(self.parameters()).dtype

    # -------------------------------------------------------- batched graphs

    def encode_batch(
        self,
        signals: torch.Tensor,
        codes: torch.Tensor,
        demarcations: Sequence[Sequence[int]],
    ) -> tuple[Optional[torch.Tensor], torch.Tensor]:
        """Differentiable encode of a batch of single-view traces.

        signals: (B, t_x); codes: (B, 12); demarcations: B rows of 7 ints.
        Returns (z_b (B, c_b, t_w) or None, z_d (B, 6, c_d, bins)).
        """
        if signals.ndim != 2 or signals.shape[1] != self.cfg.t_x:
            raise ValueError(f"signals must be (B, {self.cfg.t_x}), got {tuple(signals.shape)}")
        w = self.encoder(signals.unsqueeze(1))
        _check_finite(w, "encoder")
        theta = self.angle_in(codes)
        gated = w * theta.unsqueeze(-1)
        _check_finite(gated, "view_gating")
        w_d = self.proj_deflection(gated)
        z_b = self.proj_basic(gated) if self.proj_basic is not None else None
        _check_finite(w_d, "projection")

        b, c_d, t_w = w_d.shape
        bins = self.cfg.bins
        z_d = w_d.new_empty((b, N_DEFLECTIONS, c_d, bins))
        for group in self._group_by_spans(demarcations):
            idx, dem = group
            pool, _ = self._matrices(dem, t_x=self.cfg.t_x, dtype=w_d.dtype, device=w_d.device)
            pooled = w_d[idx] @ pool  # (n, c_d, 6*bins)
            z_d[idx] = pooled.reshape(len(idx), c_d, N_DEFLECTIONS, bins).permute(0, 2, 1, 3)
        return z_b, z_d

    def decode_batch(
        self,
        z_b: Optional[torch.Tensor],
        z_d: torch.Tensor,
        lengths: Sequence[Sequence[int]],
        codes: torch.Tensor,
    ) -> torch.Tensor:
        """Differentiable decode back to (B, t_x) traces in [0, 1].

        z_b: (B, c_b, t_w) or None; z_d: (B, 6, c_d, bins); lengths: B rows
        of 6 deflection lengths; codes: (B, 12).
        """
        cfg = self.cfg
        b, n_defl, c_d, bins = z_d.shape
        if n_defl != N_DEFLECTIONS or c_d != cfg.deflection_channels or bins != cfg.bins:
            raise ValueError(f"z_d shape {tuple(z_d.shape)} does not match the model config")
        if cfg.use_basic_branch:
            if z_b is None:
                raise ValueError("model has a basic branch but no z_b was given")
        elif z_b is not None:
            raise ValueError("model has no basic branch but z_b was given")

        m_proc_flat = self.deflection_conv(z_d.reshape(b, N_DEFLECTIONS * c_d, bins))
        m_proc_flat = m_proc_flat.reshape(b, N_DEFLECTIONS, c_d, bins)
        m_d_raw = z_d.new_empty((b, c_d, cfg.t_w))
        m_d_proc = z_d.new_empty((b, c_d, cfg.t_w))
        for idx, dem in self._group_by_spans([self._lengths_to_dem(l) for l in lengths]):
            if dem[-1] != cfg.t_x:
                raise ValueError(f"deflection lengths sum to {dem[-1]}, model expects {cfg.t_x}")
            _, assemble = self._matrices(dem, t_x=dem[-1], dtype=z_d.dtype, device=z_d.device)
            raw = z_d[idx].permute(0, 2, 1, 3).reshape(len(idx), c_d, N_DEFLECTIONS * bins)
            proc = m_proc_flat[idx].permute(0, 2, 1, 3).reshape(len(idx), c_d, N_DEFLECTIONS * bins)
            m_d_raw[idx] = raw @ assemble
            m_d_proc[idx] = proc @ assemble
        _check_finite(m_d_proc, "span_assembly")

        ones = z_d.new_ones((b, 1, cfg.t_w))
        if cfg.use_basic_branch:
            m_raw = torch.cat([z_b, m_d_raw, ones], dim=1)
            m0 = torch.cat([m_raw, self.basic_conv(z_b), m_d_proc], dim=1)
        else:
            m_raw = torch.cat([m_d_raw, ones], dim=1)
            m0 = torch.cat([m_raw, m_d_proc], dim=1)
        gate = self.angle_out(codes)
        m = m0 * gate.unsqueeze(-1)
        _check_finite(m, "query_gating")
        basis = unit_basis(codes)
        m_proj = (basis.unsqueeze(-1).unsqueeze(-1) * m_raw.unsqueeze(1)).reshape(
            b, 4 * m_raw.shape[1], cfg.t_w)
        # Mean plus smooth-max time pooling; logsumexp keeps gradients spread
        # over the whole trace rather than single argmax positions.
        pooled = torch.cat([m.mean(dim=-1), torch.logsumexp(m, dim=-1)], dim=1)
        summary = self.summary_mlp(pooled)
        m = torch.cat([m, summary.unsqueeze(-1).expand(-1, -1, cfg.t_w)], dim=1)
        trace = self.head(self.upsampler(m)) + self.skip(m) + self.proj_skip(m_proj)
        out = torch.sigmoid(trace.squeeze(1))
        _check_finite(out, "decoder")
        return out

    @staticmethod
    def _lengths_to_dem(lengths: Sequence[int]) -> tuple[int, ...]:
        dem = [0]
        for ln in lengths:
            dem.append(dem[-1] + int(ln))
        return tuple(dem)

    @staticmethod
    def _group_by_spans(demarcations: Sequence[Sequence[int]]):
        groups: dict[tuple, list[int]] = {}
        for i, dem in enumerate(demarcations):
            groups.setdefault(tuple(int(d) for d in dem), []).append(i)
        for dem, idx in groups.items():
            yield idx, dem


def _code_tensor(v: Viewpoint, perturb: Optional[PerturbationConfig], dtype, device=None) -> torch.Tensor:
    code = angular_encode(v, perturb)
    return torch.as_tensor(code.values, dtype=dtype, device=device)


def encode_view(
    net: NefNet,
    x: CardiacCycle,
    v: Viewpoint,
    perturb: Optional[PerturbationConfig] = None,
) -> ElectrocardioField:
    """Encode a single view into its electrocardio field representation."""
    if x.length != net.cfg.t_x:
        raise ValueError(f"cycle length {x.length} != model t_x {net.cfg.t_x}")
    sig = torch.as_tensor(x.samples, dtype=net.dtype).unsqueeze(0)
    code = _code_tensor(v, perturb, net.dtype).unsqueeze(0)
    z_b, z_d = net.encode_batch(sig, code, [x.demarcations])
    return ElectrocardioField(
        z_d=z_d[0],
        deflection_lengths=tuple(int(d) for d in np.diff(x.demarcations)),
        z_b=None if z_b is None else z_b[0],
    )


def fuse_views(fields: list[ElectrocardioField]) -> ElectrocardioField:
    """Average the representations of several views of one heartbeat.

    Identical inputs (including the single-view case) return the shared
    representation unchanged, bit for bit.
    """
    if not fields:
        raise FusionError("cannot fuse an empty list of fields")
    first = fields[0]
    for f in fields[1:]:
        if f.z_d.shape != first.z_d.shape:
            raise FusionError(f"z_d shape mismatch: {tuple(f.z_d.shape)} vs {tuple(first.z_d.shape)}")
        if (f.z_b is None) != (first.z_b is None):
            raise FusionError("cannot fuse fields with and without a basic representation")
        if f.z_b is not None and f.z_b.shape != first.z_b.shape:
            raise FusionError(f"z_b shape mismatch: {tuple(f.z_b.shape)} vs {tuple(first.z_b.shape)}")
        if f.deflection_lengths != first.deflection_lengths:
            raise FusionError(
                f"deflection lengths differ: {f.deflection_lengths} vs {first.deflection_lengths}")
    if all(
        torch.equal(f.z_d, first.z_d)
        and (f.z_b is None or torch.equal(f.z_b, first.z_b))
        for f in fields[1:]
    ):
        return ElectrocardioField(
            z_d=first.z_d, deflection_lengths=first.deflection_lengths, z_b=first.z_b)
    z_d = torch.stack([f.z_d for f in fields]).mean(dim=0)
    z_b = None
    if first.z_b is not None:
        z_b = torch.stack([f.z_b for f in fields]).mean(dim=0)
    return ElectrocardioField(z_d=z_d, deflection_lengths=first.deflection_lengths, z_b=z_b)


def decode_view(
    net: NefNet,
    field: ElectrocardioField,
    q: Viewpoint,
    perturb: Optional[PerturbationConfig] = None,
) -> np.ndarray:
    """Synthesize the trace seen from a queried viewpoint (inference only)."""
    if field.t_x != net.cfg.t_x:
        raise ValueError(f"field covers {field.t_x} samples, model expects {net.cfg.t_x}")
    with torch.inference_mode():
        code = _code_tensor(q, perturb, net.dtype).unsqueeze(0)
        z_b = None if field.z_b is None else field.z_b.unsqueeze(0)
        out = net.decode_batch(z_b, field.z_d.unsqueeze(0), [field.deflection_lengths], code)
    return out[0].double().numpy()


def encode_and_fuse(
    net: NefNet,
    views: MultiViewCycle,
    perturb: Optional[PerturbationConfig] = None,
) -> ElectrocardioField:
    """Encode every view of a heartbeat and fuse into one field."""
    fields = [encode_view(net, cycle, vp, perturb) for cycle, vp in views.views]
    return fuse_views(fields)


def panorama(
    net: NefNet,
    views: MultiViewCycle,
    queries: list[Viewpoint],
) -> list[np.ndarray]:
    """Synthesize the queried viewpoints from the given views (deterministic)."""
    with torch.inference_mode():
        field = encode_and_fuse(net, views, perturb=None)
    return [decode_view(net, field, q, perturb=None) for q in queries]


def panorama_grid(
    theta_step: float,
    phi_step: float,
) -> tuple[list[float], list[float]]:
    """Evenly stepped grid angles covering theta in [0, pi], phi in [-pi, pi]."""
    if theta_step <= 0 or phi_step <= 0:
        raise ValueError("grid steps must be positive")
    thetas = [min(k * theta_step, math.pi) for k in range(int(math.floor(math.pi / theta_step)) + 1)]
    if thetas[-1] < math.pi - 1e-12:
        thetas.append(math.pi)
    phis = [-math.pi + k * phi_step for k in range(int(math.floor(2 * math.pi / phi_step)) + 1)]
    if phis[-1] < math.pi - 1e-12:
        phis.append(math.pi)
    return thetas, phis


def config_to_dict(cfg: ModelConfig) -> dict:
    return asdict(cfg)
