"""Multi-lead ECG synthesis from scratch by mixing stored representations.

A memory bank stores the fused deflection representations (and deflection
lengths) of every training heartbeat, produced by a model trained without
the basic branch so that all information lives in the deflection
representations.  New heartbeats are synthesized by drawing two bank
entries of the same category, convexly mixing their representations and
lengths with a Beta-distributed weight, and decoding the mix at the
requested viewpoints with the frozen trained decoder.
"""

from __future__ import annotations

import io
import json
import zipfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .checkpoint import checkpoint_bytes, checkpoint_from_bytes
from .data import CardiacCycle, MultiViewCycle, TARGET_RATE
from .nefnet import ElectrocardioField, NefNet, decode_view
from .angular import NO_PERTURBATION
from .viewpoints import Viewpoint
from . import nefnet


class BankConfigError(ValueError):
    """Model/bank combination that cannot support from-scratch synthesis."""


class InsufficientDataError(ValueError):
    """Too few bank entries with the requested label."""


@dataclass
class BankEntry:
    z_d: np.ndarray                 # (6, deflection_channels, bins) float32
    deflection_lengths: tuple[int, ...]
    label: str | None = None

    def field(self, dtype=torch.float32) -> ElectrocardioField:
        return ElectrocardioField(
            z_d=torch.as_tensor(self.z_d, dtype=dtype),
            deflection_lengths=self.deflection_lengths,
            z_b=None,
        )


@dataclass
class MixCoefficient:
    """Beta-distributed mixing weight; alpha = beta = 1 is uniform."""

    a: float = 0.5
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.a <= 1.0:
            raise ValueError(f"mixing weight must be in [0, 1], got {self.a}")

    @classmethod
    def draw(cls, rng: np.random.Generator, alpha: float = 1.0, beta: float = 1.0) -> "MixCoefficient":
        return cls(a=float(rng.beta(alpha, beta)), alpha=alpha, beta=beta)


@dataclass
class MemoryBank:
    entries: list[BankEntry]

    def labels(self) -> list[str | None]:
        return sorted({e.label for e in self.entries}, key=lambda x: (x is not None, x))

    def with_label(self, label: str | None) -> list[BankEntry]:
        return [e for e in self.entries if e.label == label]

    def __len__(self) -> int:
        return len(self.entries)


def build_bank(net: NefNet, dataset: list[MultiViewCycle]) -> MemoryBank:
    """Encode and fuse every cycle's views, keeping only deflection reps."""
    if net.cfg.use_basic_branch:
        raise BankConfigError(
            "from-scratch synthesis needs a model trained without the basic branch")
    entries = []
    with torch.inference_mode():
        for mvc in dataset:
            field = nefnet.encode_and_fuse(net, mvc, perturb=None)
            entries.append(BankEntry(
                z_d=field.z_d.to(torch.float32).numpy().copy(),
                deflection_lengths=field.deflection_lengths,
                label=mvc.label,
            ))
    return MemoryBank(entries=entries)


def _largest_remainder_lengths(weights: np.ndarray, total: int) -> tuple[int, ...]:
    """Round positive real lengths to integers preserving their sum."""
    floors = np.floor(weights).astype(np.int64)
    floors = np.maximum(floors, 1)
    short = total - int(floors.sum())
    if short < 0:
        # Rare: the +1 floors overshoot; trim from the largest entries.
        order = np.argsort(-floors)
        for i in order:
            take = min(floors[i] - 1, -short)
            floors[i] -= take
            short += take
            if short == 0:
                break
    elif short > 0:
        remainders = weights - np.floor(weights)
        order = np.argsort(-remainders, kind="stable")
        for i in order[:short]:
            floors[i] += 1
    return tuple(int(x) for x in floors)


def mix(p: BankEntry, q: BankEntry, a: float) -> tuple[np.ndarray, tuple[int, ...]]:
    """Convex combination of two bank entries' representations and lengths.

    The endpoint weights reproduce a source entry exactly; mixed lengths are
    positive integers that keep the cycle length (largest-remainder rounding).
    """
    if not 0.0 <= a <= 1.0:
        raise ValueError(f"mixing weight must be in [0, 1], got {a}")
    if p.label != q.label:
        raise ValueError(f"cannot mix entries of different labels: {p.label!r} vs {q.label!r}")
    if p.z_d.shape != q.z_d.shape:
        raise ValueError(f"entry shapes differ: {p.z_d.shape} vs {q.z_d.shape}")
    z_new = a * p.z_d + (1.0 - a) * q.z_d
    t_x = sum(p.deflection_lengths)
    if sum(q.deflection_lengths) != t_x:
        raise ValueError("entries cover different cycle lengths")
    if a == 1.0:
        lengths = p.deflection_lengths
        z_new = p.z_d.copy()
    elif a == 0.0:
        lengths = q.deflection_lengths
        z_new = q.z_d.copy()
    else:
        real = a * np.asarray(p.deflection_lengths, dtype=np.float64) \
            + (1.0 - a) * np.asarray(q.deflection_lengths, dtype=np.float64)
        lengths = _largest_remainder_lengths(real, t_x)
    return z_new, lengths


def synthesize_scratch(
    bank: MemoryBank,
    net: NefNet,
    label: str | None,
    n: int,
    viewpoints: list[Viewpoint],
    seed: int = 0,
    alpha: float = 1.0,
    beta: float = 1.0,
) -> list[MultiViewCycle]:
    """Draw ``n`` new heartbeats of one category, decoded at the given views.

    Each draw samples two distinct bank entries with the label (with
    replacement across draws), a Beta(alpha, beta) weight, mixes, and
    decodes.  Deterministic for a fixed seed.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if not viewpoints:
        raise ValueError("need at least one viewpoint to synthesize")
    candidates = bank.with_label(label)
    if len(candidates) < 2:
        raise InsufficientDataError(
            f"need at least 2 bank entries with label {label!r}, have {len(candidates)}")
    rng = np.random.default_rng(seed)
    out = []
    for idx in range(n):
        i, j = rng.choice(len(candidates), size=2, replace=False)
        coeff = MixCoefficient.draw(rng, alpha, beta)
        z_new, lengths = mix(candidates[i], candidates[j], coeff.a)
        field = ElectrocardioField(
            z_d=torch.as_tensor(z_new, dtype=net.dtype),
            deflection_lengths=lengths,
            z_b=None,
        )
        dem = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
        views = []
        for vp in viewpoints:
            sig = decode_view(net, field, vp, NO_PERTURBATION)
            views.append((CardiacCycle(
                samples=sig, sampling_rate=TARGET_RATE, demarcations=dem.copy()), vp))
        out.append(MultiViewCycle(views=views, label=label, record_id=f"synth{idx:05d}"))
    return out


# ----------------------------------------------------------------- bank file

def save_bank(bank: MemoryBank, net: NefNet, path: "str | Path") -> Path:
    """Write a self-contained bank: entries plus the decoder checkpoint."""
    path = Path(path)
    meta = {
        "labels": [e.label for e in bank.entries],
        "lengths": [list(e.deflection_lengths) for e in bank.entries],
        "count": len(bank.entries),
    }
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        zf.writestr("meta.json", json.dumps(meta))
        zf.writestr("checkpoint.bin", checkpoint_bytes(net))
        if bank.entries:
            buf = io.BytesIO()
            np.save(buf, np.stack([e.z_d for e in bank.entries]).astype(np.float32))
            zf.writestr("z_d.npy", buf.getvalue())
    return path


def load_bank(path: "str | Path") -> tuple[MemoryBank, NefNet]:
    path = Path(path)
    with zipfile.ZipFile(path, "r") as zf:
        meta = json.loads(zf.read("meta.json"))
        net = checkpoint_from_bytes(zf.read("checkpoint.bin"), origin=f"{path}!checkpoint.bin")
        entries = []
        if meta["count"]:
            z_all = np.load(io.BytesIO(zf.read("z_d.npy")))
            for i in range(meta["count"]):
                entries.append(BankEntry(
                    z_d=z_all[i],
                    deflection_lengths=tuple(int(x) for x in meta["lengths"][i]),
                    label=meta["labels"][i],
                ))
    return MemoryBank(entries=entries), net
