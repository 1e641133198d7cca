"""View-group training protocol, losses, and evaluation.

Views are split into three pairwise-disjoint groups: the input group (IG)
is encoded, the reconstruction group (RG) supervises training, and the
synthesis group (SG) holds view types never seen in training, scored only
at evaluation time.

Each training step encodes a batch of cycles' IG views (with angle jitter),
fuses them, samples one RG view per cycle as the query, and minimizes the
reconstruction MAE plus the standin loss.  The standin loss anchors every
single-view reconstruction to the fused-representation reconstruction,
computed under stop-gradient so only the single-view prediction paths
receive gradients.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
import torch

from .angular import DEFAULT_PERTURB_STD, PerturbationConfig, angular_encode
from .data import MultiViewCycle
from .metrics import psnr, ssim_1d
from .nefnet import (
    ElectrocardioField,
    ModelConfig,
    NefNet,
    decode_view,
    encode_view,
    fuse_views,
)
from .viewpoints import Viewpoint, resolve_view, unit_vector


class TrainingDivergedError(RuntimeError):
    """Loss became NaN; message names the offending step."""


class SplitError(ValueError):
    """Malformed view-group split."""


def _dedupe_key(v: Viewpoint) -> tuple[float, float]:
    return (round(v.theta, 12), round(v.phi, 12))


@dataclass
class ViewGroupSplit:
    """The IG/RG/SG view-group assignment.

    Entries may be lead names or (theta, phi) pairs; they are resolved to
    viewpoints up front.  The groups must be pairwise disjoint and the
    input group non-empty.
    """

    input_group: list
    reconstruction_group: list = field(default_factory=list)
    synthesis_group: list = field(default_factory=list)

    def __post_init__(self):
        self.ig = [resolve_view(v) for v in self.input_group]
        self.rg = [resolve_view(v) for v in self.reconstruction_group]
        self.sg = [resolve_view(v) for v in self.synthesis_group]
        self.ig_names = [self._name(v) for v in self.input_group]
        self.rg_names = [self._name(v) for v in self.reconstruction_group]
        self.sg_names = [self._name(v) for v in self.synthesis_group]
        if not self.ig:
            raise SplitError("input group must not be empty")
        seen: set = set()
        for group_name, group in (("IG", self.ig), ("RG", self.rg), ("SG", self.sg)):
            for v in group:
                key = _dedupe_key(v)
                if key in seen:
                    raise SplitError(
                        f"view ({v.theta:.6g}, {v.phi:.6g}) of {group_name} appears in "
                        f"more than one group; groups must be pairwise disjoint")
                seen.add(key)

    @staticmethod
    def _name(spec) -> str:
        if isinstance(spec, str):
            return spec
        v = resolve_view(spec)
        return f"({v.theta:.4f}, {v.phi:.4f})"

    @classmethod
    def from_dict(cls, doc: dict) -> "ViewGroupSplit":
        try:
            return cls(
                input_group=list(doc["IG"]),
                reconstruction_group=list(doc.get("RG", [])),
                synthesis_group=list(doc.get("SG", [])),
            )
        except KeyError as exc:
            raise SplitError(f"split file is missing the {exc.args[0]!r} group") from exc

    def to_dict(self) -> dict:
        def plain(entries):
            return [e if isinstance(e, str) else [resolve_view(e).theta, resolve_view(e).phi]
                    for e in entries]
        return {"IG": plain(self.input_group), "RG": plain(self.reconstruction_group),
                "SG": plain(self.synthesis_group)}


@dataclass
class TrainConfig:
    batch_size: int = 32
    epochs: int = 150
    lr: float = 0.1
    lr_drop_epochs: tuple[int, ...] = (50, 100)
    lr_drop_factor: float = 0.1
    momentum: float = 0.9
    seed: int = 0
    standin_enabled: bool = True
    perturb_std: float = DEFAULT_PERTURB_STD
    grad_clip: float = 5.0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        self.lr_drop_epochs = tuple(self.lr_drop_epochs)


def lr_at_epoch(epoch: int, tcfg: TrainConfig) -> float:
    drops = sum(1 for d in tcfg.lr_drop_epochs if epoch >= d)
    return tcfg.lr * (tcfg.lr_drop_factor ** drops)


@dataclass
class EpochStats:
    epoch: int
    loss: float
    mae: float
    lr: float


@dataclass
class TrainHistory:
    epochs: list[EpochStats] = field(default_factory=list)

    @property
    def losses(self) -> list[float]:
        return [e.loss for e in self.epochs]

    @property
    def maes(self) -> list[float]:
        return [e.mae for e in self.epochs]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["epoch", "loss", "lr"])
        for e in self.epochs:
            writer.writerow([e.epoch, f"{e.loss:.8f}", f"{e.lr:g}"])
        return buf.getvalue()


def mae(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    return (a - b).abs().mean()


def standin_loss(
    per_view_fields: list[ElectrocardioField],
    fused: ElectrocardioField,
    q: Viewpoint,
    net: NefNet,
    perturb: PerturbationConfig | None = None,
) -> tuple[torch.Tensor, torch.Tensor]:
    """The two standin terms for one heartbeat and one queried viewpoint.

    The target is the fused-representation reconstruction, detached from
    the graph; each term averages the MAE between that target and the
    reconstruction with one view's basic (resp. deflection) representation
    substituted in.  Gradients flow through the predictions only.
    """
    if not per_view_fields:
        raise ValueError("need at least one per-view field")
    lengths = fused.deflection_lengths
    for f in per_view_fields:
        if f.z_d.shape != fused.z_d.shape or f.deflection_lengths != lengths:
            raise ValueError("per-view fields do not match the fused field")

    def dec(z_b, z_d):
        code = torch.as_tensor(
            angular_encode(q, perturb).values, dtype=net.dtype).unsqueeze(0)
        zb = None if z_b is None else z_b.unsqueeze(0)
        return net.decode_batch(zb, z_d.unsqueeze(0), [lengths], code)[0]

    target = dec(fused.z_b, fused.z_d).detach()
    l_zb_terms = [mae(target, dec(f.z_b, fused.z_d)) for f in per_view_fields]
    l_zd_terms = [mae(target, dec(fused.z_b, f.z_d)) for f in per_view_fields]
    l_zb = torch.stack(l_zb_terms).mean()
    l_zd = torch.stack(l_zd_terms).mean()
    return l_zb, l_zd


def total_loss(x_q, x_hat_q, l_zb=None, l_zd=None) -> torch.Tensor:
    """Reconstruction MAE plus half the sum of the standin terms."""
    a = torch.as_tensor(x_q)
    b = torch.as_tensor(x_hat_q)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")
    loss = mae(a, b)
    if l_zb is not None or l_zd is not None:
        zb = l_zb if l_zb is not None else torch.zeros((), dtype=loss.dtype)
        zd = l_zd if l_zd is not None else torch.zeros((), dtype=loss.dtype)
        loss = loss + 0.5 * (zb + zd)
    return loss


def _views_tensor(
    cycles: list[MultiViewCycle],
    viewpoints: list[Viewpoint],
    dtype: torch.dtype,
) -> torch.Tensor:
    rows = []
    for mvc in cycles:
        for vp in viewpoints:
            rows.append(mvc.signal_at(vp))
    return torch.as_tensor(np.stack(rows), dtype=dtype)


def _codes(viewpoints, perturb, dtype) -> torch.Tensor:
    return torch.as_tensor(
        np.stack([angular_encode(v, perturb).values for v in viewpoints]), dtype=dtype)


def train(
    dataset: list[MultiViewCycle],
    split: ViewGroupSplit,
    tcfg: TrainConfig = TrainConfig(),
    mcfg: ModelConfig = ModelConfig(),
    log=None,
) -> tuple[NefNet, TrainHistory]:
    """SGD training of a fresh model on the IG -> RG protocol.

    Deterministic for fixed seeds: data order, query sampling, angle jitter,
    and parameter init all derive from ``tcfg.seed`` / ``mcfg.seed``.
    """
    if not dataset:
        raise ValueError("empty training dataset")
    if not split.rg:
        raise SplitError("reconstruction group must not be empty for training")
    for mvc in dataset:
        for vp in split.ig + split.rg:
            mvc.signal_at(vp)  # raises KeyError when a required view is missing

    net = NefNet(mcfg)
    params = [p for p in net.parameters() if p.requires_grad]
    opt = torch.optim.SGD(params, lr=tcfg.lr, momentum=tcfg.momentum)
    rng = np.random.default_rng(tcfg.seed)
    perturb = PerturbationConfig(enabled=True, std=tcfg.perturb_std, seed=tcfg.seed + 1)
    # Separate jitter stream for the standin decodes keeps the main stream's
    # consumption identical whether or not the standin loss is enabled, so
    # ablation runs differ only through the loss term itself.
    standin_perturb = PerturbationConfig(enabled=True, std=tcfg.perturb_std, seed=tcfg.seed + 2)
    history = TrainHistory()
    n = len(dataset)
    L = len(split.ig)
    dtype = net.dtype
    global_step = 0

    for epoch in range(tcfg.epochs):
        lr = lr_at_epoch(epoch, tcfg)
        for group in opt.param_groups:
            group["lr"] = lr
        order = rng.permutation(n)
        loss_sum = 0.0
        mae_sum = 0.0
        seen = 0
        for start in range(0, n, tcfg.batch_size):
            batch = [dataset[i] for i in order[start:start + tcfg.batch_size]]
            b = len(batch)
            signals = _views_tensor(batch, split.ig, dtype)
            code_views = [vp for _ in batch for vp in split.ig]
            codes = _codes(code_views, perturb, dtype)
            dem_rows = [mvc.demarcations for mvc in batch for _ in split.ig]
            z_b, z_d = net.encode_batch(signals, codes, dem_rows)
            z_d = z_d.reshape(b, L, *z_d.shape[1:])
            fused_zd = z_d.mean(dim=1)
            fused_zb = None
            if z_b is not None:
                z_b = z_b.reshape(b, L, *z_b.shape[1:])
                fused_zb = z_b.mean(dim=1)

            queries = [split.rg[rng.integers(len(split.rg))] for _ in batch]
            targets = torch.as_tensor(
                np.stack([mvc.signal_at(q) for mvc, q in zip(batch, queries)]), dtype=dtype)
            q_codes = _codes(queries, perturb, dtype)
            lengths = [tuple(int(x) for x in np.diff(mvc.demarcations)) for mvc in batch]
            preds = net.decode_batch(fused_zb, fused_zd, lengths, q_codes)
            recon = mae(targets, preds)

            loss = recon
            if tcfg.standin_enabled:
                anchor = preds.detach().repeat(L, 1)
                rep_lengths = lengths * L
                rep_q = list(queries) * L
                # One view's representation substituted into the fused field,
                # all views and cycles batched together.
                sub_zd = fused_zd.repeat(L, 1, 1, 1)
                if z_b is not None:
                    sub_zb = z_b.permute(1, 0, 2, 3).reshape(b * L, *z_b.shape[2:])
                    l_zb = mae(anchor, net.decode_batch(
                        sub_zb, sub_zd, rep_lengths, _codes(rep_q, standin_perturb, dtype)))
                else:
                    l_zb = torch.zeros((), dtype=dtype)
                one_zd = z_d.permute(1, 0, 2, 3, 4).reshape(b * L, *z_d.shape[2:])
                full_zb = None if fused_zb is None else fused_zb.repeat(L, 1, 1)
                l_zd = mae(anchor, net.decode_batch(
                    full_zb, one_zd, rep_lengths, _codes(rep_q, standin_perturb, dtype)))
                loss = loss + 0.5 * (l_zb + l_zd)

            if not torch.isfinite(loss):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch}, step {global_step}")
            opt.zero_grad()
            loss.backward()
            if tcfg.grad_clip:
                torch.nn.utils.clip_grad_norm_(params, tcfg.grad_clip)
            opt.step()
            loss_sum += float(loss.detach()) * b
            mae_sum += float(recon.detach()) * b
            seen += b
            global_step += 1
        stats = EpochStats(epoch=epoch, loss=loss_sum / seen, mae=mae_sum / seen, lr=lr)
        history.epochs.append(stats)
        if log is not None:
            log(f"epoch {epoch:3d}  loss {stats.loss:.5f}  mae {stats.mae:.5f}  lr {lr:g}")
    return net, history


def copy_nearest_baseline(
    mvc: MultiViewCycle,
    input_views: list[Viewpoint],
    query: Viewpoint,
) -> np.ndarray:
    """Trivial predictor: copy the input view directionally closest to the query."""
    dots = [float(np.dot(unit_vector(v), unit_vector(query))) for v in input_views]
    return mvc.signal_at(input_views[int(np.argmax(dots))])


@dataclass
class ViewScore:
    name: str
    psnr_mean: float
    psnr_std: float
    ssim_mean: float
    ssim_std: float
    count: int


@dataclass
class EvalReport:
    mode: str
    rows: list[ViewScore]
    psnr_mean: float
    psnr_std: float
    ssim_mean: float
    ssim_std: float

    def to_text(self) -> str:
        lines = [f"{'view':>18}  {'PSNR':>8}  {'std':>6}  {'SSIM':>7}  {'std':>7}  {'n':>4}"]
        for r in self.rows:
            lines.append(
                f"{r.name:>18}  {r.psnr_mean:8.2f}  {r.psnr_std:6.2f}  "
                f"{r.ssim_mean:7.4f}  {r.ssim_std:7.4f}  {r.count:4d}")
        lines.append(
            f"{'aggregate':>18}  {self.psnr_mean:8.2f}  {self.psnr_std:6.2f}  "
            f"{self.ssim_mean:7.4f}  {self.ssim_std:7.4f}")
        return "\n".join(lines)


def evaluate(
    net: NefNet,
    dataset: list[MultiViewCycle],
    split: ViewGroupSplit,
    mode: str = "synthesis",
) -> EvalReport:
    """Score reconstruction quality on RG (transformation) or SG (synthesis).

    Encodes each cycle's IG views deterministically, decodes every scored
    view type, and reports per-view-type and aggregate PSNR/SSIM.
    """
    if mode == "synthesis":
        targets, names = split.sg, split.sg_names
    elif mode == "transformation":
        targets, names = split.rg, split.rg_names
    else:
        raise ValueError(f"unknown evaluation mode {mode!r}")
    if not targets:
        raise ValueError(f"no views to score: the {mode} group is empty")
    if not dataset:
        raise ValueError("empty evaluation dataset")
    per_view: dict[str, list[tuple[float, float]]] = {name: [] for name in names}
    with torch.inference_mode():
        for mvc in dataset:
            fields = [encode_view(net, mvc.cycle_at(vp), vp, None) for vp in split.ig]
            fused = fuse_views(fields)
            for name, vp in zip(names, targets):
                pred = decode_view(net, fused, vp, None)
                ref = mvc.signal_at(vp)
                per_view[name].append((psnr(ref, pred), ssim_1d(ref, pred)))
    rows = []
    all_psnr: list[float] = []
    all_ssim: list[float] = []
    for name in names:
        scores = per_view[name]
        ps = [s[0] for s in scores]
        ss = [s[1] for s in scores]
        rows.append(ViewScore(
            name=name,
            psnr_mean=float(np.mean(ps)), psnr_std=float(np.std(ps)),
            ssim_mean=float(np.mean(ss)), ssim_std=float(np.std(ss)),
            count=len(scores)))
        all_psnr += ps
        all_ssim += ss
    return EvalReport(
        mode=mode, rows=rows,
        psnr_mean=float(np.mean(all_psnr)), psnr_std=float(np.std(all_psnr)),
        ssim_mean=float(np.mean(all_ssim)), ssim_std=float(np.std(all_ssim)))
