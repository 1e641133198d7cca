"""Command-line entry points.

One command per pipeline stage: dataset preparation and synthetic
generation, training, evaluation, panorama export, memory-bank building,
from-scratch synthesis, and the HTTP service.  Errors exit nonzero with a
single ``error: ...`` line on stderr.
"""

from __future__ import annotations

import json
import math
import sys
from pathlib import Path

import click
import numpy as np

from .checkpoint import load_checkpoint, save_checkpoint
from .data import CANONICAL_LENGTH, load_dataset, save_dataset
from .dipole import generate_dipole_dataset
from .nefnet import ModelConfig, decode_view, encode_and_fuse, panorama_grid
from .scratchsynth import build_bank, load_bank, save_bank, synthesize_scratch
from .training import TrainConfig, ViewGroupSplit, evaluate, train
from .viewpoints import LEAD_ANGLES, Viewpoint, resolve_view
from .data import CardiacCycle, MultiViewCycle, TARGET_RATE
from .preprocess import normalize, rescale_demarcations, resample_to_length


def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(1)


def _parse_views(spec: str) -> list[Viewpoint]:
    views = []
    for token in spec.split(","):
        token = token.strip()
        if not token:
            continue
        if ":" in token:
            theta, phi = token.split(":", 1)
            views.append(Viewpoint(float(theta), float(phi)))
        else:
            views.append(resolve_view(token))
    if not views:
        raise ValueError(f"no viewpoints in {spec!r}")
    return views


def _load_split(path: str) -> ViewGroupSplit:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return ViewGroupSplit.from_dict(doc)


def _load_cycle_file(path: str) -> MultiViewCycle:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    views = []
    for v in doc["views"]:
        samples = np.asarray(v["samples"], dtype=np.float64)
        dem = np.asarray(v["demarcations"], dtype=np.int64)
        if samples.size != CANONICAL_LENGTH:
            dem = rescale_demarcations(dem, samples.size, CANONICAL_LENGTH)
            samples = resample_to_length(samples, CANONICAL_LENGTH)
        cycle = CardiacCycle(samples=normalize(samples), sampling_rate=TARGET_RATE,
                             demarcations=dem)
        views.append((cycle, Viewpoint(float(v["theta"]), float(v["phi"]))))
    return MultiViewCycle(views=views)


@click.group()
def main():
    """Electrocardio-field encoding and panoramic ECG view synthesis."""


@main.command("prepare-data")
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--detrend/--no-detrend", default=False,
              help="Remove a 0.2 s moving-average baseline before cutting cycles.")
def prepare_data(data_dir, out_dir, detrend):
    """Preprocess a manifest dataset into canonical normalized cycles."""
    try:
        cycles = load_dataset(data_dir, detrend=detrend)
        save_dataset(cycles, out_dir)
    except Exception as exc:
        _fail(str(exc))
    click.echo(f"wrote {len(cycles)} cycles to {out_dir}")


@main.command("gen-synthetic")
@click.option("--cycles", "n_cycles", required=True, type=int)
@click.option("--views", required=True,
              help="Comma-separated lead names or theta:phi pairs (radians).")
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--noise", default=0.0, type=float, show_default=True)
@click.option("--label", default=None)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def gen_synthetic(n_cycles, views, seed, noise, label, out_dir):
    """Generate a synthetic linear-field dataset in manifest format."""
    try:
        viewpoints = _parse_views(views)
        data = generate_dipole_dataset(
            n_cycles, viewpoints, noise_std=noise, seed=seed, label=label)
        save_dataset(data, out_dir)
    except Exception as exc:
        _fail(str(exc))
    click.echo(f"wrote {n_cycles} cycles x {len(viewpoints)} views to {out_dir}")


@main.command("train")
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--split", "split_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--epochs", default=150, type=int, show_default=True)
@click.option("--batch-size", default=32, type=int, show_default=True)
@click.option("--lr", default=0.1, type=float, show_default=True)
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--out", "ckpt_path", required=True, type=click.Path(dir_okay=False))
@click.option("--history", "history_path", default=None, type=click.Path(dir_okay=False),
              help="History CSV path (default: <out>.history.csv).")
@click.option("--no-standin", is_flag=True, default=False,
              help="Disable the standin loss term.")
@click.option("--no-basic-branch", is_flag=True, default=False,
              help="Train without the basic representation (for from-scratch synthesis).")
@click.option("--quiet", is_flag=True, default=False)
def train_cmd(data_dir, split_path, epochs, batch_size, lr, seed, ckpt_path,
              history_path, no_standin, no_basic_branch, quiet):
    """Train on the IG -> RG protocol and write a checkpoint."""
    try:
        dataset = load_dataset(data_dir)
        split = _load_split(split_path)
        tcfg = TrainConfig(batch_size=batch_size, epochs=epochs, lr=lr, seed=seed,
                           standin_enabled=not no_standin)
        mcfg = ModelConfig(seed=seed, use_basic_branch=not no_basic_branch)
        log = None if quiet else (lambda line: click.echo(line))
        net, history = train(dataset, split, tcfg, mcfg, log=log)
        save_checkpoint(net, ckpt_path)
        hist_path = Path(history_path) if history_path else Path(str(ckpt_path) + ".history.csv")
        hist_path.write_text(history.to_csv(), encoding="utf-8")
    except Exception as exc:
        _fail(str(exc))
    click.echo(f"checkpoint: {ckpt_path}")
    click.echo(f"history: {hist_path}")


@main.command("eval")
@click.option("--ckpt", "ckpt_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--split", "split_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--mode", type=click.Choice(["transformation", "synthesis"]), default="synthesis",
              show_default=True)
@click.option("--input-views", default=None,
              help="Override the encoded views (comma-separated), e.g. a single lead.")
def eval_cmd(ckpt_path, data_dir, split_path, mode, input_views):
    """Score reconstruction quality as a PSNR/SSIM table."""
    try:
        net = load_checkpoint(ckpt_path)
        dataset = load_dataset(data_dir)
        split = _load_split(split_path)
        if input_views:
            split = ViewGroupSplit(
                input_group=[(v.theta, v.phi) for v in _parse_views(input_views)],
                reconstruction_group=split.reconstruction_group,
                synthesis_group=split.synthesis_group)
        report = evaluate(net, dataset, split, mode)
    except Exception as exc:
        _fail(str(exc))
    click.echo(report.to_text())


@main.command("panorama")
@click.option("--ckpt", "ckpt_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help='JSON file {"views": [{"theta","phi","samples","demarcations"}]}.')
@click.option("--theta-step", default=math.pi / 3, type=float, show_default=True)
@click.option("--phi-step", default=math.pi / 3, type=float, show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def panorama_cmd(ckpt_path, input_path, theta_step, phi_step, out_path):
    """Decode an evenly stepped grid of viewpoints to a JSON file."""
    try:
        net = load_checkpoint(ckpt_path)
        mvc = _load_cycle_file(input_path)
        field = encode_and_fuse(net, mvc, None).detach()
        thetas, phis = panorama_grid(theta_step, phi_step)
        cells = []
        for theta in thetas:
            row = []
            for phi in phis:
                sig = decode_view(net, field, Viewpoint(theta, phi), None)
                row.append({"samples": [float(x) for x in sig]})
            cells.append(row)
        dem = [0, *np.cumsum(field.deflection_lengths).tolist()]
        Path(out_path).write_text(json.dumps({
            "theta_values": thetas,
            "phi_values": phis,
            "demarcations": [int(d) for d in dem],
            "cells": cells,
        }), encoding="utf-8")
    except Exception as exc:
        _fail(str(exc))
    click.echo(f"wrote {len(thetas)}x{len(phis)} grid to {out_path}")


@main.command("build-bank")
@click.option("--ckpt", "ckpt_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--out", "bank_path", required=True, type=click.Path(dir_okay=False))
def build_bank_cmd(ckpt_path, data_dir, bank_path):
    """Encode a dataset into a self-contained memory bank file."""
    try:
        net = load_checkpoint(ckpt_path)
        dataset = load_dataset(data_dir)
        bank = build_bank(net, dataset)
        save_bank(bank, net, bank_path)
    except Exception as exc:
        _fail(str(exc))
    click.echo(f"bank with {len(bank)} entries: {bank_path}")


@main.command("synth")
@click.option("--bank", "bank_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--label", default=None)
@click.option("--n", "n", required=True, type=int)
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--views", default=",".join(LEAD_ANGLES), show_default=False,
              help="Viewpoints to decode (default: the 12 standard leads).")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def synth_cmd(bank_path, label, n, seed, views, out_dir):
    """Synthesize new multi-lead heartbeats by mixing bank entries."""
    try:
        bank, net = load_bank(bank_path)
        viewpoints = _parse_views(views)
        cycles = synthesize_scratch(bank, net, label, n, viewpoints, seed=seed)
        names = [v.strip() for v in views.split(",") if v.strip()]
        save_dataset(cycles, out_dir, lead_names=names if len(names) == len(viewpoints) else None)
    except Exception as exc:
        _fail(str(exc))
    click.echo(f"wrote {n} synthetic cycles to {out_dir}")


@main.command("serve")
@click.option("--ckpt", "ckpt_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8787, type=int, show_default=True)
@click.option("--bank", "bank_path", default=None, type=click.Path(exists=True, dir_okay=False))
def serve_cmd(ckpt_path, host, port, bank_path):
    """Run the HTTP inference service."""
    from .panoserve import serve

    try:
        serve(ckpt_path, host=host, port=port, bank_path=bank_path)
    except Exception as exc:
        _fail(str(exc))


if __name__ == "__main__":
    main()
