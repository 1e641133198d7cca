"""Single-file model checkpoints.

Layout: 4-byte magic ``ECGF``, a little-endian uint32 header length, a
canonical JSON header (config, format version, seed, and the ordered
parameter manifest with shapes), then the raw parameter blocks as
little-endian float32 in manifest order.  Saving a loaded model reproduces
the file byte for byte.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np
import torch

from .nefnet import ModelConfig, NefNet, config_to_dict

MAGIC = b"ECGF"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    """Unreadable or inconsistent checkpoint file."""


def checkpoint_bytes(net: NefNet) -> bytes:
    state = net.state_dict()
    names = sorted(state)
    header = {
        "format_version": FORMAT_VERSION,
        "config": config_to_dict(net.cfg),
        "seed": net.cfg.seed,
        "params": [{"name": n, "shape": list(state[n].shape)} for n in names],
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    chunks = [MAGIC, struct.pack("<I", len(header_bytes)), header_bytes]
    for n in names:
        chunks.append(state[n].detach().to(torch.float32).numpy().astype("<f4").tobytes())
    return b"".join(chunks)


def checkpoint_from_bytes(blob: bytes, origin: str = "<bytes>") -> NefNet:
    if len(blob) < 8 or blob[:4] != MAGIC:
        raise CheckpointError(f"{origin} is not a model checkpoint (bad magic)")
    (header_len,) = struct.unpack("<I", blob[4:8])
    if len(blob) < 8 + header_len:
        raise CheckpointError(f"{origin} is truncated (header)")
    try:
        header = json.loads(blob[8:8 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{origin}: bad header: {exc}") from exc
    if header.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"{origin}: unsupported format version {header.get('format_version')}")
    try:
        cfg = ModelConfig(**header["config"])
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"{origin}: bad config: {exc}") from exc
    net = NefNet(cfg)
    offset = 8 + header_len
    state = {}
    for entry in header["params"]:
        shape = tuple(int(s) for s in entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        end = offset + 4 * count
        if end > len(blob):
            raise CheckpointError(f"{origin} is truncated (block {entry['name']})")
        arr = np.frombuffer(blob, dtype="<f4", count=count, offset=offset).reshape(shape)
        state[entry["name"]] = torch.from_numpy(arr.copy())
        offset = end
    if offset != len(blob):
        raise CheckpointError(f"{origin} has {len(blob) - offset} trailing bytes")
    try:
        net.load_state_dict(state, strict=True)
    except RuntimeError as exc:
        raise CheckpointError(f"{origin}: parameters do not match the config: {exc}") from exc
    return net


def save_checkpoint(net: NefNet, path: "str | Path") -> Path:
    path = Path(path)
    path.write_bytes(checkpoint_bytes(net))
    return path


def load_checkpoint(path: "str | Path") -> NefNet:
    path = Path(path)
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    return checkpoint_from_bytes(blob, origin=str(path))
