"""Cardiac-cycle data model and the on-disk dataset format.

A dataset is a directory with a ``manifest.json``:

    {
      "records": [
        {
          "id": "rec001",
          "sampling_rate": 500,
          "leads": [
            {"name": "I", "file": "rec001_I.f32"},
            {"name": "custom", "theta": 1.2, "phi": -0.4, "samples": [...]}
          ],
          "cycles": [
            {"demarcations": [0, 64, 96, 192, 256, 448, 512]}
          ],
          "label": "normal"           // or null
        }
      ]
    }

Each lead carries either ``file`` (raw little-endian float32, the record's
full trace with all cycles concatenated) or an inline ``samples`` array.
Cycle demarcations are seven absolute sample indices into that trace; the
cycle occupies [D0, D6) and the deflection boundaries are rebased to the
cycle on load.  Lead names must resolve in the 12-lead table unless the
lead carries explicit ``theta``/``phi`` radians.

Loading resamples every cycle to 500 Hz, then to the canonical length of
512 samples, rescales demarcations accordingly, and min-max normalizes each
lead of each cycle to [0, 1].

Converting vendor formats (WFDB and friends) is out of scope; export those
to this manifest layout with the tool of your choice.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .preprocess import (
    normalize,
    remove_baseline_drift,
    rescale_demarcations,
    resample,
    resample_to_length,
)
from .viewpoints import LEAD_ANGLES, Viewpoint

TARGET_RATE = 500.0
CANONICAL_LENGTH = 512
N_DEFLECTIONS = 6

DEFLECTION_NAMES = ("P", "PR", "QRS", "ST", "T", "TP")


class DatasetError(ValueError):
    """Malformed manifest or signal data; message names the record."""


@dataclass
class CardiacCycle:
    """One heartbeat: normalized samples plus deflection demarcations.

    ``demarcations`` holds the seven boundary indices D0..D6 with D0 = 0 and
    D6 = len(samples); the six deflections are the half-open sample ranges
    between consecutive boundaries.
    """

    samples: np.ndarray
    sampling_rate: float
    demarcations: np.ndarray
    original_length: int | None = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        self.demarcations = np.asarray(self.demarcations, dtype=np.int64)
        if self.samples.ndim != 1:
            raise ValueError(f"samples must be 1-D, got shape {self.samples.shape}")
        d = self.demarcations
        if d.shape != (N_DEFLECTIONS + 1,):
            raise ValueError(f"expected 7 demarcations, got shape {d.shape}")
        if d[0] != 0 or d[-1] != self.samples.size:
            raise ValueError(
                f"demarcations must span [0, {self.samples.size}], got {d.tolist()}")
        if np.any(np.diff(d) <= 0):
            raise ValueError(f"demarcations must be strictly increasing: {d.tolist()}")
        if self.original_length is None:
            self.original_length = self.samples.size

    @property
    def length(self) -> int:
        return self.samples.size

    def deflection_lengths(self) -> np.ndarray:
        return np.diff(self.demarcations)


@dataclass
class MultiViewCycle:
    """One heartbeat observed from several viewpoints.

    All member cycles share the same length and the same demarcations: a
    heartbeat's timing does not depend on where it is observed from.
    """

    views: list[tuple[CardiacCycle, Viewpoint]]
    label: str | None = None
    record_id: str | None = None

    def __post_init__(self):
        if len(self.views) < 1:
            raise ValueError("a multi-view cycle needs at least one view")
        first, _ = self.views[0]
        for cycle, _ in self.views[1:]:
            if cycle.length != first.length:
                raise ValueError("all views of a cycle must have the same length")
            if not np.array_equal(cycle.demarcations, first.demarcations):
                raise ValueError("all views of a cycle must share demarcations")

    def __len__(self) -> int:
        return len(self.views)

    @property
    def demarcations(self) -> np.ndarray:
        return self.views[0][0].demarcations

    @property
    def length(self) -> int:
        return self.views[0][0].length

    def viewpoints(self) -> list[Viewpoint]:
        return [vp for _, vp in self.views]

    def cycle_at(self, viewpoint: Viewpoint, atol: float = 1e-9) -> CardiacCycle:
        """The recorded cycle for a viewpoint present in this multi-view set."""
        for cycle, vp in self.views:
            if abs(vp.theta - viewpoint.theta) <= atol and abs(vp.phi - viewpoint.phi) <= atol:
                return cycle
        raise KeyError(f"no view at ({viewpoint.theta}, {viewpoint.phi}) in this cycle")

    def signal_at(self, viewpoint: Viewpoint, atol: float = 1e-9) -> np.ndarray:
        """The recorded samples for a viewpoint present in this cycle."""
        return self.cycle_at(viewpoint, atol).samples

    def subset(self, viewpoints: list[Viewpoint]) -> "MultiViewCycle":
        """A new cycle restricted to the given viewpoints (must all exist)."""
        picked = []
        for want in viewpoints:
            for cycle, vp in self.views:
                if abs(vp.theta - want.theta) <= 1e-9 and abs(vp.phi - want.phi) <= 1e-9:
                    picked.append((cycle, vp))
                    break
            else:
                raise KeyError(f"no view at ({want.theta}, {want.phi}) in this cycle")
        return MultiViewCycle(views=picked, label=self.label, record_id=self.record_id)


@dataclass
class LeadSpec:
    name: str
    viewpoint: Viewpoint
    samples: np.ndarray


@dataclass
class DatasetManifest:
    """Parsed, validated manifest with decoded per-lead signals."""

    root: Path
    records: list[dict] = field(default_factory=list)


def _resolve_lead_viewpoint(lead: dict, record_id: str) -> Viewpoint:
    if "theta" in lead and "phi" in lead:
        return Viewpoint(float(lead["theta"]), float(lead["phi"]))
    name = lead.get("name")
    if name in LEAD_ANGLES:
        return LEAD_ANGLES[name]
    raise DatasetError(
        f"record {record_id!r}: lead {name!r} is not a standard lead and has no theta/phi")


def _decode_lead_samples(lead: dict, root: Path, record_id: str) -> np.ndarray:
    name = lead.get("name", "?")
    if "samples" in lead:
        data = np.asarray(lead["samples"], dtype=np.float64)
    elif "file" in lead:
        path = root / lead["file"]
        if not path.exists():
            raise DatasetError(f"record {record_id!r}: lead {name!r} file missing: {path}")
        data = np.frombuffer(path.read_bytes(), dtype="<f4").astype(np.float64)
    else:
        raise DatasetError(f"record {record_id!r}: lead {name!r} has neither 'file' nor 'samples'")
    if data.ndim != 1 or data.size == 0:
        raise DatasetError(f"record {record_id!r}: lead {name!r} decodes to an empty signal")
    return data


def read_manifest(dataset_dir: "str | Path") -> DatasetManifest:
    root = Path(dataset_dir)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise DatasetError(f"no manifest.json in {root}")
    try:
        doc = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DatasetError(f"manifest.json is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "records" not in doc:
        raise DatasetError("manifest must be an object with a 'records' list")
    return DatasetManifest(root=root, records=list(doc["records"]))


def _prepare_cycle(
    segment: np.ndarray,
    demarcations: np.ndarray,
    sampling_rate: float,
    canonical_length: int,
) -> CardiacCycle:
    """Resample one extracted cycle to 500 Hz then to canonical length."""
    original_length = segment.size
    sig = resample(segment, sampling_rate, TARGET_RATE)
    dem = rescale_demarcations(demarcations, original_length, sig.size)
    if sig.size != canonical_length:
        dem = rescale_demarcations(dem, sig.size, canonical_length)
        sig = resample_to_length(sig, canonical_length)
    return CardiacCycle(
        samples=normalize(sig),
        sampling_rate=TARGET_RATE,
        demarcations=dem,
        original_length=original_length,
    )


def load_dataset(
    dataset_dir: "str | Path",
    canonical_length: int = CANONICAL_LENGTH,
    detrend: bool = False,
) -> list[MultiViewCycle]:
    """Load, preprocess, and validate every cycle of every record.

    Results are ordered by manifest order (records, then cycles).  With
    ``detrend`` a moving-average baseline is removed from each lead trace
    before cycles are cut (off by default; synthetic data needs none).
    """
    manifest = read_manifest(dataset_dir)
    out: list[MultiViewCycle] = []
    for rec_idx, rec in enumerate(manifest.records):
        rec_id = str(rec.get("id", f"#{rec_idx}"))
        try:
            rate = float(rec["sampling_rate"])
        except (KeyError, TypeError, ValueError):
            raise DatasetError(f"record {rec_id!r}: missing or bad sampling_rate") from None
        label = rec.get("label")
        leads = [
            LeadSpec(
                name=str(lead.get("name", f"lead{i}")),
                viewpoint=_resolve_lead_viewpoint(lead, rec_id),
                samples=_decode_lead_samples(lead, manifest.root, rec_id),
            )
            for i, lead in enumerate(rec.get("leads", []))
        ]
        if not leads:
            raise DatasetError(f"record {rec_id!r}: no leads")
        if detrend:
            for lead in leads:
                lead.samples = remove_baseline_drift(lead.samples, rate)
        trace_len = leads[0].samples.size
        for lead in leads[1:]:
            if lead.samples.size != trace_len:
                raise DatasetError(
                    f"record {rec_id!r}: lead {lead.name!r} length {lead.samples.size} "
                    f"!= {trace_len} of lead {leads[0].name!r}")
        for cyc_idx, cyc in enumerate(rec.get("cycles", [])):
            dem_abs = np.asarray(cyc.get("demarcations", []), dtype=np.int64)
            if dem_abs.shape != (N_DEFLECTIONS + 1,):
                raise DatasetError(
                    f"record {rec_id!r} cycle {cyc_idx}: need 7 demarcations, got {dem_abs.tolist()}")
            if np.any(np.diff(dem_abs) <= 0):
                raise DatasetError(
                    f"record {rec_id!r} cycle {cyc_idx}: demarcations not strictly increasing: "
                    f"{dem_abs.tolist()}")
            if dem_abs[0] < 0 or dem_abs[-1] > trace_len:
                raise DatasetError(
                    f"record {rec_id!r} cycle {cyc_idx}: demarcations {dem_abs.tolist()} outside "
                    f"the declared trace length {trace_len}")
            dem_rel = dem_abs - dem_abs[0]
            views = []
            for lead in leads:
                segment = lead.samples[dem_abs[0]:dem_abs[-1]]
                try:
                    cycle = _prepare_cycle(segment, dem_rel, rate, canonical_length)
                except ValueError as exc:
                    raise DatasetError(
                        f"record {rec_id!r} cycle {cyc_idx} lead {lead.name!r}: {exc}") from exc
                views.append((cycle, lead.viewpoint))
            out.append(MultiViewCycle(views=views, label=label, record_id=rec_id))
    return out


def save_dataset(
    cycles: list[MultiViewCycle],
    dataset_dir: "str | Path",
    lead_names: list[str] | None = None,
    inline: bool = True,
) -> Path:
    """Write cycles as a manifest dataset (one record per cycle).

    With ``inline`` the samples are embedded in the manifest; otherwise one
    raw little-endian float32 file is written per lead per record.
    """
    root = Path(dataset_dir)
    root.mkdir(parents=True, exist_ok=True)
    records = []
    for idx, mvc in enumerate(cycles):
        rec_id = mvc.record_id or f"cycle{idx:05d}"
        leads = []
        for view_idx, (cycle, vp) in enumerate(mvc.views):
            name = lead_names[view_idx] if lead_names else f"view{view_idx}"
            lead: dict = {"name": name, "theta": vp.theta, "phi": vp.phi}
            if inline:
                lead["samples"] = [float(x) for x in cycle.samples]
            else:
                fname = f"{rec_id}_{name}.f32"
                (root / fname).write_bytes(
                    np.asarray(cycle.samples, dtype="<f4").tobytes())
                lead["file"] = fname
            leads.append(lead)
        records.append({
            "id": rec_id,
            "sampling_rate": mvc.views[0][0].sampling_rate,
            "leads": leads,
            "cycles": [{"demarcations": [int(d) for d in mvc.demarcations]}],
            "label": mvc.label,
        })
    (root / "manifest.json").write_text(
        json.dumps({"records": records}, indent=1), encoding="utf-8")
    return root
