"""HTTP inference service: encode once, query any viewpoint.

Clients POST one or more views of a heartbeat to ``/v1/encode`` and receive
a session id; the fused field representation stays in memory so panorama
queries (``/v1/panorama?session&theta&phi``) answer without re-uploading.
A loaded memory bank additionally enables ``/v1/synthesize``.  All handlers
run against an immutable parameter snapshot, so responses are deterministic
for a fixed checkpoint and session.
"""

from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, HTTPException, Query
from pydantic import BaseModel, Field

from . import __version__
from .checkpoint import load_checkpoint
from .data import CANONICAL_LENGTH, CardiacCycle, TARGET_RATE
from .nefnet import ElectrocardioField, NefNet, decode_view, encode_view, fuse_views
from .preprocess import normalize, rescale_demarcations, resample_to_length
from .scratchsynth import InsufficientDataError, MemoryBank, load_bank, synthesize_scratch
from .viewpoints import LEAD_ANGLES, Viewpoint

SESSION_TTL_S = 30 * 60


class ViewIn(BaseModel):
    theta: float
    phi: float
    samples: list[float] = Field(min_length=2)
    demarcations: list[int] = Field(min_length=7, max_length=7)


class EncodeRequest(BaseModel):
    views: list[ViewIn] = Field(min_length=1)


class SynthesizeRequest(BaseModel):
    label: str | None = None
    n: int = Field(ge=0, le=256)
    viewpoints: list[tuple[float, float]] = Field(min_length=1)
    seed: int = 0


@dataclass
class SessionState:
    session_id: str
    fused: ElectrocardioField
    model_version: str
    created: float
    last_used: float


@dataclass
class SessionStore:
    ttl_s: float = SESSION_TTL_S
    _sessions: dict = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock)

    def put(self, state: SessionState) -> None:
        with self._lock:
            self._evict(time.monotonic())
            self._sessions[state.session_id] = state

    def get(self, session_id: str) -> SessionState | None:
        now = time.monotonic()
        with self._lock:
            self._evict(now)
            state = self._sessions.get(session_id)
            if state is not None:
                state.last_used = now
            return state

    def _evict(self, now: float) -> None:
        dead = [k for k, s in self._sessions.items() if now - s.last_used > self.ttl_s]
        for k in dead:
            del self._sessions[k]

    def __len__(self) -> int:
        with self._lock:
            return len(self._sessions)


def _cycle_from_view(view: ViewIn, t_x: int) -> tuple[CardiacCycle, Viewpoint]:
    samples = np.asarray(view.samples, dtype=np.float64)
    dem = np.asarray(view.demarcations, dtype=np.int64)
    if dem[0] != 0 or dem[-1] != samples.size:
        raise HTTPException(422, detail=f"demarcations must span [0, {samples.size}]")
    if np.any(np.diff(dem) <= 0):
        raise HTTPException(422, detail="demarcations must be strictly increasing")
    if samples.size != t_x:
        dem = rescale_demarcations(dem, samples.size, t_x)
        samples = resample_to_length(samples, t_x)
    cycle = CardiacCycle(
        samples=normalize(samples), sampling_rate=TARGET_RATE, demarcations=dem)
    return cycle, Viewpoint(view.theta, view.phi)


def create_app(
    net: NefNet,
    bank: MemoryBank | None = None,
    bank_net: NefNet | None = None,
) -> FastAPI:
    """Build the service around an immutable parameter snapshot."""
    net.eval()
    app = FastAPI(title="ecgfield panorama service", version=__version__)
    store = SessionStore()
    app.state.store = store
    app.state.net = net

    @app.get("/v1/healthz")
    def healthz():
        return {"status": "ok", "model": __version__, "sessions": len(store)}

    @app.get("/v1/leads")
    def leads():
        return {
            name: {"theta": vp.theta, "phi": vp.phi}
            for name, vp in LEAD_ANGLES.items()
        }

    @app.post("/v1/encode")
    def encode(req: EncodeRequest):
        try:
            pairs = [_cycle_from_view(v, net.cfg.t_x) for v in req.views]
            first_dem = pairs[0][0].demarcations
            for cycle, _ in pairs[1:]:
                if not np.array_equal(cycle.demarcations, first_dem):
                    raise HTTPException(
                        422, detail="all views of one heartbeat must share demarcations")
            fields = [encode_view(net, cycle, vp, None) for cycle, vp in pairs]
            fused = fuse_views(fields).detach()
        except HTTPException:
            raise
        except ValueError as exc:
            raise HTTPException(422, detail=str(exc)) from exc
        sid = uuid.uuid4().hex
        now = time.monotonic()
        store.put(SessionState(
            session_id=sid, fused=fused, model_version=__version__,
            created=now, last_used=now))
        return {"session": sid, "length": net.cfg.t_x}

    @app.get("/v1/panorama")
    def panorama(session: str = Query(...), theta: float = Query(...), phi: float = Query(...)):
        state = store.get(session)
        if state is None:
            raise HTTPException(404, detail=f"unknown or expired session {session!r}")
        signal = decode_view(net, state.fused, Viewpoint(theta, phi), None)
        dem = np.concatenate([[0], np.cumsum(state.fused.deflection_lengths)])
        return {
            "samples": [float(x) for x in signal],
            "demarcations": [int(d) for d in dem],
        }

    @app.post("/v1/synthesize")
    def synthesize(req: SynthesizeRequest):
        if bank is None or bank_net is None:
            raise HTTPException(409, detail="no memory bank loaded; start with --bank")
        try:
            cycles = synthesize_scratch(
                bank, bank_net, req.label, req.n,
                [Viewpoint(t, p) for t, p in req.viewpoints], seed=req.seed)
        except InsufficientDataError as exc:
            raise HTTPException(409, detail=str(exc)) from exc
        return {
            "cycles": [
                {
                    "label": mvc.label,
                    "demarcations": [int(d) for d in mvc.demarcations],
                    "views": [
                        {"theta": vp.theta, "phi": vp.phi,
                         "samples": [float(x) for x in cycle.samples]}
                        for cycle, vp in mvc.views
                    ],
                }
                for mvc in cycles
            ]
        }

    return app


def serve(
    ckpt_path: str,
    host: str = "127.0.0.1",
    port: int = 8787,
    bank_path: str | None = None,
) -> None:
    """Load a checkpoint (and optional bank) and run the HTTP service."""
    import uvicorn

    net = load_checkpoint(ckpt_path)
    bank = bank_net = None
    if bank_path:
        bank, bank_net = load_bank(bank_path)
    app = create_app(net, bank, bank_net)
    uvicorn.run(app, host=host, port=port, log_level="warning")
