"""Trigonometric viewpoint codes.

A viewpoint (theta, phi) maps to a 12-element code built from four
angle triplets ``[rho, sin(rho), cos(rho)]`` for rho in
``theta, phi, theta + phi, theta - phi``.  The sum/difference triplets let a
downstream MLP express projection terms such as sin(theta)cos(phi) through
sum-to-product identities, which raw angles cannot reach with affine maps.

During training a small Gaussian jitter can be added to both angles before
encoding, so the model never sees the exact same angles twice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .viewpoints import Viewpoint

CODE_SIZE = 12
DEFAULT_PERTURB_STD = math.pi / 50


@dataclass(frozen=True)
class AngularCode:
    """The 12-element trigonometric code of a viewpoint.

    Layout: [t, sin t, cos t, p, sin p, cos p, s, sin s, cos s, d, sin d, cos d]
    with t/p the (possibly jittered) angles, s = t + p, d = t - p.
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (CODE_SIZE,):
            raise ValueError(f"angular code must have shape ({CODE_SIZE},), got {v.shape}")
        object.__setattr__(self, "values", v)


@dataclass
class PerturbationConfig:
    """Gaussian angle jitter: on/off, standard deviation, and its RNG seed.

    Each config owns its own random stream, so concurrent workers can hold
    independent seeded instances.  ``std`` is a standard deviation in
    radians; the default is pi/50 (about 3.6 degrees).
    """

    enabled: bool = False
    std: float = DEFAULT_PERTURB_STD
    seed: int | None = None
    _rng: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.std < 0:
            raise ValueError("perturbation std must be >= 0")
        self._rng = np.random.default_rng(self.seed)

    def draw(self) -> tuple[float, float]:
        """Two independent jitter values, (0, 0) when disabled."""
        if not self.enabled or self.std == 0.0:
            return (0.0, 0.0)
        eps = self._rng.normal(0.0, self.std, size=2)
        return (float(eps[0]), float(eps[1]))


NO_PERTURBATION = PerturbationConfig(enabled=False)


def _triplet(rho: float) -> tuple[float, float, float]:
    return (rho, math.sin(rho), math.cos(rho))


def angular_encode(v: Viewpoint, cfg: PerturbationConfig | None = None) -> AngularCode:
    """Encode a viewpoint into its 12-element trigonometric code.

    With perturbation enabled, fresh jitter is drawn from ``cfg`` on every
    call and added independently to theta and phi before encoding.
    """
    e1, e2 = cfg.draw() if cfg is not None else (0.0, 0.0)
    t = v.theta + e1
    p = v.phi + e2
    values = np.array(
        _triplet(t) + _triplet(p) + _triplet(t + p) + _triplet(t - p),
        dtype=np.float64,
    )
    return AngularCode(values)
