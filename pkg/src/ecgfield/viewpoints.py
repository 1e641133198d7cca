"""Spherical viewpoints and the standard 12-lead angle table.

A viewpoint is a direction on the unit sphere, given by a polar angle
``theta`` (measured from the z-axis, so ``theta`` in [0, pi]) and an
azimuthal angle ``phi`` in (-pi, pi].  The frame is anatomical: x is the
sagittal axis, y the inverse frontal axis, z the vertical axis, with the
origin at the central electric terminal.  An ECG lead is modelled as the
projection of the heart's electrical activity onto such a direction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Viewpoint:
    """A direction on the unit sphere, canonicalized on construction.

    theta: polar angle, canonical range [0, pi]
    phi:   azimuthal angle, canonical range (-pi, pi]
    """

    theta: float
    phi: float

    def __post_init__(self):
        theta = float(self.theta)
        phi = float(self.phi)
        if not (math.isfinite(theta) and math.isfinite(phi)):
            raise ValueError(f"non-finite viewpoint angles ({theta}, {phi})")
        # Fast path: already canonical values pass through bit-exactly so
        # that table constants keep their exact trigonometry.
        if not (0.0 <= theta <= math.pi and -math.pi < phi <= math.pi):
            theta = math.fmod(theta, TWO_PI)
            if theta < 0.0:
                theta += TWO_PI
            if theta > math.pi:
                theta = TWO_PI - theta
                phi = phi + math.pi
            phi = math.fmod(phi, TWO_PI)
            if phi > math.pi:
                phi -= TWO_PI
            elif phi <= -math.pi:
                phi += TWO_PI
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "phi", phi)

    def as_tuple(self) -> tuple[float, float]:
        return (self.theta, self.phi)


def unit_vector(v: Viewpoint) -> np.ndarray:
    """Unit direction (sin t cos p, sin t sin p, cos t) for a viewpoint."""
    st = math.sin(v.theta)
    return np.array(
        [st * math.cos(v.phi), st * math.sin(v.phi), math.cos(v.theta)],
        dtype=np.float64,
    )


def angle_between(a: Viewpoint, b: Viewpoint) -> float:
    """Angle in radians between two viewpoint directions."""
    dot = float(np.dot(unit_vector(a), unit_vector(b)))
    return math.acos(min(1.0, max(-1.0, dot)))


# Average lead directions measured on body CT scans, for the 12 standard
# leads.  Values are exact multiples of pi and must not be re-derived.
LEAD_ANGLES: dict[str, Viewpoint] = {
    "I": Viewpoint(math.pi / 2, math.pi / 2),
    "II": Viewpoint(5 * math.pi / 6, math.pi / 2),
    "III": Viewpoint(5 * math.pi / 6, -math.pi / 2),
    "aVR": Viewpoint(math.pi / 3, -math.pi / 2),
    "aVL": Viewpoint(math.pi / 3, math.pi / 2),
    "aVF": Viewpoint(math.pi, math.pi / 2),
    "V1": Viewpoint(math.pi / 2, -math.pi / 18),
    "V2": Viewpoint(math.pi / 2, math.pi / 18),
    "V3": Viewpoint(19 * math.pi / 36, math.pi / 12),
    "V4": Viewpoint(11 * math.pi / 20, math.pi / 6),
    "V5": Viewpoint(8 * math.pi / 15, math.pi / 3),
    "V6": Viewpoint(8 * math.pi / 15, math.pi / 2),
}

LEAD_NAMES: tuple[str, ...] = tuple(LEAD_ANGLES)


def resolve_view(spec: "str | Viewpoint | tuple | list") -> Viewpoint:
    """Turn a lead name, (theta, phi) pair, or Viewpoint into a Viewpoint."""
    if isinstance(spec, Viewpoint):
        return spec
    if isinstance(spec, str):
        try:
            return LEAD_ANGLES[spec]
        except KeyError:
            raise KeyError(f"unknown lead name {spec!r}; known: {', '.join(LEAD_NAMES)}") from None
    if isinstance(spec, (tuple, list)) and len(spec) == 2:
        return Viewpoint(float(spec[0]), float(spec[1]))
    raise TypeError(f"cannot interpret {spec!r} as a viewpoint")
