"""Potential catalog with analytic gradients.

Points are arrays of shape ``(..., d)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


@dataclass(frozen=True)
class Zero:
    def value(self, x):
        return np.zeros(np.shape(x)[:-1])

    def gradient(self, x):
        return np.zeros(np.shape(x))


@dataclass(frozen=True)
class Harmonic:
    """``V = m omega^2 |x - x0|^2 / 2``."""

    omega: float
    center: tuple
    mass: float = 1.0

    def value(self, x):
        d = np.asarray(x) - np.asarray(self.center)
        return 0.5 * self.mass * self.omega ** 2 * np.sum(d * d, axis=-1)

    def gradient(self, x):
        return self.mass * self.omega ** 2 * (np.asarray(x) - np.asarray(self.center))


@dataclass(frozen=True)
class Tilt:
    """``V = g . x``."""

    g: tuple

    def value(self, x):
        return np.asarray(x) @ np.asarray(self.g, dtype=float)

    def gradient(self, x):
        return np.broadcast_to(np.asarray(self.g, dtype=float), np.shape(x)).copy()


def make_potential(spec, mass=1.0, dim=1):
    """Build a potential from a catalog entry such as ``{"kind": "harmonic", ...}``."""
    if spec is None:
        return Zero()
    kind = spec.get("kind", "zero")
    if kind == "zero":
        return Zero()
    if kind == "harmonic":
        center = tuple(float(c) for c in spec.get("center", [0.0] * dim))
        return Harmonic(float(spec["omega"]), center, float(mass))
    if kind == "tilt":
        return Tilt(tuple(float(c) for c in spec["g"]))
    raise ValidationError(f"unknown potential kind {kind!r}")
