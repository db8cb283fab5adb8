"""Material coefficients ``t -> A(t)`` for the beam.

A material is any vectorized callable mapping times in [0, 1] to stiffness
values.  The helpers below build the ones the solvers and experiments use.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fem import FeFunction


def chi(v):
    """Smooth surrogate of the hard-phase indicator, ``(v+1)^2 / 4``."""
    v = np.asarray(v, dtype=float)
    return 0.25 * (v + 1.0) ** 2


def A_of_v(v, a: float, b: float):
    c = chi(v)
    return b * c + a * (1.0 - c)


def A_of_theta(theta, a: float, b: float):
    """Harmonic interpolation ``((1-theta)/a + theta/b)^-1``."""
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0.0) or np.any(theta > 1.0):
        raise ValueError("volume fraction theta must lie in [0, 1]")
    return 1.0 / ((1.0 - theta) / a + theta / b)


def A_dot_of_theta(theta, a: float, b: float):
    return (1.0 / a - 1.0 / b) * A_of_theta(theta, a, b) ** 2


@dataclass(frozen=True)
class Homogeneous:
    value: float

    def __call__(self, t):
        return np.full(np.shape(t), float(self.value))


@dataclass(frozen=True, eq=False)
class PhaseFieldMaterial:
    """``A(v(t)) = b chi(v) + a (1 - chi(v))`` for a P1 phase field ``v``."""

    v: FeFunction
    a: float
    b: float

    def __call__(self, t):
        return A_of_v(np.interp(t, self.v.grid.nodes, self.v.coeffs), self.a, self.b)


@dataclass(frozen=True, eq=False)
class RelaxedMaterial:
    """Harmonic-mean coefficient of a P1 volume fraction ``theta``."""

    theta: FeFunction
    a: float
    b: float

    def __call__(self, t):
        th = np.clip(np.interp(t, self.theta.grid.nodes, self.theta.coeffs), 0.0, 1.0)
        return A_of_theta(th, self.a, self.b)


@dataclass(frozen=True, eq=False)
class IndicatorMaterial:
    """Two-phase material ``a + (b - a) chi(t)`` for an indicator callable."""

    indicator: object
    a: float
    b: float

    def __call__(self, t):
        c = np.asarray(self.indicator(t), dtype=float)
        return self.a + (self.b - self.a) * c
