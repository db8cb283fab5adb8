"""Discrete checks of the sign and monotonicity structure of state and adjoint.

Every checker is a pure function returning a :class:`SignReport`.  Cellwise
quantities (``k``, ``p``, ``q``) are indexed by cell, nodal ones (``K``,
``P``, ``rho``, ``Q``) by node.  "Almost everywhere" statements become
cellwise statements with an absolute tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fem import FeFunction
from .state import BeamProblem, cell_average_material

SLOPE_TOL = 1e-8
RANGE_TOL = 1e-12
TIE_TOL = 1e-12
SIN_CUTOFF = 1e-8


@dataclass
class SignReport:
    quantity: str
    values: np.ndarray
    times: dict[str, float] = field(default_factory=dict)
    violations: list[tuple[float, float]] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "quantity": self.quantity,
            "ok": self.ok,
            "times": dict(self.times),
            "violations": [[float(t), float(m)] for t, m in self.violations],
            "notes": list(self.notes),
        }


@dataclass
class AuxiliaryFields:
    nodes: np.ndarray
    rho: np.ndarray  # nodal, NaN where excluded
    Q: np.ndarray  # nodal, NaN where excluded
    q: np.ndarray  # per cell, NaN where excluded
    excluded_nodes: np.ndarray
    midpoints: np.ndarray


def _midpoints(n_cells: int) -> np.ndarray:
    return (np.arange(n_cells) + 0.5) / n_cells


def verify_monotone_range(K: FeFunction, clamp_angle: float = 0.0) -> SignReport:
    """``K' <= 0`` on every cell and ``K`` in ``(-pi/2, 0]`` on ``[0, 1)``."""
    if clamp_angle != 0.0:
        raise ValueError("the monotone-range property is stated for clamp angle 0")
    d = K.cell_derivatives()
    mids = K.grid.midpoints
    rep = SignReport("K", np.asarray(K.coeffs))
    for i in np.flatnonzero(d > SLOPE_TOL):
        rep.violations.append((float(mids[i]), float(d[i])))
    x, c = K.grid.nodes, K.coeffs
    inner = x < 1.0
    for i in np.flatnonzero(inner & ((c > RANGE_TOL) | (c <= -0.5 * np.pi))):
        mag = c[i] - RANGE_TOL if c[i] > RANGE_TOL else -0.5 * np.pi - c[i]
        rep.violations.append((float(x[i]), float(abs(mag))))
    return rep


def verify_shear_structure(k: np.ndarray, tol: float | None = None) -> SignReport:
    """``k < 0`` before the last cell, strictly increasing, ``|k(1)| <= tol``.

    ``tol`` defaults to ``10 h max|k|``.
    """
    k = np.asarray(k, dtype=float)
    n = len(k)
    mids = _midpoints(n)
    if tol is None:
        tol = 10.0 / n * max(1.0, float(np.max(np.abs(k))))
    rep = SignReport("k", k)
    for i in np.flatnonzero(k[:-1] >= 0.0):
        rep.violations.append((float(mids[i]), float(k[i])))
    dk = np.diff(k)
    for i in np.flatnonzero(dk <= TIE_TOL):
        rep.violations.append((float((i + 1) / n), float(TIE_TOL - dk[i])))
    if abs(k[-1]) > tol:
        rep.violations.append((1.0, float(abs(k[-1]))))
    return rep


def compute_auxiliary(K: FeFunction, P: FeFunction, problem: BeamProblem) -> AuxiliaryFields:
    """``rho = cot(K + K0)``, ``Q = P - rho`` at nodes and ``q = p + k / sin^2`` per cell."""
    grid = K.grid
    ang = K.coeffs + problem.clamp_angle
    sn = np.sin(ang)
    excluded = np.abs(sn) < SIN_CUTOFF
    if np.all(excluded):
        raise ValueError("sin(K + K0) vanishes at every node; auxiliary fields undefined")
    rho = np.full(grid.num_nodes, np.nan)
    rho[~excluded] = np.cos(ang[~excluded]) / sn[~excluded]
    Q = P.coeffs - rho
    Abar = cell_average_material(problem, grid)
    k = Abar * K.cell_derivatives()
    p = Abar * P.cell_derivatives()
    s_mid = np.sin(0.5 * (ang[:-1] + ang[1:]))
    bad = (np.abs(s_mid) < SIN_CUTOFF) | excluded[:-1] | excluded[1:]
    q = np.full(grid.num_cells, np.nan)
    q[~bad] = p[~bad] + k[~bad] / s_mid[~bad] ** 2
    return AuxiliaryFields(grid.nodes, rho, Q, q, np.flatnonzero(excluded), grid.midpoints)


def verify_Q_single_crossing(aux: AuxiliaryFields, tol: float = SLOPE_TOL) -> SignReport:
    """``Q > 0`` before ``t0`` and ``Q <= 0`` from ``t0`` on (``t0 = 1`` allowed)."""
    Q = aux.Q
    valid = np.flatnonzero(np.isfinite(Q))
    rep = SignReport("Q", Q)
    nonpos = valid[Q[valid] <= 0.0]
    if len(nonpos) == 0:
        rep.times["t0"] = 1.0
        return rep
    first = nonpos[0]
    rep.times["t0"] = float(aux.nodes[first])
    after = valid[valid > first]
    for i in after[Q[after] > tol]:
        rep.violations.append((float(aux.nodes[i]), float(Q[i])))
    return rep


def verify_kp_structure(k: np.ndarray, p: np.ndarray, slack: float = 1e-10) -> SignReport:
    """``k p > 0`` and strictly decreasing on ``(0, t2)``, ``k p <= 0`` on ``[t2, 1]``.

    A cell counts as decreasing if the product drops by more than ``-slack``
    and is not exactly constant.
    """
    kp = np.asarray(k, dtype=float) * np.asarray(p, dtype=float)
    n = len(kp)
    rep = SignReport("kp", kp)
    nonpos = np.flatnonzero(kp <= 0.0)
    i2 = int(nonpos[0]) if len(nonpos) else n
    rep.times["t2"] = i2 / n
    head = kp[:i2]
    d = np.diff(head)
    for i in np.flatnonzero((d > slack) | (d == 0.0)):
        rep.violations.append((float((i + 1) / n), float(max(d[i], 0.0))))
    tail = kp[i2:]
    for j in np.flatnonzero(tail > slack):
        rep.violations.append((float((i2 + j + 0.5) / n), float(tail[j])))
    return rep


def p_prime_sign_change(p: np.ndarray) -> float:
    """First node where the cellwise difference of ``p`` stops being positive (1 if never)."""
    n = len(p)
    dp = np.diff(p)
    idx = np.flatnonzero(dp <= 0.0)
    return float((idx[0] + 1) / n) if len(idx) else 1.0


def adjoint_boundary_report(p: np.ndarray, P: FeFunction, delta: float, tol: float | None = None) -> SignReport:
    """Boundary behaviour of the adjoint: ``P(0) = 0``, ``p(1) = 0``, ``p(0) < 0``,
    ``p'(1) = 0`` and ``p'(0) = delta``, the last three up to ``O(h)``."""
    p = np.asarray(p, dtype=float)
    n = len(p)
    h = 1.0 / n
    if tol is None:
        tol = 10.0 * h * max(1.0, delta)
    rep = SignReport("p", p)
    dp0 = (p[1] - p[0]) / h
    dp1 = (p[-1] - p[-2]) / h
    rep.times.update({"p0": float(p[0]), "p1": float(p[-1]), "dp0": float(dp0), "dp1": float(dp1)})
    if P.coeffs[0] != 0.0:
        rep.violations.append((0.0, abs(float(P.coeffs[0]))))
    if abs(p[-1]) > tol:
        rep.violations.append((1.0, abs(float(p[-1]))))
    if not p[0] < 0.0:
        rep.violations.append((0.0, float(p[0])))
    if abs(dp1) > tol:
        rep.violations.append((1.0, abs(float(dp1))))
    return rep
