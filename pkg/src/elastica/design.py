"""Phase-field optimal design: BFGS on the reduced cost and design diagnostics."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .adjoint import (
    DesignParams,
    Evaluation,
    ReducedCost,
    lambda_threshold,
    length_hard,
    perimeter,
)
from .fem import FeFunction, SingularMatrixError, UniformGrid
from .materials import A_of_v, chi
from .state import BeamProblem, StateSolveError

log = logging.getLogger(__name__)

__all__ = [
    "chi",
    "A_of_v",
    "perimeter",
    "length_hard",
    "lambda_threshold",
    "DesignResult",
    "OptimalityReport",
    "LineSearchError",
    "initial_phase_field",
    "bfgs_optimize",
    "extract_interfaces",
    "check_ordered",
    "check_optimality_condition",
    "hard_intervals",
]

PHASE_INITIALIZATIONS = ("undecided", "all-soft", "all-hard", "random")


class LineSearchError(RuntimeError):
    pass


@dataclass
class OptimalityReport:
    lam: float
    tolerance: float
    classes: np.ndarray  # per cell: -1 soft, 0 intermediate, +1 hard
    kp: np.ndarray
    excluded: np.ndarray  # per cell, True inside an interface band
    violations: list[tuple[int, float, float]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def max_violation(self) -> float:
        return max((m for _, _, m in self.violations), default=0.0)


@dataclass
class DesignResult:
    v_final: FeFunction
    cost_history: list[float]
    gradient_norm_history: list[float]
    interfaces: list[float]
    ordered: bool
    t_star: float | None
    optimality_report: OptimalityReport
    final: Evaluation
    converged: bool
    iterations: int
    message: str = ""


def initial_phase_field(name: str, grid: UniformGrid, rng: np.random.Generator | None = None) -> FeFunction:
    if name == "undecided":
        c = np.zeros(grid.num_nodes)
    elif name == "all-soft":
        c = -np.ones(grid.num_nodes)
    elif name == "all-hard":
        c = np.ones(grid.num_nodes)
    elif name == "random":
        rng = rng if rng is not None else np.random.default_rng(0)
        c = rng.uniform(-0.5, 0.5, grid.num_nodes)
    else:
        raise ValueError(f"unknown phase-field initialization {name!r}; expected one of {PHASE_INITIALIZATIONS}")
    return FeFunction(grid, c)


def extract_interfaces(v: FeFunction, epsilon: float = 0.0) -> list[float]:
    """Zero crossings of the P1 interpolant, merging crossings closer than ``2 epsilon``."""
    x, c = v.grid.nodes, v.coeffs
    sgn = np.sign(c)
    crossings = []
    # exact zeros at nodes count once, where the sign actually changes
    nz = np.flatnonzero(sgn != 0)
    for i, j in zip(nz[:-1], nz[1:]):
        if sgn[i] == sgn[j]:
            continue
        if j == i + 1:
            crossings.append(x[i] + (x[j] - x[i]) * c[i] / (c[i] - c[j]))
        else:
            crossings.append(0.5 * (x[i + 1] + x[j - 1]))
    merged: list[list[float]] = []
    for t in crossings:
        if merged and t - merged[-1][-1] < 2.0 * epsilon:
            merged[-1].append(t)
        else:
            merged.append([t])
    out = []
    for group in merged:
        # an even number of merged crossings is a dip that does not change phase
        if len(group) % 2 == 1:
            out.append(float(np.mean(group)))
    return out


def check_ordered(v: FeFunction, epsilon: float, level: float = 0.9) -> tuple[bool, float | None]:
    """Hard on ``(0, t*)``, soft on ``(t*, 1)`` with one interface.

    Nodes within ``2 epsilon`` of the interface are ignored.
    """
    ts = extract_interfaces(v, epsilon)
    if len(ts) != 1:
        return False, (ts[0] if len(ts) == 1 else None)
    t_star = ts[0]
    x, c = v.grid.nodes, v.coeffs
    band = 2.0 * epsilon
    left = x < t_star - band
    right = x > t_star + band
    ok = bool(np.all(c[left] >= level) and np.all(c[right] <= -level))
    return ok, t_star


def hard_intervals(v: FeFunction, epsilon: float = 0.0) -> list[tuple[float, float]]:
    """Maximal intervals where ``v > 0``."""
    ts = extract_interfaces(v, epsilon)
    edges = [0.0] + ts + [1.0]
    out = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid = 0.5 * (lo + hi)
        if v.eval(mid) > 0.0:
            out.append((lo, hi))
    return out


def check_optimality_condition(
    v: FeFunction | None,
    k: np.ndarray,
    p: np.ndarray,
    lam: float,
    epsilon: float = 0.0,
    rel_tol: float = 0.05,
    theta: np.ndarray | None = None,
    band_width: float | None = None,
) -> OptimalityReport:
    """Compare ``k p`` with ``lam`` cell by cell.

    Hard cells (theta > 0.95) need ``k p >= lam``, soft cells (theta < 0.05)
    ``k p <= lam`` and intermediate cells ``k p = lam``, each up to
    ``rel_tol * lam``.  For a phase field, ``theta = min(1, chi(v))`` at
    the cell midpoints and cells within ``band_width / 2`` (default
    ``2 epsilon``) of an interface are excluded.
    """
    kp = np.asarray(k) * np.asarray(p)
    ncell = len(kp)
    excluded = np.zeros(ncell, dtype=bool)
    if theta is None:
        if v is None:
            raise ValueError("need either a phase field or per-cell theta")
        theta = np.minimum(1.0, chi(v(v.grid.midpoints)))
        mids = v.grid.midpoints
        half = 2.0 * epsilon if band_width is None else 0.5 * band_width
        for t in extract_interfaces(v, epsilon):
            excluded |= np.abs(mids - t) <= half + 0.5 * v.grid.h
    theta = np.asarray(theta)
    classes = np.where(theta > 0.95, 1, np.where(theta < 0.05, -1, 0))
    tol = rel_tol * lam
    viol = []
    for i in np.flatnonzero(~excluded):
        d = kp[i] - lam
        if classes[i] == 1 and -d > tol:
            viol.append((int(i), float(kp[i]), float(-d)))
        elif classes[i] == -1 and d > tol:
            viol.append((int(i), float(kp[i]), float(d)))
        elif classes[i] == 0 and abs(d) > tol:
            viol.append((int(i), float(kp[i]), float(abs(d))))
    return OptimalityReport(lam, tol, classes, kp, excluded, viol)


def bfgs_optimize(
    v_init: FeFunction,
    params: DesignParams,
    problem: BeamProblem,
    tol_grad: float | None = None,
    max_iter: int = 2000,
    state_init: str = "simple",
    max_step: float = 0.5,
    callback=None,
) -> DesignResult:
    """Minimize ``v -> J(K(v), v)`` by BFGS with Armijo backtracking.

    The inverse-Hessian approximation starts as a multiple of the identity
    fixed by the first accepted step.  Trial steps larger than ``max_step``
    in the max norm are shortened.  A trial point at which the state solve
    fails is treated like a rejected step.  The default gradient tolerance
    is ``1e-6 (1 + |J|)`` in the max norm.
    """
    cost = ReducedCost(problem, params, init=state_init)
    ev = cost.evaluate(v_init)
    cost.accept(ev)
    n = v_init.grid.num_nodes
    Hinv = None
    x = v_init.coeffs.copy()
    g = ev.gradient
    costs = [ev.cost]
    gnorms = [float(np.max(np.abs(g)))]
    converged = False
    message = "max_iter reached"
    it = 0
    for it in range(1, max_iter + 1):
        tol = tol_grad if tol_grad is not None else 1e-6 * (1.0 + abs(ev.cost))
        if gnorms[-1] <= tol:
            converged = True
            message = "gradient tolerance reached"
            it -= 1
            break
        d = -g if Hinv is None else -(Hinv @ g)
        slope = float(d @ g)
        if slope >= 0.0:
            # lost descent; restart from steepest descent
            Hinv = None
            d = -g
            slope = float(d @ g)
        dmax = float(np.max(np.abs(d)))
        alpha = min(1.0, max_step / dmax) if Hinv is not None else 0.1 / dmax
        for _ in range(40):
            trial_v = FeFunction(v_init.grid, x + alpha * d)
            try:
                trial = cost.evaluate(trial_v)
            except (StateSolveError, SingularMatrixError):
                alpha *= 0.5
                continue
            if trial.cost <= ev.cost + 1e-4 * alpha * slope and trial.cost < ev.cost:
                break
            alpha *= 0.5
        else:
            message = "line search failed: no decrease within 40 halvings"
            log.info("BFGS stopped at iteration %d: %s", it, message)
            if it == 1:
                raise LineSearchError(message)
            it -= 1
            break
        s = alpha * d
        y = trial.gradient - g
        sy = float(s @ y)
        if sy > 1e-12 * float(np.linalg.norm(s) * np.linalg.norm(y)):
            rho = 1.0 / sy
            if Hinv is None:
                Hinv = np.eye(n) * (sy / float(y @ y))
            Hy = Hinv @ y
            Hinv += (rho * rho * float(y @ Hy) + rho) * np.outer(s, s) - rho * (np.outer(Hy, s) + np.outer(s, Hy))
        x = trial.v.coeffs.copy()
        ev = trial
        cost.accept(ev)
        g = ev.gradient
        costs.append(ev.cost)
        gnorms.append(float(np.max(np.abs(g))))
        if callback is not None:
            callback(it, ev)
    else:
        tol = tol_grad if tol_grad is not None else 1e-6 * (1.0 + abs(ev.cost))
        if gnorms[-1] <= tol:
            converged = True
            message = "gradient tolerance reached"
    v_final = ev.v
    ordered, t_star = check_ordered(v_final, params.epsilon)
    report = check_optimality_condition(
        v_final, ev.state.k, ev.adjoint.p, params.lam(problem.a, problem.b), params.epsilon
    ) if problem.a < problem.b else None
    return DesignResult(
        v_final=v_final,
        cost_history=costs,
        gradient_norm_history=gnorms,
        interfaces=extract_interfaces(v_final, params.epsilon),
        ordered=ordered,
        t_star=t_star,
        optimality_report=report,
        final=ev,
        converged=converged,
        iterations=it,
        message=message,
    )
