"""Discrete stored energy of the clamped elastica and its Newton solver.

The unknown is the phase ``K`` (tangent angle relative to the clamp angle
``K0``) with ``K(0) = 0``.  For a downward load of magnitude ``delta`` the
energy is

    E(K) = int_0^1 A/2 (K')^2 + delta (1 - t) sin(K + K0) dt

plus optional quadratic penalties ``mu |gamma(t_i) - p_i|^2`` that pin
beam positions.  All integrals use the composite Gauss rule of
:mod:`elastica.fem`.
"""

from __future__ import annotations

import logging
from functools import lru_cache
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .fem import (
    FeFunction,
    QuadratureRule,
    SingularMatrixError,
    TridiagonalMatrix,
    UniformGrid,
    ldl_pivots,
    prolongate,
    solve_tridiagonal,
)
from .materials import Homogeneous

log = logging.getLogger(__name__)

DEFAULT_PENALTY = 1e4
DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 50
DEFAULT_MAX_STEP = 0.5


@dataclass(frozen=True)
class PointConstraint:
    time: float
    target: tuple[float, float]
    weight: float = DEFAULT_PENALTY

    def __post_init__(self):
        if not 0.0 < self.time <= 1.0:
            raise ValueError(f"constraint time must lie in (0, 1], got {self.time}")
        if not self.weight > 0.0:
            raise ValueError("penalty weight must be positive")
        object.__setattr__(self, "target", (float(self.target[0]), float(self.target[1])))


@dataclass(frozen=True)
class BeamProblem:
    """Load, clamp angle, material and optional pinned positions."""

    delta: float = 100.0
    clamp_angle: float = 0.0
    a: float = 1.0
    b: float = 1.0
    material: Callable | None = None
    constraints: tuple[PointConstraint, ...] = ()

    def __post_init__(self):
        if not self.a > 0.0:
            raise ValueError("material bound a must be positive")
        if self.a > self.b:
            raise ValueError(f"material bounds need a <= b, got a={self.a}, b={self.b}")
        if self.delta < 0.0:
            raise ValueError("force magnitude delta must be nonnegative")
        if self.material is None:
            object.__setattr__(self, "material", Homogeneous(self.a))
        object.__setattr__(self, "constraints", tuple(self.constraints))

    def with_material(self, material) -> "BeamProblem":
        return BeamProblem(self.delta, self.clamp_angle, self.a, self.b, material, self.constraints)

    def material_range(self, grid: UniformGrid, rule: QuadratureRule | None = None):
        """Min and max of ``A`` over the quadrature points of ``grid``."""
        rule = rule or QuadratureRule(grid)
        A = self.material(rule.points)
        return float(A.min()), float(A.max())


@dataclass
class StateSolution:
    K: FeFunction
    k: np.ndarray
    energy: float
    newton_iterations: int
    final_residual_norm: float
    converged: bool
    energy_history: list[float] = field(default_factory=list)
    level_iterations: dict[int, int] = field(default_factory=dict)

    @property
    def grid(self) -> UniformGrid:
        return self.K.grid


@dataclass(frozen=True)
class Curve:
    times: np.ndarray
    points: np.ndarray  # shape (N, 2)


class StateSolveError(RuntimeError):
    def __init__(self, message, level=None, solution=None):
        super().__init__(message if level is None else f"level {level}: {message}")
        self.level = level
        self.solution = solution


# -- penalty helpers ---------------------------------------------------------


@dataclass(frozen=True)
class _PartialRule:
    """Gauss points on ``[0, t]`` with their cell indices and local coordinates."""

    cells: np.ndarray
    s: np.ndarray
    weights: np.ndarray


def _partial_rule(rule: QuadratureRule, t: float) -> _PartialRule:
    return _partial_rule_cached(rule.grid.level, rule.points_per_cell, float(t))


@lru_cache(maxsize=64)
def _partial_rule_cached(level: int, points_per_cell: int, t: float) -> _PartialRule:
    rule = QuadratureRule(UniformGrid(level), points_per_cell)
    grid = rule.grid
    h = grid.h
    Q = rule.points_per_cell
    full = min(int(np.floor(t / h + 1e-12)), grid.num_cells)
    cells = [np.repeat(np.arange(full), Q)]
    s = [np.tile(rule.ref_points, full)]
    w = [np.full(full * Q, 0.0) + np.tile(rule.ref_weights * h, full)]
    rest = t - full * h
    if full < grid.num_cells and rest > 1e-14 * h:
        frac = rest / h
        cells.append(np.full(Q, full))
        s.append(rule.ref_points * frac)
        w.append(rule.ref_weights * rest)
    return _PartialRule(np.concatenate(cells), np.concatenate(s), np.concatenate(w))


def _penalty_terms(K: FeFunction, problem: BeamProblem, rule: QuadratureRule, order: int):
    """Penalty value, gradient, low-rank factor and tridiagonal curvature part."""
    N = K.grid.num_nodes
    value = 0.0
    grad = np.zeros(N)
    factors = []
    sub = np.zeros(N - 1)
    main = np.zeros(N)
    for con in problem.constraints:
        pr = _partial_rule(rule, con.time)
        c = K.coeffs
        ang = c[pr.cells] * (1 - pr.s) + c[pr.cells + 1] * pr.s + problem.clamp_angle
        cs, sn = np.cos(ang), np.sin(ang)
        gam = np.array([np.sum(pr.weights * cs), np.sum(pr.weights * sn)])
        res = gam - np.array(con.target)
        value += con.weight * float(res @ res)
        if order < 1:
            continue
        dgx = np.zeros(N)
        dgy = np.zeros(N)
        np.add.at(dgx, pr.cells, -pr.weights * sn * (1 - pr.s))
        np.add.at(dgx, pr.cells + 1, -pr.weights * sn * pr.s)
        np.add.at(dgy, pr.cells, pr.weights * cs * (1 - pr.s))
        np.add.at(dgy, pr.cells + 1, pr.weights * cs * pr.s)
        grad += 2.0 * con.weight * (res[0] * dgx + res[1] * dgy)
        if order < 2:
            continue
        scale = np.sqrt(2.0 * con.weight)
        factors += [scale * dgx, scale * dgy]
        # (gamma - p) . d2gamma, with d2gamma = -(cos, sin) phi_i phi_j
        m = -2.0 * con.weight * pr.weights * (res[0] * cs + res[1] * sn)
        l, r = 1 - pr.s, pr.s
        np.add.at(main, pr.cells, m * l * l)
        np.add.at(main, pr.cells + 1, m * r * r)
        np.add.at(sub, pr.cells, m * l * r)
    U = np.column_stack(factors) if factors else np.zeros((N, 0))
    return value, grad, U, sub, main


# -- assembly ----------------------------------------------------------------


def _angles(K: FeFunction, problem: BeamProblem, rule: QuadratureRule) -> np.ndarray:
    return K.at_quadrature(rule) + problem.clamp_angle


def _lever(rule: QuadratureRule) -> np.ndarray:
    return 1.0 - rule.points


def energy(K: FeFunction, problem: BeamProblem, rule: QuadratureRule | None = None) -> float:
    rule = rule or QuadratureRule(K.grid)
    A = problem.material(rule.points)
    dK = K.cell_derivatives()[:, None]
    vals = 0.5 * A * dK**2 + problem.delta * _lever(rule) * np.sin(_angles(K, problem, rule))
    E = rule.integrate_values(vals)
    if problem.constraints:
        E += _penalty_terms(K, problem, rule, order=0)[0]
    return E


def residual(K: FeFunction, problem: BeamProblem, rule: QuadratureRule | None = None) -> np.ndarray:
    """First variation tested against all hats, Dirichlet entry zeroed."""
    rule = rule or QuadratureRule(K.grid)
    A = problem.material(rule.points)
    dK = K.cell_derivatives()[:, None]
    R = rule.test_against_hat_derivatives(A * dK)
    R += rule.test_against_hats(problem.delta * _lever(rule) * np.cos(_angles(K, problem, rule)))
    if problem.constraints:
        R += _penalty_terms(K, problem, rule, order=1)[1]
    R[0] = 0.0
    return R


def _tridiagonal_part(K: FeFunction, problem: BeamProblem, rule: QuadratureRule, A=None):
    grid = K.grid
    h = grid.h
    if A is None:
        A = problem.material(rule.points)
    stiff = np.sum(A * rule.weights, axis=1) / h**2
    m = -problem.delta * _lever(rule) * np.sin(_angles(K, problem, rule)) * rule.weights
    mll = m @ (rule.phi_left**2)
    mrr = m @ (rule.phi_right**2)
    mlr = m @ (rule.phi_left * rule.phi_right)
    main = np.zeros(grid.num_nodes)
    main[:-1] += stiff + mll
    main[1:] += stiff + mrr
    off = -stiff + mlr
    return off, main


def _dirichlet(off: np.ndarray, main: np.ndarray) -> TridiagonalMatrix:
    main = main.copy()
    off = off.copy()
    main[0] = 1.0
    off[0] = 0.0
    return TridiagonalMatrix(off, main, off.copy())


@dataclass(frozen=True)
class StateHessian:
    """Hessian ``T + U U^T``: tridiagonal part plus a penalty low-rank part."""

    tri: TridiagonalMatrix
    low_rank: np.ndarray

    def to_dense(self) -> np.ndarray:
        return self.tri.to_dense() + self.low_rank @ self.low_rank.T

    def matvec(self, x):
        return self.tri.matvec(x) + self.low_rank @ (self.low_rank.T @ x)

    def is_positive_definite(self) -> bool:
        """Inertia test: ``T + U U^T`` is SPD iff ``neg(T) + pos(I + U^T T^-1 U) = rank``."""
        piv = ldl_pivots(self.tri)
        neg = int(np.sum(piv < 0.0))
        r = self.low_rank.shape[1]
        if r == 0 or neg == 0:
            return neg == 0 and bool(np.all(piv > 0.0))
        if neg > r or np.any(piv == 0.0) or not np.all(np.isfinite(piv)):
            return False
        try:
            TU = np.column_stack([solve_tridiagonal(self.tri, u) for u in self.low_rank.T])
        except SingularMatrixError:
            return False
        cap = np.eye(r) + self.low_rank.T @ TU
        ev = np.linalg.eigvalsh(0.5 * (cap + cap.T))
        return neg + int(np.sum(ev > 0.0)) == r and not np.any(ev == 0.0)

    def shifted(self, sigma: float) -> "StateHessian":
        """Add ``sigma`` to every diagonal entry except the clamped one."""
        main = self.tri.main.copy()
        main[1:] += sigma
        return StateHessian(TridiagonalMatrix(self.tri.sub, main, self.tri.sup), self.low_rank)

    def solve(self, r) -> np.ndarray:
        """Thomas solve, with Sherman-Morrison-Woodbury for the low-rank part."""
        U = self.low_rank
        if U.shape[1] == 0:
            return solve_tridiagonal(self.tri, r)
        try:
            Tr = solve_tridiagonal(self.tri, r)
            TU = np.column_stack([solve_tridiagonal(self.tri, u) for u in U.T])
            cap = np.eye(U.shape[1]) + U.T @ TU
            return Tr - TU @ np.linalg.solve(cap, U.T @ Tr)
        except (SingularMatrixError, np.linalg.LinAlgError):
            pass
        try:
            return np.linalg.solve(self.to_dense(), r)
        except np.linalg.LinAlgError as exc:
            raise SingularMatrixError(str(exc)) from exc


def hessian_full(K: FeFunction, problem: BeamProblem, rule: QuadratureRule | None = None) -> StateHessian:
    rule = rule or QuadratureRule(K.grid)
    off, main = _tridiagonal_part(K, problem, rule)
    U = np.zeros((K.grid.num_nodes, 0))
    if problem.constraints:
        _, _, U, psub, pmain = _penalty_terms(K, problem, rule, order=2)
        off = off + psub
        main = main + pmain
        U = U.copy()
        U[0, :] = 0.0
    return StateHessian(_dirichlet(off, main), U)


def hessian(K: FeFunction, problem: BeamProblem, rule: QuadratureRule | None = None) -> TridiagonalMatrix:
    """Tridiagonal second variation with the clamped row/column replaced by identity.

    With point constraints the full Hessian has an additional dense
    low-rank part; see :func:`hessian_full`.
    """
    return hessian_full(K, problem, rule).tri


def cell_average_material(problem: BeamProblem, grid: UniformGrid, rule: QuadratureRule | None = None) -> np.ndarray:
    """Gauss average of ``A`` over each cell (equals the midpoint value for cellwise constant ``A``)."""
    rule = rule or QuadratureRule(grid)
    return np.sum(problem.material(rule.points) * rule.weights, axis=1) / grid.h


def shear(K: FeFunction, problem: BeamProblem) -> np.ndarray:
    """Per-cell flux ``k = A K'``.

    ``A`` is the cell average, which makes ``k`` the quantity balanced by
    the discrete equations: ``k_{j-1} - k_j`` equals the load tested
    against the hat at node ``j``.
    """
    return cell_average_material(problem, K.grid) * K.cell_derivatives()


def _descent_direction(H: StateHessian, R: np.ndarray) -> np.ndarray:
    """Newton direction, regularized by a diagonal shift until it is a descent direction."""
    if H.is_positive_definite():
        d = -H.solve(R)
        if d @ R < 0.0 or not np.any(R):
            return d
    sigma = 1e-3 * float(np.max(np.abs(H.tri.main)))
    for _ in range(30):
        Hs = H.shifted(sigma)
        if Hs.is_positive_definite():
            return -Hs.solve(R)
        sigma *= 10.0
    raise StateSolveError("could not regularize the Hessian to a positive definite matrix")


def newton_solve(
    K_init: FeFunction,
    problem: BeamProblem,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    max_step: float | None = DEFAULT_MAX_STEP,
    method: str = "descent",
) -> StateSolution:
    """Newton iteration ``K <- K - M[K]^{-1} R[K]`` until ``||R||_inf <= tol``.

    ``method="newton"`` takes the raw Newton step (it converges to any
    nearby stationary point, saddles included).  ``method="descent"`` shifts
    an indefinite Hessian and backtracks on the energy, so it only finds
    local minimizers; near a nondegenerate minimizer both coincide.  In both
    modes a step whose largest nodal change exceeds ``max_step`` radians is
    scaled down to that length (``None`` disables the cap).
    """
    if method not in ("newton", "descent"):
        raise ValueError(f"unknown Newton method {method!r}")
    grid = K_init.grid
    rule = QuadratureRule(grid)
    c = np.array(K_init.coeffs, dtype=float)
    c[0] = 0.0
    K = FeFunction(grid, c)
    R = residual(K, problem, rule)
    rnorm = float(np.max(np.abs(R)))
    E = energy(K, problem, rule)
    history = [E]
    it = 0
    while rnorm > tol and it < max_iter:
        H = hessian_full(K, problem, rule)
        step = -H.solve(R) if method == "newton" else _descent_direction(H, R)
        big = float(np.max(np.abs(step)))
        if max_step is not None and big > max_step:
            step *= max_step / big
        alpha = 1.0
        if method == "descent":
            slope = float(step @ R)
            for _ in range(40):
                trial = FeFunction(grid, K.coeffs + alpha * step)
                E_trial = energy(trial, problem, rule)
                if E_trial <= E + 1e-4 * alpha * slope:
                    break
                # energy differences at round-off level cannot be resolved
                if abs(alpha * slope) < 1e-13 * (1.0 + abs(E)):
                    alpha = 1.0
                    break
                alpha *= 0.5
            else:
                raise StateSolveError(f"energy line search failed after {it} iterations")
        c = K.coeffs + alpha * step
        c[0] = 0.0
        if not np.all(np.isfinite(c)):
            raise StateSolveError(f"Newton iterate became non-finite after {it + 1} steps")
        K = FeFunction(grid, c)
        R = residual(K, problem, rule)
        rnorm = float(np.max(np.abs(R)))
        E = energy(K, problem, rule)
        history.append(E)
        it += 1
    converged = rnorm <= tol
    if not converged:
        log.debug("Newton stopped after %d iterations, |R| = %.3e", it, rnorm)
    return StateSolution(
        K=K,
        k=shear(K, problem),
        energy=E,
        newton_iterations=it,
        final_residual_norm=rnorm,
        converged=converged,
        energy_history=history,
        level_iterations={grid.level: it},
    )


def multilevel_solve(
    problem: BeamProblem,
    coarse_level: int = 3,
    fine_level: int = 9,
    K_init: FeFunction | None = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    max_step: float | None = DEFAULT_MAX_STEP,
    method: str = "descent",
) -> StateSolution:
    """Solve on ``coarse_level``, prolongate, re-solve, ... up to ``fine_level``.

    Raises :class:`StateSolveError` (with the level attached) on a singular
    Hessian, a failed line search, or if the finest level does not converge.
    """
    if coarse_level > fine_level:
        raise ValueError("coarse level must not exceed fine level")
    if K_init is None:
        K = UniformGrid(coarse_level).zeros()
    else:
        K = K_init
        while K.grid.level < coarse_level:
            K = prolongate(K)
        if K.grid.level != coarse_level:
            raise ValueError("initial guess lives on a finer grid than the coarse level")
    iterations = {}
    sol = None
    for level in range(coarse_level, fine_level + 1):
        if level > coarse_level:
            K = prolongate(sol.K)
        try:
            sol = newton_solve(K, problem, tol, max_iter, max_step, method)
        except (SingularMatrixError, StateSolveError) as exc:
            raise StateSolveError(str(exc), level=level) from exc
        iterations[level] = sol.newton_iterations
    sol.level_iterations = iterations
    if not sol.converged:
        raise StateSolveError(
            f"Newton did not converge (|R| = {sol.final_residual_norm:.3e})",
            level=fine_level,
            solution=sol,
        )
    return sol


STATE_INITIALIZATIONS = ("simple", "twisted", "s-shape")

# Branch selection: minimizers are reached by the globalized iteration, the
# unstable S-shaped configuration only by the raw Newton step.
_INIT_METHOD = {"simple": "descent", "zero": "descent", "twisted": "descent", "s-shape": "newton"}


def named_initialization(name: str, grid: UniformGrid) -> FeFunction:
    """Starting phases that select different stationary branches.

    ``simple`` is ``K = 0``; ``twisted`` winds the tangent counterclockwise
    (``2 pi t``) so the free end falls on the far side of the clamp;
    ``s-shape`` is ``pi/2 sin(2 pi t)``.
    """
    t = grid.nodes
    if name in ("zero", "simple"):
        c = np.zeros_like(t)
    elif name == "twisted":
        c = 2.0 * np.pi * t
    elif name == "s-shape":
        c = 0.5 * np.pi * np.sin(2.0 * np.pi * t)
    else:
        raise ValueError(f"unknown state initialization {name!r}; expected one of {STATE_INITIALIZATIONS}")
    return FeFunction(grid, c)


def method_for(name: str) -> str:
    return _INIT_METHOD.get(name, "descent")


def solve_branch(
    problem: BeamProblem,
    init: str = "simple",
    coarse_level: int = 3,
    fine_level: int = 9,
    **kwargs,
) -> StateSolution:
    """Multilevel solve started from a named initialization."""
    K0 = named_initialization(init, UniformGrid(coarse_level))
    return multilevel_solve(problem, coarse_level, fine_level, K0, method=method_for(init), **kwargs)


def reconstruct_curve(K: FeFunction, clamp_angle: float, rule: QuadratureRule | None = None) -> Curve:
    """Nodal positions of ``gamma(t) = int_0^t exp(i (K + K0)) ds``."""
    rule = rule or QuadratureRule(K.grid)
    ang = K.at_quadrature(rule) + clamp_angle
    dx = np.sum(np.cos(ang) * rule.weights, axis=1)
    dy = np.sum(np.sin(ang) * rule.weights, axis=1)
    pts = np.zeros((K.grid.num_nodes, 2))
    pts[1:, 0] = np.cumsum(dx)
    pts[1:, 1] = np.cumsum(dy)
    return Curve(K.grid.nodes, pts)


def curve_point(K: FeFunction, clamp_angle: float, t: float) -> np.ndarray:
    """``gamma(t)`` by the same partial-cell quadrature used for penalties."""
    rule = QuadratureRule(K.grid)
    pr = _partial_rule(rule, t)
    c = K.coeffs
    ang = c[pr.cells] * (1 - pr.s) + c[pr.cells + 1] * pr.s + clamp_angle
    return np.array([np.sum(pr.weights * np.cos(ang)), np.sum(pr.weights * np.sin(ang))])
