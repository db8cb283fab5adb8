"""Compliance of a phase-field design, its adjoint, and the reduced gradient.

The cost of a phase field ``v`` is

    J(K, v) = int -delta (1-t) sin(K + K0) dt + c_l Len(v) + c_p Per_eps(v)

evaluated at the equilibrium ``K = K(v)``.  The adjoint ``P`` is stored with
the sign convention in which ``p = A P'`` satisfies ``p(1) = 0`` and
``p'(0) = delta`` for ``K0 = 0``, i.e. it solves

    M[K] P = -int delta (1-t) cos(K + K0) xi_j dt,

so the reduced gradient carries ``-(b-a)/2 (v+1) K' P'`` as the coupling
term.  The system matrix is the state Hessian itself, so the discrete
gradient is the exact derivative of the discrete cost.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fem import FeFunction, QuadratureRule, SingularMatrixError, UniformGrid
from .materials import PhaseFieldMaterial, chi
from .state import (
    BeamProblem,
    StateSolution,
    StateSolveError,
    cell_average_material,
    hessian_full,
    multilevel_solve,
    named_initialization,
    method_for,
    newton_solve,
)

DOUBLE_WELL = 9.0 / 16.0


@dataclass(frozen=True)
class DesignParams:
    c_l: float = 1.0
    c_p: float = 1.0
    epsilon: float = 1.0 / 512

    def __post_init__(self):
        if not self.c_l > 0.0:
            raise ValueError("length cost c_l must be positive")
        if self.c_p < 0.0:
            raise ValueError("perimeter weight c_p must be nonnegative")
        if not self.epsilon > 0.0:
            raise ValueError("interface width epsilon must be positive")

    def lam(self, a: float, b: float) -> float:
        return lambda_threshold(a, b, self.c_l)


def lambda_threshold(a: float, b: float, c_l: float) -> float:
    """Switching level ``(1/a - 1/b)^-1 c_l`` of the product ``k p``."""
    if not 0.0 < a < b:
        raise ValueError(f"threshold needs 0 < a < b, got a={a}, b={b}")
    return c_l / (1.0 / a - 1.0 / b)


@dataclass(frozen=True)
class ComplianceParts:
    load: float
    length: float
    perimeter: float

    @property
    def total(self) -> float:
        return self.load + self.length + self.perimeter


@dataclass
class AdjointSolution:
    P: FeFunction
    p: np.ndarray


def perimeter(v: FeFunction, epsilon: float, rule: QuadratureRule | None = None) -> float:
    """Modica-Mortola energy ``1/2 int eps v'^2 + (9/16)(v^2-1)^2 / eps``."""
    if not epsilon > 0.0:
        raise ValueError("epsilon must be positive")
    rule = rule or QuadratureRule(v.grid)
    vq = v.at_quadrature(rule)
    dv = v.cell_derivatives()[:, None]
    return 0.5 * rule.integrate_values(epsilon * dv**2 + DOUBLE_WELL * (vq**2 - 1.0) ** 2 / epsilon)


def length_hard(v: FeFunction, rule: QuadratureRule | None = None) -> float:
    rule = rule or QuadratureRule(v.grid)
    return rule.integrate_values(chi(v.at_quadrature(rule)))


def load_term(K: FeFunction, problem: BeamProblem, rule: QuadratureRule | None = None) -> float:
    rule = rule or QuadratureRule(K.grid)
    ang = K.at_quadrature(rule) + problem.clamp_angle
    return rule.integrate_values(-problem.delta * (1.0 - rule.points) * np.sin(ang))


def compliance(K: FeFunction, v: FeFunction, params: DesignParams, problem: BeamProblem) -> ComplianceParts:
    if K.grid != v.grid:
        raise ValueError("state and phase field must live on the same grid")
    rule = QuadratureRule(K.grid)
    return ComplianceParts(
        load=load_term(K, problem, rule),
        length=params.c_l * length_hard(v, rule),
        perimeter=params.c_p * perimeter(v, params.epsilon, rule) if params.c_p else 0.0,
    )


def design_problem(problem: BeamProblem, v: FeFunction) -> BeamProblem:
    return problem.with_material(PhaseFieldMaterial(v, problem.a, problem.b))


def adjoint_solve(state: StateSolution | FeFunction, problem: BeamProblem, v: FeFunction | None = None) -> AdjointSolution:
    """Solve the adjoint system with the state Hessian at ``K``.

    If ``v`` is given the material is the phase-field coefficient ``A(v)``,
    otherwise ``problem.material`` is used as is.
    """
    K = state.K if isinstance(state, StateSolution) else state
    if v is not None:
        problem = design_problem(problem, v)
    rule = QuadratureRule(K.grid)
    H = hessian_full(K, problem, rule)
    ang = K.at_quadrature(rule) + problem.clamp_angle
    rhs = -rule.test_against_hats(problem.delta * (1.0 - rule.points) * np.cos(ang))
    rhs[0] = 0.0
    try:
        P = FeFunction(K.grid, H.solve(rhs))
    except SingularMatrixError as exc:
        raise SingularMatrixError(f"adjoint system is singular: {exc}") from exc
    p = cell_average_material(problem, K.grid, rule) * P.cell_derivatives()
    return AdjointSolution(P, p)


def reduced_gradient(
    v: FeFunction,
    K: FeFunction,
    P: FeFunction,
    params: DesignParams,
    problem: BeamProblem,
) -> np.ndarray:
    """Derivative of ``v -> J(K(v), v)`` tested against every hat function."""
    rule = QuadratureRule(v.grid)
    vq = v.at_quadrature(rule)
    dv = v.cell_derivatives()[:, None]
    eps = params.epsilon
    g = rule.test_against_hats(params.c_l * 0.5 * (vq + 1.0))
    if params.c_p:
        g += params.c_p * eps * rule.test_against_hat_derivatives(np.broadcast_to(dv, vq.shape))
        g += params.c_p * rule.test_against_hats(9.0 / (8.0 * eps) * (vq**2 - 1.0) * vq)
    coupling = 0.5 * (problem.b - problem.a) * (vq + 1.0) * (K.cell_derivatives() * P.cell_derivatives())[:, None]
    g -= rule.test_against_hats(coupling)
    return g


@dataclass
class Evaluation:
    v: FeFunction
    state: StateSolution
    parts: ComplianceParts
    adjoint: AdjointSolution | None = None
    gradient: np.ndarray | None = None

    @property
    def cost(self) -> float:
        return self.parts.total


@dataclass
class ReducedCost:
    """``v -> J(K(v), v)`` with warm-started state solves.

    Each evaluation restarts Newton from the last accepted state, which keeps
    the state on one branch along an optimization path.  If that fails the
    state is recomputed by a multilevel solve from the named initialization.
    """

    problem: BeamProblem
    params: DesignParams
    init: str = "simple"
    coarse_level: int = 3
    tol: float = 1e-10
    max_iter: int = 50
    last_state: StateSolution | None = None
    state_solves: int = field(default=0, init=False)

    def solve_state(self, v: FeFunction, warm: StateSolution | None = None) -> StateSolution:
        prob = design_problem(self.problem, v)
        method = method_for(self.init)
        warm = warm or self.last_state
        self.state_solves += 1
        if warm is not None and warm.grid == v.grid:
            try:
                sol = newton_solve(warm.K, prob, self.tol, self.max_iter, method=method)
                if sol.converged:
                    return sol
            except (StateSolveError, SingularMatrixError):
                pass
        coarse = min(self.coarse_level, v.grid.level)
        return multilevel_solve(
            prob,
            coarse,
            v.grid.level,
            named_initialization(self.init, UniformGrid(coarse)),
            self.tol,
            self.max_iter,
            method=method,
        )

    def evaluate(self, v: FeFunction, gradient: bool = True, warm: StateSolution | None = None) -> Evaluation:
        state = self.solve_state(v, warm)
        ev = Evaluation(v, state, compliance(state.K, v, self.params, self.problem))
        if gradient:
            ev.adjoint = adjoint_solve(state, self.problem, v)
            ev.gradient = reduced_gradient(v, state.K, ev.adjoint.P, self.params, self.problem)
        return ev

    def accept(self, ev: Evaluation) -> None:
        self.last_state = ev.state

    def __call__(self, v: FeFunction) -> float:
        return self.evaluate(v, gradient=False).cost


def fd_gradient_check(
    v: FeFunction,
    params: DesignParams,
    problem: BeamProblem,
    step: float = 1e-6,
    n_directions: int = 10,
    seed: int = 0,
    init: str = "simple",
) -> float:
    """Worst relative error of the adjoint gradient against central differences.

    Directions are uniform random in [-1, 1] per node.  Each perturbed cost
    re-solves the state, warm-started from the unperturbed one.
    """
    cost = ReducedCost(problem, params, init=init, tol=1e-12)
    base = cost.evaluate(v)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_directions):
        w = rng.uniform(-1.0, 1.0, v.grid.num_nodes)
        plus = cost.evaluate(v + step * w, gradient=False, warm=base.state).cost
        minus = cost.evaluate(v - step * w, gradient=False, warm=base.state).cost
        fd = (plus - minus) / (2.0 * step)
        an = float(base.gradient @ w)
        err = abs(fd - an) / max(abs(fd), abs(an), 1e-300)
        worst = max(worst, err)
    return worst
