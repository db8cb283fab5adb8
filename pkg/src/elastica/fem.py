"""Uniform 1D grids, P1 hat functions, Gauss quadrature and banded solves.

Everything lives on the unit interval.  Nodes are ``x_n = n h`` with
``h = 1/(N-1)`` and ``N = 2**level + 1``.  A finite element function is a
coefficient vector in the hat basis, so its nodal values are its
coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "UniformGrid",
    "FeFunction",
    "QuadratureRule",
    "TridiagonalMatrix",
    "SingularMatrixError",
    "build_grid",
    "gauss_rule",
    "integrate",
    "prolongate",
    "solve_tridiagonal",
    "ldl_pivots",
]

MAX_LEVEL = 24

# Gauss-Legendre nodes/weights on (-1, 1) for Q = 5.
_GL5_NODES = np.array(
    [
        -0.9061798459386639927976269,
        -0.5384693101056830910363144,
        0.0,
        0.5384693101056830910363144,
        0.9061798459386639927976269,
    ]
)
_GL5_WEIGHTS = np.array(
    [
        0.2369268850561890875142640,
        0.4786286704993664680412915,
        0.5688888888888888888888889,
        0.4786286704993664680412915,
        0.2369268850561890875142640,
    ]
)


class SingularMatrixError(ArithmeticError):
    """Raised when banded elimination meets a (near) zero pivot."""


@dataclass(frozen=True)
class UniformGrid:
    level: int

    def __post_init__(self):
        if not isinstance(self.level, (int, np.integer)) or isinstance(self.level, bool):
            raise TypeError(f"grid level must be an integer, got {self.level!r}")
        if self.level < 1:
            raise ValueError(f"grid level must be >= 1, got {self.level}")
        if self.level > MAX_LEVEL:
            raise ValueError(f"grid level {self.level} exceeds the supported maximum {MAX_LEVEL}")

    @property
    def num_nodes(self) -> int:
        return 2**self.level + 1

    @property
    def num_cells(self) -> int:
        return 2**self.level

    @property
    def h(self) -> float:
        return 1.0 / self.num_cells

    @cached_property
    def nodes(self) -> np.ndarray:
        x = np.arange(self.num_nodes, dtype=float) * self.h
        x[-1] = 1.0
        x.setflags(write=False)
        return x

    @cached_property
    def midpoints(self) -> np.ndarray:
        m = (np.arange(self.num_cells, dtype=float) + 0.5) * self.h
        m.setflags(write=False)
        return m

    def zeros(self) -> "FeFunction":
        return FeFunction(self, np.zeros(self.num_nodes))

    def interpolate(self, g) -> "FeFunction":
        """Nodal interpolant of a vectorized callable."""
        return FeFunction(self, np.asarray(g(self.nodes), dtype=float) * np.ones(self.num_nodes))

    def finer(self) -> "UniformGrid":
        return UniformGrid(self.level + 1)


def build_grid(level: int) -> UniformGrid:
    return UniformGrid(level)


@dataclass(frozen=True, eq=False)
class FeFunction:
    """Continuous piecewise affine function given by its nodal values."""

    grid: UniformGrid
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float)
        if c.shape != (self.grid.num_nodes,):
            raise ValueError(
                f"expected {self.grid.num_nodes} coefficients, got shape {c.shape}"
            )
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0.0) or np.any(t > 1.0) or np.any(np.isnan(t)):
            raise ValueError("evaluation points must lie in [0, 1]")
        return np.interp(t, self.grid.nodes, self.coeffs)

    def eval(self, t: float) -> float:
        return float(self(t))

    def cell_derivatives(self) -> np.ndarray:
        return np.diff(self.coeffs) / self.grid.h

    def deriv_on_cell(self, cell: int) -> float:
        """Derivative on cell ``(x_{cell}, x_{cell+1})``, 0-based cell index."""
        if not 0 <= cell < self.grid.num_cells:
            raise IndexError(f"cell index {cell} out of range")
        return float((self.coeffs[cell + 1] - self.coeffs[cell]) / self.grid.h)

    def at_quadrature(self, rule: "QuadratureRule") -> np.ndarray:
        """Values at the Gauss points, shape ``(num_cells, Q)``."""
        c = self.coeffs
        return c[:-1, None] * rule.phi_left[None, :] + c[1:, None] * rule.phi_right[None, :]

    def with_coeffs(self, coeffs) -> "FeFunction":
        return FeFunction(self.grid, coeffs)

    def __add__(self, other):
        if isinstance(other, FeFunction):
            return FeFunction(self.grid, self.coeffs + other.coeffs)
        return FeFunction(self.grid, self.coeffs + other)

    def __sub__(self, other):
        if isinstance(other, FeFunction):
            return FeFunction(self.grid, self.coeffs - other.coeffs)
        return FeFunction(self.grid, self.coeffs - other)

    def __mul__(self, s):
        return FeFunction(self.grid, self.coeffs * s)

    __rmul__ = __mul__


@dataclass(frozen=True)
class QuadratureRule:
    """Composite Gauss-Legendre rule with ``points_per_cell`` points per cell."""

    grid: UniformGrid
    points_per_cell: int = 5

    def __post_init__(self):
        if self.points_per_cell < 1:
            raise ValueError("need at least one quadrature point per cell")

    @cached_property
    def _reference(self):
        if self.points_per_cell == 5:
            x, w = _GL5_NODES, _GL5_WEIGHTS
        else:
            x, w = np.polynomial.legendre.leggauss(self.points_per_cell)
        return 0.5 * (x + 1.0), 0.5 * w

    @property
    def ref_points(self) -> np.ndarray:
        return self._reference[0]

    @property
    def ref_weights(self) -> np.ndarray:
        return self._reference[1]

    @property
    def phi_left(self) -> np.ndarray:
        return 1.0 - self.ref_points

    @property
    def phi_right(self) -> np.ndarray:
        return self.ref_points

    @cached_property
    def points(self) -> np.ndarray:
        """Mapped points, shape ``(num_cells, Q)``."""
        g = self.grid
        return g.nodes[:-1, None] + g.h * self.ref_points[None, :]

    @cached_property
    def weights(self) -> np.ndarray:
        g = self.grid
        return np.broadcast_to(g.h * self.ref_weights, (g.num_cells, self.points_per_cell))

    def integrate_values(self, values: np.ndarray) -> float:
        values = np.asarray(values, dtype=float)
        if not np.all(np.isfinite(values)):
            raise FloatingPointError("integrand is not finite at some quadrature point")
        return float(np.sum(values * self.weights))

    def test_against_hats(self, values: np.ndarray) -> np.ndarray:
        """Vector ``(int g xi_j)_j`` for ``g`` given at the quadrature points."""
        wl = (values * self.weights) @ self.phi_left
        wr = (values * self.weights) @ self.phi_right
        out = np.zeros(self.grid.num_nodes)
        out[:-1] += wl
        out[1:] += wr
        return out

    def test_against_hat_derivatives(self, values: np.ndarray) -> np.ndarray:
        """Vector ``(int g xi_j')_j``."""
        cell = np.sum(values * self.weights, axis=1) / self.grid.h
        out = np.zeros(self.grid.num_nodes)
        out[:-1] -= cell
        out[1:] += cell
        return out


def gauss_rule(grid: UniformGrid, points_per_cell: int = 5) -> QuadratureRule:
    return QuadratureRule(grid, points_per_cell)


def integrate(g, grid: UniformGrid, rule: QuadratureRule | None = None) -> float:
    """Composite Gauss value of ``int_0^1 g(t) dt`` for a vectorized ``g``."""
    rule = rule or QuadratureRule(grid)
    vals = np.asarray(g(rule.points), dtype=float)
    vals = np.broadcast_to(vals, rule.points.shape)
    return rule.integrate_values(vals)


def prolongate(u: FeFunction) -> FeFunction:
    """Exact embedding of a P1 function into the next finer dyadic grid."""
    fine = u.grid.finer()
    c = np.empty(fine.num_nodes)
    c[0::2] = u.coeffs
    c[1::2] = 0.5 * (u.coeffs[:-1] + u.coeffs[1:])
    return FeFunction(fine, c)


@dataclass(frozen=True)
class TridiagonalMatrix:
    """Square tridiagonal matrix stored by its three diagonals.

    ``sub[i]`` is entry ``(i+1, i)`` and ``sup[i]`` is entry ``(i, i+1)``.
    """

    sub: np.ndarray
    main: np.ndarray
    sup: np.ndarray

    def __post_init__(self):
        n = len(self.main)
        if len(self.sub) != n - 1 or len(self.sup) != n - 1:
            raise ValueError("off-diagonals must have length n-1")

    @property
    def n(self) -> int:
        return len(self.main)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = self.main * x
        y[:-1] += self.sup * x[1:]
        y[1:] += self.sub * x[:-1]
        return y

    def to_dense(self) -> np.ndarray:
        return np.diag(self.main) + np.diag(self.sup, 1) + np.diag(self.sub, -1)

    def norm_inf(self) -> float:
        row = np.abs(self.main).copy()
        row[:-1] += np.abs(self.sup)
        row[1:] += np.abs(self.sub)
        return float(row.max())

    def asymmetry(self) -> float:
        scale = max(self.norm_inf(), np.finfo(float).tiny)
        return float(np.max(np.abs(self.sub - self.sup), initial=0.0) / scale)

    @classmethod
    def identity(cls, n: int) -> "TridiagonalMatrix":
        return cls(np.zeros(n - 1), np.ones(n), np.zeros(n - 1))


def ldl_pivots(M: TridiagonalMatrix) -> np.ndarray:
    """Pivots of the symmetric elimination; all positive iff ``M`` is SPD."""
    b = M.main.tolist()
    a = M.sub.tolist()
    c = M.sup.tolist()
    d = [0.0] * M.n
    d[0] = b[0]
    for i in range(1, M.n):
        d[i] = b[i] - a[i - 1] * c[i - 1] / d[i - 1] if d[i - 1] != 0.0 else -np.inf
    return np.array(d)


def solve_tridiagonal(M: TridiagonalMatrix, r) -> np.ndarray:
    """Thomas elimination without pivoting.

    Raises :class:`SingularMatrixError` if a pivot falls below
    ``1e-14 * ||M||_inf`` in magnitude.
    """
    r = np.asarray(r, dtype=float)
    n = M.n
    if r.shape != (n,):
        raise ValueError(f"right-hand side has shape {r.shape}, expected ({n},)")
    tol = 1e-14 * M.norm_inf()
    a, b, c = M.sub, M.main, M.sup
    cp = np.empty(max(n - 1, 0))
    dp = np.empty(n)
    piv = b[0]
    if not abs(piv) > tol:
        raise SingularMatrixError(f"zero pivot at row 0 (|pivot| = {abs(piv):.3e})")
    if n > 1:
        cp[0] = c[0] / piv
    dp[0] = r[0] / piv
    # plain floats in the loop; numpy scalar arithmetic is several times slower
    al, bl, cl, rl = a.tolist(), b.tolist(), c.tolist(), r.tolist()
    cpl, dpl = cp.tolist(), dp.tolist()
    for i in range(1, n):
        piv = bl[i] - al[i - 1] * cpl[i - 1]
        if not abs(piv) > tol:
            raise SingularMatrixError(f"zero pivot at row {i} (|pivot| = {abs(piv):.3e})")
        if i < n - 1:
            cpl[i] = cl[i] / piv
        dpl[i] = (rl[i] - al[i - 1] * dpl[i - 1]) / piv
    x = dpl
    for i in range(n - 2, -1, -1):
        x[i] = dpl[i] - cpl[i] * x[i + 1]
    return np.array(x)
