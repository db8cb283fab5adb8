import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from elastica.fem import (
    FeFunction,
    QuadratureRule,
    SingularMatrixError,
    TridiagonalMatrix,
    UniformGrid,
    build_grid,
    integrate,
    ldl_pivots,
    prolongate,
    solve_tridiagonal,
)


def test_grid_sizes():
    g = build_grid(3)
    assert g.num_nodes == 9 and g.h == 0.125
    assert build_grid(9).num_nodes == 513
    np.testing.assert_array_equal(build_grid(1).nodes, [0.0, 0.5, 1.0])


@pytest.mark.parametrize("level", [0, -1, 40])
def test_grid_rejects_bad_levels(level):
    with pytest.raises(ValueError):
        build_grid(level)


@pytest.mark.parametrize("level", [1, 4, 9, 12])
def test_grid_invariants(level):
    g = build_grid(level)
    x = g.nodes
    assert x[0] == 0.0 and x[-1] == 1.0
    assert np.all(np.diff(x) > 0)
    assert abs(g.h * (g.num_nodes - 1) - 1.0) <= 4 * np.finfo(float).eps


def test_integrate_examples():
    g = build_grid(3)
    assert integrate(lambda t: np.ones_like(t), g) == pytest.approx(1.0, abs=1e-15)
    assert integrate(lambda t: t, g) == pytest.approx(0.5, abs=1e-15)
    for level in (1, 3, 7):
        assert integrate(lambda t: t**9, build_grid(level)) == pytest.approx(0.1, abs=1e-14)


@pytest.mark.parametrize("degree", range(10))
def test_degree_exactness(degree):
    # per-cell polynomial: (t - x_l)^degree on every cell, closed form h^(d+1)/(d+1) per cell
    g = build_grid(4)
    rule = QuadratureRule(g)
    left = g.nodes[:-1, None]
    vals = (rule.points - left) ** degree
    exact = g.num_cells * g.h ** (degree + 1) / (degree + 1)
    assert rule.integrate_values(vals) == pytest.approx(exact, rel=1e-13)
    # global monomial
    assert integrate(lambda t: t**degree, g) == pytest.approx(1.0 / (degree + 1), rel=1e-13)


def test_quadrature_weights():
    rule = QuadratureRule(build_grid(5))
    assert np.all(rule.weights > 0)
    np.testing.assert_allclose(rule.weights.sum(axis=1), rule.grid.h, rtol=1e-15)


def test_integrate_rejects_nonfinite():
    with pytest.raises(FloatingPointError):
        integrate(lambda t: np.full_like(t, np.nan), build_grid(2))


def test_integrate_linear():
    g = build_grid(5)
    f, h = np.sin, np.exp
    lhs = integrate(lambda t: 2 * f(t) - 3 * h(t), g)
    assert lhs == pytest.approx(2 * integrate(f, g) - 3 * integrate(h, g), abs=1e-14)


def test_eval_and_derivative():
    g = build_grid(3)
    assert FeFunction(g, np.full(9, 2.0)).eval(0.37) == 2.0
    assert FeFunction(g, g.nodes.copy()).eval(0.3) == pytest.approx(0.3, abs=1e-15)
    u = FeFunction(g, g.nodes**2)
    assert u.deriv_on_cell(1) == pytest.approx(0.375, abs=1e-15)
    with pytest.raises(ValueError):
        u.eval(1.5)
    with pytest.raises(ValueError):
        u(np.array([-0.1]))
    with pytest.raises(IndexError):
        u.deriv_on_cell(8)


def test_eval_at_nodes_exact():
    g = build_grid(6)
    c = np.random.default_rng(1).normal(size=g.num_nodes)
    u = FeFunction(g, c)
    np.testing.assert_array_equal(u(g.nodes), c)
    np.testing.assert_allclose(u.cell_derivatives(), np.diff(c) / g.h)


def test_prolongate_examples():
    g = build_grid(3)
    one = prolongate(FeFunction(g, np.ones(9)))
    assert one.grid.level == 4 and np.all(one.coeffs == 1.0)
    lin = prolongate(FeFunction(g, g.nodes.copy()))
    np.testing.assert_allclose(lin.coeffs, lin.grid.nodes, atol=1e-16)
    hat = prolongate(FeFunction(build_grid(1), np.array([0.0, 1.0, 0.0])))
    np.testing.assert_array_equal(hat.coeffs, [0.0, 0.5, 1.0, 0.5, 0.0])


@settings(max_examples=50, deadline=None)
@given(
    level=st.integers(1, 7),
    seed=st.integers(0, 2**31),
    ts=st.lists(st.floats(0.0, 1.0), min_size=1, max_size=20),
)
def test_prolongate_preserves_function(level, seed, ts):
    g = build_grid(level)
    u = FeFunction(g, np.random.default_rng(seed).uniform(-5, 5, g.num_nodes))
    w = prolongate(u)
    t = np.array(ts)
    assert np.max(np.abs(w(t) - u(t))) <= 1e-14


def test_solve_tridiagonal_examples():
    r = np.array([1.0, -2.0, 3.5, 0.25])
    np.testing.assert_array_equal(solve_tridiagonal(TridiagonalMatrix.identity(4), r), r)
    M = TridiagonalMatrix(np.array([-1.0, -1.0]), np.array([2.0, 2.0, 2.0]), np.array([-1.0, -1.0]))
    np.testing.assert_allclose(solve_tridiagonal(M, np.array([0.0, 1.0, 0.0])), [0.5, 1.0, 0.5], atol=1e-15)


def test_solve_tridiagonal_singular():
    M = TridiagonalMatrix(np.array([1.0]), np.array([0.0, 1.0]), np.array([1.0]))
    with pytest.raises(SingularMatrixError):
        solve_tridiagonal(M, np.array([1.0, 1.0]))
    # exact singular 2x2 after one elimination step
    M = TridiagonalMatrix(np.array([1.0]), np.array([1.0, 1.0]), np.array([1.0]))
    with pytest.raises(SingularMatrixError):
        solve_tridiagonal(M, np.array([1.0, 2.0]))


@pytest.mark.parametrize("n", [9, 65, 513])
def test_solve_tridiagonal_random_dominant(n):
    rng = np.random.default_rng(n)
    for _ in range(100):
        sub = rng.uniform(-1, 1, n - 1)
        sup = rng.uniform(-1, 1, n - 1)
        main = (np.abs(np.r_[0, sub]) + np.abs(np.r_[sup, 0]) + rng.uniform(0.1, 2, n)) * rng.choice([-1, 1], n)
        M = TridiagonalMatrix(sub, main, sup)
        r = rng.normal(size=n)
        x = solve_tridiagonal(M, r)
        res = np.max(np.abs(M.matvec(x) - r))
        assert res <= 1e-10 * (M.norm_inf() * np.max(np.abs(x)) + np.max(np.abs(r)))
        np.testing.assert_allclose(M.to_dense() @ x, r, atol=1e-9)


def test_ldl_pivots_detect_definiteness():
    n = 6
    M = TridiagonalMatrix(-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1))
    assert np.all(ldl_pivots(M) > 0)
    M2 = TridiagonalMatrix(-np.ones(n - 1), 0.5 * np.ones(n), -np.ones(n - 1))
    assert np.any(ldl_pivots(M2) < 0)
    assert M.asymmetry() == 0.0
