import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from elastica.adjoint import (
    DesignParams,
    adjoint_solve,
    compliance,
    design_problem,
    fd_gradient_check,
    lambda_threshold,
    reduced_gradient,
)
from elastica.fem import FeFunction, build_grid
from elastica.materials import Homogeneous
from elastica.state import BeamProblem, hessian_full, multilevel_solve
from elastica.verification import adjoint_boundary_report

BASE = BeamProblem(delta=100.0, clamp_angle=0.0, a=0.5, b=1.0)


def const(g, value):
    return FeFunction(g, np.full(g.num_nodes, float(value)))


def test_params_validation():
    with pytest.raises(ValueError):
        DesignParams(c_l=0.0)
    with pytest.raises(ValueError):
        DesignParams(c_p=-1.0)
    with pytest.raises(ValueError):
        DesignParams(epsilon=0.0)
    with pytest.raises(ValueError):
        lambda_threshold(1.0, 1.0, 1.0)
    assert DesignParams().lam(0.5, 1.0) == 1.0


def test_compliance_examples():
    g = build_grid(6)
    params = DesignParams(1.0, 1.0, 1 / 64)
    K = g.zeros()
    parts = compliance(K, const(g, -1), params, BASE)
    assert parts.total == 0.0
    parts = compliance(K, const(g, 1), params, BASE)
    assert (parts.load, parts.perimeter) == (0.0, 0.0)
    assert parts.length == pytest.approx(1.0, abs=1e-14) and parts.total == pytest.approx(1.0, abs=1e-14)
    parts = compliance(K, const(g, -1), params, BeamProblem(delta=1.0, clamp_angle=math.pi / 2, a=0.5, b=1.0))
    assert parts.load == pytest.approx(-0.5, abs=1e-14)
    with pytest.raises(ValueError):
        compliance(K, const(build_grid(5), 0), params, BASE)


def test_adjoint_zero_load():
    g = build_grid(5)
    adj = adjoint_solve(g.zeros(), BeamProblem(delta=0.0))
    assert np.all(adj.P.coeffs == 0.0)


def test_linearized_adjoint():
    delta = 0.01
    pb = BeamProblem(delta=delta, material=Homogeneous(1.0))
    sol = multilevel_solve(pb, 3, 9)
    adj = adjoint_solve(sol, pb)
    g = sol.K.grid
    t, mids = g.nodes, g.midpoints
    assert np.max(np.abs(adj.P.coeffs / delta - ((1 - t) ** 3 - 1) / 6)) <= 1e-4
    assert np.max(np.abs(adj.p / delta + (1 - mids) ** 2 / 2)) <= 1e-4
    dp0 = (adj.p[1] - adj.p[0]) / g.h
    assert dp0 / delta == pytest.approx(1.0, rel=0.02)


def test_adjoint_matrix_is_state_hessian():
    g = build_grid(7)
    v = FeFunction(g, np.tanh((0.3 - g.nodes) * 20))
    pb = design_problem(BASE, v)
    sol = multilevel_solve(pb, 3, 7)
    H1 = hessian_full(sol.K, pb)
    H2 = hessian_full(sol.K, design_problem(BASE, v))
    assert np.array_equal(H1.tri.main, H2.tri.main)
    assert np.array_equal(H1.tri.sub, H2.tri.sub)
    adj = adjoint_solve(sol, BASE, v)
    # the solve satisfies the system built from the same matrix
    r = H1.matvec(adj.P.coeffs)
    assert r[0] == adj.P.coeffs[0] == 0.0


@pytest.mark.parametrize("material", [lambda t: np.ones_like(t), lambda t: 0.5 + 0.5 * t, lambda t: 1.0 + (t < 0.4)])
def test_adjoint_boundary_suite(material):
    pb = BeamProblem(delta=100.0, a=0.5, b=2.0, material=material)
    rows = []
    for level in (7, 9):
        sol = multilevel_solve(pb, 3, level)
        adj = adjoint_solve(sol, pb)
        rep = adjoint_boundary_report(adj.p, adj.P, pb.delta)
        assert rep.ok, rep.violations
        rows.append(rep.times["dp0"] / pb.delta)
    # discrete p'(0)/delta approaches 1
    assert abs(rows[1] - 1) < abs(rows[0] - 1) or abs(rows[1] - 1) < 1e-3
    assert abs(rows[1] - 1) < 0.05


def test_gradient_examples():
    g = build_grid(5)
    params = DesignParams(1.0, 0.0, 1 / 32)
    pb = BeamProblem(delta=0.0, a=0.5, b=1.0)
    K, P = g.zeros(), g.zeros()
    np.testing.assert_array_equal(reduced_gradient(const(g, -1), K, P, params, pb), 0.0)
    gr = reduced_gradient(const(g, 0), K, P, params, pb)
    np.testing.assert_allclose(gr[1:-1], 0.5 * g.h, rtol=1e-14)


def test_fd_exact_without_load():
    g = build_grid(5)
    v = FeFunction(g, np.random.default_rng(0).uniform(-1, 1, g.num_nodes))
    err = fd_gradient_check(v, DesignParams(1.0, 0.0, 1 / 32), BeamProblem(delta=0.0, a=0.5, b=1.0), step=1e-4)
    assert err <= 1e-9


def test_fd_gradient_base_setup():
    g = build_grid(9)
    params = DesignParams(1.0, 1.0, g.h)
    assert fd_gradient_check(g.zeros(), params, BASE, n_directions=3) <= 1e-5
    v = FeFunction(g, np.random.default_rng(4).uniform(-1, 1, g.num_nodes))
    assert fd_gradient_check(v, params, BASE, n_directions=3, seed=1) <= 1e-5


def test_fd_error_scales_quadratically():
    g = build_grid(6)
    params = DesignParams(1.0, 1.0, g.h)
    v = FeFunction(g, 0.5 * np.sin(7 * g.nodes))
    errs = [fd_gradient_check(v, params, BASE, step=s, n_directions=2, seed=3) for s in (1e-2, 1e-3, 1e-4)]
    assert errs[0] > errs[1] > errs[2]
    # O(s^2): a decade in s buys about two decades in error
    assert errs[0] / errs[1] > 30 and errs[1] / errs[2] > 30


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_gradient_linear_in_perimeter_weight(seed):
    g = build_grid(5)
    rng = np.random.default_rng(seed)
    v = FeFunction(g, rng.uniform(-1.2, 1.2, g.num_nodes))
    K = FeFunction(g, np.r_[0.0, rng.uniform(-1, 0, g.num_nodes - 1)])
    P = FeFunction(g, np.r_[0.0, rng.uniform(-1, 0, g.num_nodes - 1)])
    g0 = reduced_gradient(v, K, P, DesignParams(1.0, 0.0, 0.05), BASE)
    g1 = reduced_gradient(v, K, P, DesignParams(1.0, 1.0, 0.05), BASE)
    g2 = reduced_gradient(v, K, P, DesignParams(1.0, 2.0, 0.05), BASE)
    np.testing.assert_allclose(g2 - g0, 2 * (g1 - g0), rtol=1e-10, atol=1e-12)
