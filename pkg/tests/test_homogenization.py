import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from elastica.fem import FeFunction, build_grid, integrate
from elastica.homogenization import (
    A_dot_of_theta,
    A_of_theta,
    RelaxedDesign,
    homogenization_experiment,
    laminate,
)
from elastica.state import BeamProblem

PB = BeamProblem(delta=100.0, clamp_angle=0.0, a=0.5, b=1.0)


def const_theta(value, level=3):
    g = build_grid(level)
    return FeFunction(g, np.full(g.num_nodes, float(value)))


def test_A_of_theta_examples():
    assert A_of_theta(0.0, 0.5, 1.0) == 0.5 and A_of_theta(1.0, 0.5, 1.0) == 1.0
    assert A_of_theta(0.5, 0.5, 1.0) == pytest.approx(2 / 3)
    with pytest.raises(ValueError):
        A_of_theta(1.2, 0.5, 1.0)
    with pytest.raises(ValueError):
        A_of_theta(-0.1, 0.5, 1.0)


def test_A_dot_examples():
    a, b = 0.5, 1.0
    assert A_dot_of_theta(0.0, a, b) == pytest.approx((1 / a - 1 / b) * a**2)
    assert A_dot_of_theta(0.5, a, b) == pytest.approx(4 / 9)
    s = 1e-6
    for th in np.arange(1, 10) / 10:
        fd = (A_of_theta(th + s, a, b) - A_of_theta(th - s, a, b)) / (2 * s)
        assert fd == pytest.approx(A_dot_of_theta(th, a, b), abs=1e-8)


@settings(max_examples=100, deadline=None)
@given(t1=st.floats(0, 1), t2=st.floats(0, 1), a=st.floats(0.01, 10), ratio=st.floats(1.01, 100))
def test_harmonic_monotone_and_bracketed(t1, t2, a, ratio):
    b = a * ratio
    lo, hi = sorted((t1, t2))
    if hi - lo > 1e-9:
        assert A_of_theta(lo, a, b) < A_of_theta(hi, a, b)
    A = A_of_theta(t1, a, b)
    arith = (1 - t1) * a + t1 * b
    assert a * (1 - 1e-12) <= A <= arith * (1 + 1e-12)
    if 1e-6 < t1 < 1 - 1e-6:
        assert A < arith


def test_relaxed_design_validation():
    g = build_grid(3)
    with pytest.raises(ValueError):
        RelaxedDesign(FeFunction(g, np.full(g.num_nodes, 1.5)))


def test_laminate_examples():
    lam = laminate(const_theta(1.0), 7)
    t = np.linspace(0, 1, 1001)
    assert np.all(lam.chi(t) == 1.0)
    lam = laminate(RelaxedDesign(const_theta(0.5)), 2)
    assert lam.hard_intervals() == [(0.0, 0.25), (0.5, 0.75)]
    assert lam.chi(np.array([0.1, 0.3, 0.6, 0.9])).tolist() == [1, 0, 1, 0]
    with pytest.raises(ValueError):
        laminate(const_theta(0.5), 0)


def test_laminate_period_fractions():
    g = build_grid(6)
    th = FeFunction(g, 0.5 + 0.4 * np.sin(5 * g.nodes))
    for n in (3, 16, 50):
        lam = laminate(th, n)
        edges = np.arange(n + 1) / n
        fine = np.linspace(0, 1, 200001)
        vals = th(fine)
        for j in range(n):
            mask = (fine >= edges[j]) & (fine <= edges[j + 1])
            assert lam.fractions[j] == pytest.approx(np.mean(vals[mask]), abs=1 / n**2 + 1e-4)


def _int_poly_chi(coeffs, intervals):
    P = np.polynomial.Polynomial(coeffs).integ()
    return sum(P(hi) - P(lo) for lo, hi in intervals)


def test_weak_star_rate():
    g = build_grid(8)
    th = FeFunction(g, 0.5 + 0.3 * np.cos(4 * g.nodes))
    rng = np.random.default_rng(11)
    ns = [4, 8, 16, 32, 64, 128, 256]
    for _ in range(20):
        c = rng.uniform(-1, 1, 4)
        limit = integrate(lambda t: np.polynomial.Polynomial(c)(t) * th(t), g)
        scaled = [n * abs(_int_poly_chi(c, laminate(th, n).hard_intervals()) - limit) for n in ns]
        C = max(scaled[:3])
        assert max(scaled) <= 2 * C + 1e-9


def test_homogenization_exact_for_full_hard():
    table = homogenization_experiment(const_theta(1.0), [2, 4], PB, level=7)
    assert all(e == pytest.approx(0.0, abs=1e-12) for e in table.errors)


def test_homogenization_small_converges():
    table = homogenization_experiment(const_theta(0.5), [8, 32, 64], PB)
    assert table.level == 10
    assert table.decreasing
    # at period boundaries the error falls at least like 1/n
    b = [r.boundary_error for r in table.rows]
    assert b[0] / b[1] > 4 and b[1] / b[2] > 2
    # at period boundaries the laminate matches the homogenized state far more closely
    assert all(r.boundary_error < 0.2 * r.error for r in table.rows)


def test_centered_placement():
    lam = laminate(const_theta(0.5), 2, placement="centered")
    assert lam.hard_intervals() == [(0.125, 0.375), (0.625, 0.875)]
    assert lam.chi(np.array([0.05, 0.2, 0.45, 0.7])).tolist() == [0, 1, 0, 1]
    assert np.all(laminate(const_theta(1.0), 3, placement="centered").chi(np.linspace(0, 1, 101)) == 1)
    with pytest.raises(ValueError):
        laminate(const_theta(0.5), 2, placement="random")


def test_centered_laminates_halve_oscillation():
    # same experiment as the leading-placement acceptance run, with hard material mid-period
    table = homogenization_experiment(const_theta(0.5), [8, 32, 128], PB, level=11, placement="centered")
    assert table.decreasing
    assert table.rows[-1].error <= 0.02
    assert table.rows[-1].control_error >= 3 * table.rows[-1].error
    lead = homogenization_experiment(const_theta(0.5), [128], PB, level=11, control=False)
    assert table.rows[-1].error < 0.6 * lead.rows[0].error
