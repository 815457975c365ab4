import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from robust_oce.kantorovich import (distance_closed_form, distance_dual_lp, distance_primal_lp,
                                    dual_constraints, dual_cost, refine_at_crossings)
from robust_oce.utility import Exponential, Grid, PiecewiseLinearUtility, project_to_grid, uniform_grid

from conftest import random_plu


def quad_l1(u, v):
    """Independent oracle: adaptive quadrature of |u - v| with the grid nodes as break hints."""
    t = u.grid.breakpoints
    total = 0.0
    for lo, hi in zip(t[:-1], t[1:]):
        total += integrate.quad(lambda s: abs(float(u(s)) - float(v(s))), lo, hi, epsabs=1e-13, limit=200)[0]
    return total


def test_identical_utilities_have_zero_distance(rng):
    u = random_plu(uniform_grid(0, 1, 6), rng)
    assert distance_primal_lp(u, u) == pytest.approx(0.0, abs=1e-12)
    assert distance_dual_lp(u, u) == pytest.approx(0.0, abs=1e-12)
    assert distance_closed_form(u, u) == 0.0


def test_dual_multipliers_zero_feasible_for_equal_slopes(rng):
    grid = uniform_grid(0, 1, 6)
    u = random_plu(grid, rng)
    A_bal, A_mult = dual_constraints(grid)
    lam = np.zeros(A_mult.shape[1])
    assert np.allclose(A_mult @ lam, 0.0) and dual_cost(grid) @ lam == 0.0
    assert np.allclose(A_bal @ lam, 0.0)
    assert u.slopes.shape[0] * 4 == lam.size


def test_three_point_example():
    g = Grid([0.0, 0.5, 1.0])
    u = PiecewiseLinearUtility(g, [0.0, 0.5, 1.0])
    v = PiecewiseLinearUtility(g, [0.0, 1.0, 1.0])
    assert quad_l1(u, v) == pytest.approx(0.25, abs=1e-12)
    assert distance_closed_form(u, v) == pytest.approx(0.25, abs=1e-15)
    assert distance_primal_lp(u, v) == pytest.approx(0.25, abs=1e-9)
    assert distance_dual_lp(u, v) == pytest.approx(0.25, abs=1e-9)


def test_projected_nominal_with_shifted_slopes():
    grid = uniform_grid(-1, 1, 10)
    u0 = project_to_grid(Exponential(2.0, 0.5), grid)
    s = np.append(u0.slopes[1:], u0.slopes[-1])
    u = PiecewiseLinearUtility.from_slopes(grid, s / (s @ grid.steps))
    ref = quad_l1(u, u0)
    assert distance_closed_form(u, u0) == pytest.approx(ref, abs=1e-10)
    assert distance_primal_lp(u, u0) == pytest.approx(ref, abs=1e-7)


@pytest.mark.parametrize("N", [3, 10, 50])
def test_three_way_agreement(N, rng):
    for _ in range(12 if N == 50 else 35):
        grid = uniform_grid(*np.sort(rng.uniform(-3, 3, 2)), N)
        u, v = random_plu(grid, rng), random_plu(grid, rng)
        cf = distance_closed_form(u, v)
        p, d = distance_primal_lp(u, v), distance_dual_lp(u, v)
        assert abs(p - d) <= 1e-7
        assert abs(p - cf) <= 1e-7
        assert cf == pytest.approx(quad_l1(u, v), abs=1e-9)


def test_dual_gap_on_random_pairs_n20(rng):
    grid = uniform_grid(0, 2, 20)
    for _ in range(10):
        u, v = random_plu(grid, rng), random_plu(grid, rng)
        assert abs(distance_primal_lp(u, v) - distance_dual_lp(u, v)) <= 1e-7


def test_unrefined_lp_is_an_upper_bound(rng):
    grid = uniform_grid(0, 1, 8)
    for _ in range(20):
        u, v = random_plu(grid, rng), random_plu(grid, rng)
        coarse = distance_dual_lp(u, v, refine=False)
        assert coarse >= distance_closed_form(u, v) - 1e-9
        assert coarse == pytest.approx(distance_primal_lp(u, v, refine=False), abs=1e-8)


def test_refinement_preserves_functions(rng):
    grid = uniform_grid(0, 1, 6)
    u, v = random_plu(grid, rng), random_plu(grid, rng)
    ur, vr = refine_at_crossings(u, v)
    tt = np.linspace(0, 1, 501)
    assert np.allclose(ur(tt), u(tt), atol=1e-14) and np.allclose(vr(tt), v(tt), atol=1e-14)
    D = ur.values - vr.values
    assert not np.any(D[:-1] * D[1:] < 0)


def test_mismatched_grids_rejected(rng):
    u = random_plu(uniform_grid(0, 1, 4), rng)
    v = random_plu(uniform_grid(0, 1, 5), rng)
    for fn in (distance_primal_lp, distance_dual_lp, distance_closed_form):
        with pytest.raises(ValueError):
            fn(u, v)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), N=st.integers(3, 12))
def test_metric_axioms(seed, N):
    rng = np.random.default_rng(seed)
    grid = uniform_grid(-1, 1, N)
    u, v, w = (random_plu(grid, rng) for _ in range(3))
    d = distance_closed_form
    assert d(u, v) == pytest.approx(d(v, u), abs=1e-15)
    assert d(u, w) <= d(u, v) + d(v, w) + 1e-9
    assert d(u, u) == 0.0 and (d(u, v) > 0) == (not np.array_equal(u.values, v.values))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), lam=st.floats(0, 1))
def test_homogeneity_along_segments(seed, lam):
    rng = np.random.default_rng(seed)
    grid = uniform_grid(0, 1, 7)
    u0, u = random_plu(grid, rng), random_plu(grid, rng)
    w = PiecewiseLinearUtility(grid, lam * u.values + (1 - lam) * u0.values)
    assert distance_closed_form(w, u0) == pytest.approx(lam * distance_closed_form(u, u0), abs=1e-9)
    assert distance_primal_lp(w, u0) == pytest.approx(lam * distance_primal_lp(u, u0), abs=1e-7)
