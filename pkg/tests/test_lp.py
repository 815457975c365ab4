import numpy as np
import pytest
from scipy.optimize import linprog

from robust_oce.lp import KERNELS, LinearProgram, LpStatus, SimplexSolver, solve

kernels = pytest.mark.parametrize("kernel", sorted(KERNELS))


def highs(lp):
    """Independent oracle: scipy's HiGHS on the same LP, objective in the LP's own sense."""
    sgn = -1.0 if lp.sense == "max" else 1.0
    bounds = [(None if np.isinf(lo) else lo, None if np.isinf(hi) else hi)
              for lo, hi in zip(lp.lower, lp.upper)]
    res = linprog(sgn * lp.c, A_ub=lp.A_le if lp.b_le.size else None, b_ub=lp.b_le if lp.b_le.size else None,
                  A_eq=lp.A_eq if lp.b_eq.size else None, b_eq=lp.b_eq if lp.b_eq.size else None,
                  bounds=bounds, method="highs")
    return res.status, (sgn * res.fun if res.status == 0 else None)


def random_lp(rng, feasible=True):
    n = int(rng.integers(2, 12))
    me, ml = int(rng.integers(0, 4)), int(rng.integers(0, 6))
    x0 = rng.uniform(-1, 1, n)
    Ae = rng.normal(size=(me, n))
    Al = rng.normal(size=(ml, n))
    bl = Al @ x0 + rng.uniform(0, 1, ml)
    if not feasible and ml:
        bl = bl - 50.0
    lo = np.where(rng.random(n) < 0.3, -np.inf, -2.0)
    hi = np.where(rng.random(n) < 0.3, np.inf, 2.0)
    return LinearProgram(rng.normal(size=n), Ae if me else None, Ae @ x0 if me else None,
                         Al if ml else None, bl if ml else None, lo, hi,
                         sense=str(rng.choice(["min", "max"])))


@kernels
def test_max_single_variable(kernel):
    s = solve(LinearProgram([1.0], A_le=[[1.0]], b_le=[3.0], sense="max"), kernel=kernel)
    assert s.optimal and s.x[0] == pytest.approx(3.0) and s.objective == pytest.approx(3.0)


@kernels
def test_equality_constrained_min(kernel):
    s = solve(LinearProgram([1.0, 1.0], A_eq=[[1.0, 1.0]], b_eq=[1.0]), kernel=kernel)
    assert s.optimal and s.objective == pytest.approx(1.0)


def _vertex_enumeration(c, A, b):
    """Brute-force oracle for 2-D max c.x s.t. A x <= b: best feasible intersection of two rows."""
    best = -np.inf
    for i in range(len(b)):
        for j in range(i + 1, len(b)):
            M = A[[i, j]]
            if abs(np.linalg.det(M)) < 1e-12:
                continue
            v = np.linalg.solve(M, b[[i, j]])
            if np.all(A @ v <= b + 1e-12):
                best = max(best, c @ v)
    return best


@kernels
def test_two_variable_vertex_example(kernel):
    c = np.array([2.0, 3.0])
    lp = LinearProgram(c, A_le=[[1, 1], [1, 3]], b_le=[4, 6], sense="max")
    s = solve(lp, kernel=kernel)
    A_all = np.array([[1, 1], [1, 3], [-1, 0], [0, -1]], dtype=float)
    b_all = np.array([4, 6, 0, 0], dtype=float)
    assert s.objective == pytest.approx(_vertex_enumeration(c, A_all, b_all), abs=1e-8)
    assert s.objective == pytest.approx(9.0, abs=1e-8)
    assert np.allclose(s.x, [3.0, 1.0], atol=1e-8)


@kernels
def test_infeasible_and_unbounded_statuses(kernel):
    infeasible = LinearProgram([1.0], A_le=[[1.0]], b_le=[-1.0])
    assert solve(infeasible, kernel=kernel).status is LpStatus.INFEASIBLE
    unbounded = LinearProgram([1.0, 0.0], A_le=[[-1.0, 1.0]], b_le=[1.0], sense="max")
    assert solve(unbounded, kernel=kernel).status is LpStatus.UNBOUNDED


def test_iteration_limit_reported_distinctly():
    rng = np.random.default_rng(2)
    n = 30
    A = rng.random((20, n))
    lp = LinearProgram(rng.random(n), A_le=A, b_le=np.ones(20), sense="max")
    assert solve(lp, max_iter=1).status is LpStatus.ITERATION_LIMIT


@kernels
def test_random_lps_match_highs(kernel):
    rng = np.random.default_rng(0)
    for _ in range(150):
        lp = random_lp(rng, feasible=rng.random() < 0.85)
        status, ref = highs(lp)
        s = solve(lp, kernel=kernel)
        if status == 0:
            assert s.optimal
            assert s.objective == pytest.approx(ref, abs=1e-8 * (1 + abs(ref)))
            assert s.residual <= 1e-8
        elif status == 2:
            assert s.status is LpStatus.INFEASIBLE
        elif status == 3:
            assert s.status is LpStatus.UNBOUNDED


@kernels
def test_warm_resolves_match_cold_solves(kernel):
    rng = np.random.default_rng(5)
    n, m = 8, 6
    A = rng.normal(size=(m, n))
    lp = LinearProgram(np.zeros(n), A_le=A, b_le=A @ rng.random(n) + 0.5, lower=-np.ones(n), upper=np.ones(n))
    solver = SimplexSolver(lp, kernel=kernel)
    for _ in range(60):
        c = rng.normal(size=n)
        warm = solver.solve(c)
        _, ref = highs(LinearProgram(c, A_le=lp.A_le, b_le=lp.b_le, lower=lp.lower, upper=lp.upper))
        assert warm.objective == pytest.approx(ref, abs=1e-9)


@kernels
def test_redundant_equalities_then_warm_resolve(kernel):
    # The duplicated and combined equality rows leave artificials at zero level
    # in phase 1; they must be removed without losing the independent rows.
    rng = np.random.default_rng(9)
    for _ in range(20):
        n = 7
        base = rng.normal(size=(3, n))
        Ae = np.vstack([base, base[0] + base[2], 2 * base[1]])[rng.permutation(5)]
        x0 = rng.uniform(0.2, 0.8, n)
        Al = rng.normal(size=(3, n))
        lp = LinearProgram(rng.normal(size=n), Ae, Ae @ x0, Al, Al @ x0 + 0.3, np.zeros(n), np.ones(n))
        solver = SimplexSolver(lp, kernel=kernel)
        for c in [lp.c, *rng.normal(size=(5, n))]:
            s = solver.solve(c)
            lp_c = LinearProgram(c, lp.A_eq, lp.b_eq, lp.A_le, lp.b_le, lp.lower, lp.upper)
            _, ref = highs(lp_c)
            assert s.optimal and s.objective == pytest.approx(ref, abs=1e-8)
            assert lp.residual(s.x) <= 1e-8


@kernels
def test_weak_duality_with_hand_built_dual(kernel):
    # primal: max c.x, A x <= b, x >= 0; dual: min b.y, A^T y >= c, y >= 0
    rng = np.random.default_rng(11)
    for _ in range(30):
        m, n = 4, 5
        A = rng.random((m, n)) + 0.1
        b = rng.random(m) + 1.0
        c = rng.random(n)
        p = solve(LinearProgram(c, A_le=A, b_le=b, sense="max"), kernel=kernel)
        d = solve(LinearProgram(b, A_le=-A.T, b_le=-c), kernel=kernel)
        assert p.objective <= d.objective + 1e-8
        assert p.objective == pytest.approx(d.objective, abs=1e-8)


def test_kernels_agree_and_are_deterministic():
    rng = np.random.default_rng(4)
    for _ in range(30):
        lp = random_lp(rng)
        runs = [solve(lp, kernel=k) for k in sorted(KERNELS) for _ in range(2)]
        for r in runs[1:]:
            assert r.status is runs[0].status
            if r.optimal:
                assert np.array_equal(r.x, runs[0].x)


def test_dump_layout():
    lp = LinearProgram([1.0, 2.0], A_eq=[[1, 1]], b_eq=[1], A_le=[[1, 0]], b_le=[0.5], sense="max")
    lines = lp.dump().splitlines()
    assert lines[0].startswith("MAX")
    assert lines[1].startswith("EQ") and lines[1].endswith("= 1")
    assert lines[2].startswith("LE") and lines[2].endswith("<= 0.5")
    assert [ln.split()[0] for ln in lines[3:]] == ["BOUND", "BOUND"]


def test_invalid_lps_rejected():
    with pytest.raises(ValueError):
        LinearProgram([1.0, 2.0], A_le=[[1.0]], b_le=[1.0])
    with pytest.raises(ValueError):
        LinearProgram([np.nan])
    with pytest.raises(ValueError):
        LinearProgram([1.0], sense="maximise")
    with pytest.raises(ValueError):
        SimplexSolver(LinearProgram([1.0]), kernel="fortran")
