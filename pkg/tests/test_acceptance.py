"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line.

The lines are collected into an "acceptance criteria" section at the end of
the pytest report. Tolerances and runtime limits are the stated ones.
"""

import time

import numpy as np
import pytest
from scipy import integrate

from robust_oce.certainty import (cvar, cvar_via_oce, moce, moce_exponential_closed_form, oce,
                                  recover_utility)
from robust_oce.cli import table1_rows
from robust_oce.distributions import (ContaminationModel, DiscreteDistribution, DistributionSpec,
                                      kantorovich_distance_dist, sample)
from robust_oce.kantorovich import distance_closed_form, distance_dual_lp, distance_primal_lp
from robust_oce.rmoce import (SolveStatus, build_problem, error_bound, radius_sweep,
                              saddle_violations, solve_alternating, solve_direct, truncate_domain)
from robust_oce.statrobust import robustness_check
from robust_oce.utility import Exponential, left_slope, uniform_grid

from conftest import random_distribution, random_plu

NOMINAL = Exponential(2.0, 0.5)
# distribution, K, center curvature, grid size N, Lipschitz modulus L
CONFIGS = [
    ("uniform:-1,1", 100, 2.0, 10, 30.0),
    ("lognormal:0,1", 10, 0.5, 300, 10.0),
    ("pareto:1,1.5", 10, 1.0 / 3.0, 300, 10.0),
    ("gamma:0.53,3", 10, 0.5, 300, 10.0),
]
RADIUS = 0.05


def config_problem(i, radius=RADIUS, N=None, seed=0):
    name, K, alpha, N0, L = CONFIGS[i]
    d = sample(DistributionSpec.parse(name), K, seed)
    return build_problem(d, Exponential(alpha, 0.5), N or N0, L, radius)


def l1_by_quadrature(u, v):
    t = u.grid.breakpoints
    return sum(integrate.quad(lambda s: abs(float(u(s)) - float(v(s))), lo, hi, epsabs=1e-13)[0]
               for lo, hi in zip(t[:-1], t[1:]))


def test_criterion_01_kantorovich_agreement(acceptance):
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    dual_gap = oracle_gap = quad_gap = 0.0
    pairs = 0
    for N in (3, 10, 50):
        for _ in range(40):
            grid = uniform_grid(*np.sort(rng.uniform(-3, 3, 2)), N)
            u, v = random_plu(grid, rng), random_plu(grid, rng)
            p, d, cf = distance_primal_lp(u, v), distance_dual_lp(u, v), distance_closed_form(u, v)
            dual_gap = max(dual_gap, abs(p - d))
            oracle_gap = max(oracle_gap, abs(p - cf), abs(d - cf))
            if pairs % 10 == 0:
                quad_gap = max(quad_gap, abs(cf - l1_by_quadrature(u, v)))
            pairs += 1
    elapsed = time.perf_counter() - t0
    ok = pairs >= 100 and dual_gap <= 1e-7 and oracle_gap <= 1e-7 and quad_gap <= 1e-9 and elapsed < 60
    acceptance(1, "Kantorovich agreement", ok,
               f"{pairs} pairs, max|primal-dual|={dual_gap:.1e}, max|LP-closed form|={oracle_gap:.1e}, "
               f"closed form vs quadrature {quad_gap:.1e}, {elapsed:.1f}s")


def test_criterion_02_exponential_closed_form(acceptance):
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    dv = dx = 0.0
    for _ in range(50):
        d = random_distribution(rng, k_max=50, scale=rng.uniform(0.2, 3.0))
        alpha, scale = rng.uniform(0.1, 4.0), rng.uniform(0.2, 3.0)
        num = moce(d, Exponential(alpha, scale))
        cf = moce_exponential_closed_form(d, alpha, scale)
        dv, dx = max(dv, abs(num.value - cf.value)), max(dx, abs(num.x_star - cf.x_star))
    elapsed = time.perf_counter() - t0
    ok = dv <= 1e-7 and dx <= 1e-7 and elapsed < 10
    acceptance(2, "exponential closed form", ok,
               f"50 distributions, max value gap {dv:.1e}, max x* gap {dx:.1e}, {elapsed:.2f}s")


def test_criterion_03_cvar_bridge(acceptance):
    rng = np.random.default_rng(3)
    t0 = time.perf_counter()
    dists = [DiscreteDistribution(np.arange(1.0, 11.0), np.full(10, 0.1))]
    dists += [random_distribution(rng) for _ in range(19)]
    gap = 0.0
    for d in dists:
        for a in (0.05, 0.2, 0.5, 0.95):
            gap = max(gap, abs(cvar_via_oce(d, a) - cvar(d, a)))
    exact = cvar(dists[0], 0.2)
    elapsed = time.perf_counter() - t0
    ok = gap <= 1e-9 and exact == -1.5 and elapsed < 5
    acceptance(3, "CVaR bridge", ok,
               f"20 distributions x 4 levels, max gap {gap:.1e}, CVaR_0.2 of atoms 1..10 = {exact}, "
               f"{elapsed:.2f}s")


def test_criterion_04_table1_consistency(acceptance):
    t0 = time.perf_counter()
    rows = table1_rows(42)
    elapsed = time.perf_counter() - t0
    m_gap = max(abs(r["M_u"] - (1 - np.exp(-2 * r["x_star"]))) for r in rows)
    s_gap = max(max(abs(r["S_u"] - 2 * r["x_star"]), abs(r["S_u"] - r["eta_star"])) for r in rows)
    ordered = all(r["M_u"] <= r["S_u"] for r in rows)
    inside = all(r["xi_min"] / 2 - 1e-12 <= r["x_star"] <= r["xi_max"] / 2 + 1e-12 for r in rows)
    ok = len(rows) == 12 and m_gap <= 1e-6 and s_gap <= 1e-6 and ordered and inside and elapsed < 120
    acceptance(4, "MOCE/OCE table consistency", ok,
               f"{len(rows)} rows, max|M-(1-e^-2x*)|={m_gap:.1e}, max|S-2x*|,|S-eta*|={s_gap:.1e}, "
               f"MOCE<=OCE {ordered}, x* inside support halves {inside}, {elapsed:.1f}s")


def test_criterion_05_rmoce_structure(acceptance):
    t0 = time.perf_counter()
    problem = config_problem(0)
    radii = [0.0, 0.01, 0.02, 0.05, 0.1, 0.2]
    pts = radius_sweep(problem, radii, method="alternating")
    vals = [p.value for p in pts]
    tt = np.linspace(problem.grid.a, problem.grid.b, 10_001)
    center = problem.ball.center
    gaps = [float(np.max(np.abs(p.worst_utility(tt) - center(tt)))) for p in pts]
    ref = moce(problem.dist, center, bracket=problem.x_domain).value
    elapsed = time.perf_counter() - t0
    mono = all(b <= a + 1e-6 for a, b in zip(vals, vals[1:]))
    gap_mono = all(b >= a - 1e-12 for a, b in zip(gaps, gaps[1:]))
    r0 = abs(vals[0] - ref)
    ok = mono and gap_mono and r0 <= 1e-6 and elapsed < 300
    acceptance(5, "RMOCE structure", ok,
               f"values {[round(v, 5) for v in vals]} nonincreasing {mono}; r=0 vs MOCE {r0:.1e}; "
               f"sup gaps {[round(g, 4) for g in gaps]} nondecreasing {gap_mono}; {elapsed:.1f}s")


def _random_problem(rng):
    d = random_distribution(rng, k_max=20, loc=rng.uniform(-1, 1), scale=rng.uniform(0.3, 2.0))
    alpha = rng.uniform(0.3, 3.0)
    u = Exponential(alpha, 0.5)
    a, b = truncate_domain(None, d.atoms)
    L = 1.5 * left_slope(u, a, b)
    return build_problem(d, u, int(rng.integers(5, 16)), L, rng.uniform(0.0, 0.2))


@pytest.mark.slow
def test_criterion_06_solver_cross_validation(acceptance):
    rng = np.random.default_rng(6)
    problems = [(CONFIGS[i][0], config_problem(i)) for i in range(len(CONFIGS))]
    problems += [(f"random#{k}", _random_problem(rng)) for k in range(20)]
    t0 = time.perf_counter()
    worst_gap = worst_saddle = 0.0
    converged = failures = 0
    notes = []
    for name, p in problems:
        alt, direct = solve_alternating(p), solve_direct(p)
        gap = abs(alt.value - direct.value)
        worst_gap = max(worst_gap, gap)
        if gap > 1e-5:
            failures += 1
            notes.append(f"{name} gap {gap:.1e}")
        if alt.status is SolveStatus.CONVERGED:
            converged += 1
            gx, gu = saddle_violations(p, alt, n_x=50, n_u=20, seed=0)
            worst_saddle = max(worst_saddle, gx, gu)
            if max(gx, gu) > 1e-6:
                failures += 1
                notes.append(f"{name} saddle {max(gx, gu):.1e}")
    elapsed = time.perf_counter() - t0
    acceptance(6, "solver cross-validation", failures == 0,
               f"{len(problems)} problems ({converged} converged), max|alt-direct|={worst_gap:.1e}, "
               f"max saddle breach {worst_saddle:.1e}, {elapsed:.0f}s" + (f"; {notes}" if notes else ""))


@pytest.mark.slow
def test_criterion_07_error_bound_envelope(acceptance):
    t0 = time.perf_counter()
    ref = solve_alternating(config_problem(1, N=300))
    rows = []
    ok = True
    for N in (20, 40, 60, 80, 100):
        p = config_problem(1, N=N)
        val = solve_alternating(p).value
        bound = error_bound(CONFIGS[1][4], p.grid)
        ok &= abs(val - ref.value) <= bound
        rows.append(f"N={N}: |diff|={abs(val - ref.value):.2e} <= {bound:.2f}")
    elapsed = time.perf_counter() - t0
    ok = bool(ok) and elapsed < 600
    acceptance(7, "error-bound envelope", ok, f"lognormal, R_300={ref.value:.6f}; " + "; ".join(rows)
               + f"; {elapsed:.0f}s")


def test_criterion_08_statistical_robustness(acceptance):
    P = DistributionSpec.parse("uniform:-1,1")
    t0 = time.perf_counter()
    dirty = robustness_check(P, ContaminationModel(0.1, DistributionSpec.parse("dirac:0.5")), 50, 200, 30.0)
    clean = robustness_check(P, ContaminationModel(0.0, DistributionSpec.parse("dirac:0.5")), 50, 200, 30.0)
    elapsed = time.perf_counter() - t0
    ok = (dirty.lhs <= dirty.rhs + 2 * dirty.stderr and abs(clean.lhs) <= 2 * clean.stderr
          and dirty.failures == clean.failures == 0 and elapsed < 600)
    acceptance(8, "statistical robustness", ok,
               f"eps=0.1 shift 0.5: lhs={dirty.lhs:.4f} rhs={dirty.rhs:.4f} stderr={dirty.stderr:.4f}; "
               f"control lhs={clean.lhs:.1e} stderr={clean.stderr:.1e}; {elapsed:.1f}s")


def test_criterion_09_property_suites(acceptance):
    rng = np.random.default_rng(9)
    checks = {}
    corpus = [random_distribution(rng, k_max=15) for _ in range(25)]

    # risk aversion: u(t) <= t when the utility is tangent to the identity at 0
    checks["risk aversion"] = all(
        moce(d, Exponential(a, 1.0 / a)).value <= d.mean() + 1e-10
        for d in corpus for a in (0.5, 1.0, 3.0))

    # subhomogeneity of MOCE for u(0) = 0
    u = Exponential(1.0)
    ok = True
    for d in corpus:
        base = moce(d, u).value
        ok &= all(moce(d.scaled(k), u).value <= k * base + 1e-8 for k in (1.5, 2.0, 5.0))
        ok &= all(moce(d.scaled(k), u).value >= k * base - 1e-8 for k in (0.25, 0.5))
    checks["MOCE subhomogeneity"] = bool(ok)

    # subhomogeneity of the robust value, both problems on one covering grid
    d = sample(DistributionSpec.parse("uniform:-1,1"), 30, 4)
    ok = True
    for k in (0.25, 0.5, 1.5, 2.0, 5.0):
        dom = (-2.0 * max(1.0, k), 2.0 * max(1.0, k))
        R = solve_direct(build_problem(d, NOMINAL, 13, 30.0, 0.05, domain=dom)).value
        Rk = solve_direct(build_problem(d.scaled(k), NOMINAL, 13, 30.0, 0.05, domain=dom)).value
        ok &= (Rk <= k * R + 1e-6) if k >= 1 else (Rk >= k * R - 1e-6)
    checks["RMOCE subhomogeneity"] = bool(ok)

    # law invariance: permuted samples give bit-identical estimates
    xi = rng.normal(size=40)
    perm = rng.permutation(xi)
    p1 = build_problem(DiscreteDistribution.from_samples(xi), NOMINAL, 10, 30.0, 0.05)
    p2 = build_problem(DiscreteDistribution.from_samples(perm), NOMINAL, 10, 30.0, 0.05)
    checks["law invariance"] = (
        moce(DiscreteDistribution.from_samples(xi), NOMINAL) == moce(DiscreteDistribution.from_samples(perm), NOMINAL)
        and solve_direct(p1).value == solve_direct(p2).value)

    # distribution metric axioms
    ok = True
    dk = kantorovich_distance_dist
    for _ in range(100):
        P, Q, R = (DiscreteDistribution.from_samples(rng.integers(-8, 8, rng.integers(1, 7)) / 4.0)
                   for _ in range(3))
        ok &= dk(P, Q) == dk(Q, P)
        ok &= dk(P, R) <= dk(P, Q) + dk(Q, R) + 1e-12
        ok &= (dk(P, Q) == 0) == (P == Q)
    checks["metric axioms"] = bool(ok)

    failed = [k for k, v in checks.items() if not v]
    acceptance(9, "property suites", not failed,
               ", ".join(f"{k} {'ok' if v else 'FAILED'}" for k, v in checks.items()))


def test_criterion_10_utility_recovery(acceptance):
    t0 = time.perf_counter()
    u = Exponential(1.0)
    errs = {}
    for z in (0.5, 1.0, 2.0):
        est, _ = recover_utility(u, z, [1e-4])
        errs[z] = abs(est - float(u(z)))
    elapsed = time.perf_counter() - t0
    ok = max(errs.values()) <= 1e-3 and elapsed < 30
    acceptance(10, "utility recovery", ok,
               ", ".join(f"z={z}: err {e:.1e}" for z, e in errs.items()) + f", {elapsed:.2f}s")


@pytest.mark.parametrize("i", range(4))
def test_configs_build(i):
    p = config_problem(i)
    assert p.grid.n == CONFIGS[i][3] and p.ball.lipschitz == CONFIGS[i][4]
