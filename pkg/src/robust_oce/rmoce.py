"""Robust MOCE over a Kantorovich ball of piecewise-linear utilities.

For a fixed allocation ``x`` the worst utility in the ball is the solution of
a linear program over segment slopes ``a_j``, intercepts ``b_j`` and the dual
multipliers ``lam`` that certify the ball constraint. Its value ``phi(x)`` is
concave in ``x`` (a pointwise minimum of concave functions), and the robust
MOCE is ``max_x phi(x)`` over the allocation interval ``X``.

Two outer solvers are provided:

* :func:`solve_direct` maximises ``phi`` by golden-section search after a
  coarse grid scan;
* :func:`solve_alternating` alternates between the worst-case utility at the
  current ``x`` and the best ``x`` against the utilities found so far.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from . import certainty
from .distributions import DiscreteDistribution, DistributionSpec
from .kantorovich import dual_constraints, dual_cost, distance_closed_form
from .lp import LinearProgram, LpError, LpStatus, SimplexSolver, solve as lp_solve
from .utility import Grid, PiecewiseLinearUtility, project_to_grid, uniform_grid, validate

N_SCAN = 64


@dataclass(frozen=True)
class KantorovichBall:
    center: PiecewiseLinearUtility
    radius: float

    def __post_init__(self):
        if not self.radius >= 0:
            raise ValueError("radius must be non-negative")
        bad = validate(self.center, tol=1e-9)
        if bad:
            raise ValueError(f"ball center is not an admissible utility: {bad[:3]}")
        if not np.isfinite(self.center.lipschitz):
            raise ValueError("ball center needs a finite Lipschitz modulus")

    @property
    def grid(self) -> Grid:
        return self.center.grid

    @property
    def lipschitz(self) -> float:
        return self.center.lipschitz

    def contains(self, u: PiecewiseLinearUtility, tol: float = 1e-6) -> bool:
        return (not validate(u, tol=1e-9)) and distance_closed_form(u, self.center) <= self.radius + tol


@dataclass(frozen=True)
class RmoceProblem:
    """Robust MOCE of ``dist`` over ``ball`` with allocations in ``x_domain``.

    ``x_domain`` defaults to the piecewise-linear MOCE bracket of the
    distribution. Both ``X`` and every ``xi_k - x`` must lie on the grid.
    """

    dist: DiscreteDistribution
    ball: KantorovichBall
    x_domain: tuple[float, float] | None = None

    def __post_init__(self):
        X = self.x_domain
        if X is None:
            X = certainty.moce_bracket(self.dist, self.ball.center)
        X = (float(X[0]), float(X[1]))
        if X[0] > X[1]:
            raise ValueError("empty allocation interval")
        object.__setattr__(self, "x_domain", X)
        a, b = self.ball.grid.a, self.ball.grid.b
        slack = 1e-9 * (b - a)
        lo = min(X[0], self.dist.min - X[1])
        hi = max(X[1], self.dist.max - X[0])
        if lo < a - slack or hi > b + slack:
            raise ValueError(f"grid [{a}, {b}] does not cover the arguments [{lo}, {hi}]")

    @property
    def grid(self) -> Grid:
        return self.ball.grid

    def objective(self, x: float, u) -> float:
        """``u(x) + E u(xi - x)``."""
        return float(u(x)) + float(self.dist.probs @ u(self.dist.atoms - x))

    def with_radius(self, r: float) -> RmoceProblem:
        return RmoceProblem(self.dist, KantorovichBall(self.ball.center, r), self.x_domain)


class SolveStatus(enum.Enum):
    CONVERGED = "converged"
    MAX_ITER = "max_iter"


@dataclass
class RmoceSolution:
    value: float
    x_star: float
    worst_utility: PiecewiseLinearUtility
    iterations: int
    status: SolveStatus
    method: str
    x_domain: tuple[float, float]
    trace: list = field(default_factory=list)  # (x, inner value) per step

    def to_dict(self) -> dict:
        return {"value": self.value, "x_star": self.x_star, "status": self.status.value,
                "method": self.method, "iterations": self.iterations,
                "x_domain": list(self.x_domain),
                "worst_utility": self.worst_utility.to_dict(),
                "trace": [[float(x), float(v)] for x, v in self.trace]}


# -- inner problem ---------------------------------------------------------------


class InnerSolver:
    """Worst-case utility at a given ``x``, with the constraint set built once.

    Variables are ``[a (n), b (n), lam (4n)]`` for ``n = N - 1`` segments:

    * continuity ``a_j t_{j+1} + b_j = a_{j+1} t_{j+1} + b_{j+1}``;
    * normalisation ``a_1 t_1 + b_1 = 0`` and ``a_{n} t_N + b_{n} = 1``;
    * concavity ``a_{j+1} <= a_j`` and bounds ``0 <= a_j <= L``;
    * ball ``-1/2 sum (lam1 + lam2 + lam3 + lam4)_j h_j^2 <= r`` with
      ``a - a0 + (lam1 - lam2 + lam3 - lam4) = 0``, the node balance rows
      and ``lam <= 0``.

    Only the objective depends on ``x``, so successive solves warm-start
    from the previous optimal basis.
    """

    def __init__(self, problem: RmoceProblem, kernel: str | None = None, with_ball: bool = True):
        self.problem = problem
        self.with_ball = with_ball
        self.lp = self._build()
        self.solver = SimplexSolver(self.lp, kernel=kernel)
        self.evaluations = 0

    def _build(self) -> LinearProgram:
        ball = self.problem.ball
        grid = ball.grid
        t, n = grid.breakpoints, grid.n - 1
        nv = 6 * n
        ia, ib, il = 0, n, 2 * n

        eq, beq = [], []
        for j in range(n - 1):
            r = np.zeros(nv)
            r[ia + j], r[ib + j] = t[j + 1], 1.0
            r[ia + j + 1], r[ib + j + 1] = -t[j + 1], -1.0
            eq.append(r)
            beq.append(0.0)
        r = np.zeros(nv)
        r[ia], r[ib] = t[0], 1.0
        eq.append(r)
        beq.append(0.0)
        r = np.zeros(nv)
        r[ia + n - 1], r[ib + n - 1] = t[-1], 1.0
        eq.append(r)
        beq.append(1.0)

        le, ble = [], []
        for j in range(n - 1):
            r = np.zeros(nv)
            r[ia + j + 1], r[ia + j] = 1.0, -1.0
            le.append(r)
            ble.append(0.0)

        lower = np.concatenate([np.zeros(n), np.full(n, -np.inf), np.full(4 * n, -np.inf)])
        upper = np.concatenate([np.full(n, ball.lipschitz), np.full(n, np.inf), np.zeros(4 * n)])

        if self.with_ball:
            A_bal, A_mult = dual_constraints(grid)
            block = np.zeros((n, nv))
            block[:, ia:ia + n] = np.eye(n)
            block[:, il:] = A_mult
            eq.extend(block)
            beq.extend(ball.center.slopes)
            bal = np.zeros((A_bal.shape[0], nv))
            bal[:, il:] = A_bal
            eq.extend(bal)
            beq.extend(np.zeros(A_bal.shape[0]))
            r = np.zeros(nv)
            r[il:] = dual_cost(grid)
            le.append(r)
            ble.append(ball.radius)
        else:
            lower[il:] = 0.0
        return LinearProgram(np.zeros(nv), A_eq=np.array(eq), b_eq=np.array(beq),
                             A_le=np.array(le), b_le=np.array(ble),
                             lower=lower, upper=upper, sense="min")

    def cost(self, x: float) -> np.ndarray:
        """Objective ``u(x) + sum_k p_k u(xi_k - x)`` in the LP variables."""
        d = self.problem.dist
        grid = self.problem.grid
        n = grid.n - 1
        pts = np.concatenate([[x], d.atoms - x])
        w = np.concatenate([[1.0], d.probs])
        seg = grid.segment(pts)
        c = np.zeros(6 * n)
        np.add.at(c, seg, w * pts)
        np.add.at(c, n + seg, w)
        return c

    def utility_from(self, z: np.ndarray) -> PiecewiseLinearUtility:
        grid = self.problem.grid
        n = grid.n - 1
        a, b = z[:n], z[n:2 * n]
        t = grid.breakpoints
        values = np.concatenate([[a[0] * t[0] + b[0]], a * t[1:] + b])
        return PiecewiseLinearUtility(grid, values, self.problem.ball.lipschitz)

    def __call__(self, x: float) -> tuple[PiecewiseLinearUtility, float]:
        sol = self.solver.solve(self.cost(x))
        self.evaluations += 1
        if sol.status is not LpStatus.OPTIMAL:
            raise LpError(f"inner problem at x={x} ended with status {sol.status.value}")
        return self.utility_from(sol.x), sol.objective


def inner_min_lp(x: float, problem: RmoceProblem, kernel: str | None = None):
    """Worst utility in the ball at ``x`` and the objective value it attains."""
    return InnerSolver(problem, kernel=kernel)(x)


# -- outer solvers ---------------------------------------------------------------


def _direct(problem, inner, tol):
    lo, hi = problem.x_domain
    trace = []

    def phi(x):
        v = inner(x)[1]
        trace.append((x, v))
        return v

    if hi - lo <= tol:
        x = 0.5 * (lo + hi)
        return x, phi(x), trace
    xs = np.linspace(lo, hi, N_SCAN)
    vals = [phi(x) for x in xs]
    i = int(np.argmax(vals))
    a, b = xs[max(i - 1, 0)], xs[min(i + 1, N_SCAN - 1)]
    x, v, _ = certainty.golden_section_max(phi, a, b, tol)
    if vals[i] > v:
        x, v = float(xs[i]), vals[i]
    return x, v, trace


def solve_direct(problem: RmoceProblem, tol: float = 1e-7, kernel: str | None = None) -> RmoceSolution:
    """Maximise the concave value function ``phi`` over ``X`` by scan plus golden section."""
    inner = InnerSolver(problem, kernel=kernel)
    x, _, trace = _direct(problem, inner, tol)
    u, v = inner(x)
    return RmoceSolution(v, x, u, inner.evaluations, SolveStatus.CONVERGED, "direct",
                         problem.x_domain, trace)


def solve_alternating(problem: RmoceProblem, x0: float | None = None, tol: float = 1e-7,
                      max_iter: int = 100, kernel: str | None = None,
                      variant: str = "cuts") -> RmoceSolution:
    """Alternate worst-case utilities and best allocations.

    ``variant="classic"`` maximises ``u^s(x) + E u^s(xi - x)`` for the latest
    worst utility only and stops once successive ``x`` and inner values
    differ by at most ``tol``. When the saddle point needs a mixture of
    utilities this sequence cycles, and the best iterate is returned with
    ``MAX_ITER``.

    ``variant="cuts"`` (default) maximises ``min_i u^i(x) + E u^i(xi - x)`` over
    every worst utility found so far. That model overestimates ``phi``, so
    it stops when the model value at the new ``x`` is within ``tol`` of the
    true inner value there. The reported worst utility is the convex
    mixture of the active cuts for which ``x*`` is an optimal allocation.
    """
    if variant not in ("classic", "cuts"):
        raise ValueError(f"unknown variant {variant!r}")
    lo, hi = problem.x_domain
    x = 0.5 * (lo + hi) if x0 is None else float(x0)
    if not lo - 1e-12 <= x <= hi + 1e-12:
        raise ValueError("x0 outside the allocation interval")
    inner = InnerSolver(problem, kernel=kernel)
    u, v = inner(x)
    trace = [(x, v)]
    best = (v, x, u)
    cuts = [u]
    for it in range(1, max_iter + 1):
        if variant == "classic":
            x_new = certainty.moce(problem.dist, u, bracket=problem.x_domain).x_star
        else:
            x_new, model = _best_against(problem, cuts, tol)
        u_new, v_new = inner(x_new)
        trace.append((x_new, v_new))
        if v_new > best[0]:
            best = (v_new, x_new, u_new)
        if variant == "classic":
            done = abs(x_new - x) <= tol and abs(v_new - v) <= tol
            worst = u_new
        else:
            cuts.append(u_new)
            done = model - v_new <= tol
            worst = saddle_mixture(problem, x_new, cuts) if done else u_new
        if done:
            return RmoceSolution(v_new, x_new, worst, it, SolveStatus.CONVERGED, "alternating",
                                 problem.x_domain, trace)
        x, u, v = x_new, u_new, v_new
    v, x, u = best
    return RmoceSolution(v, x, u, max_iter, SolveStatus.MAX_ITER, "alternating",
                         problem.x_domain, trace)


def _cut_values(problem, cuts, x):
    return np.array([problem.objective(x, u) for u in cuts])


def _best_against(problem, cuts, tol):
    """``argmax_x min_i F(x, u^i)`` over ``X`` and the model value there."""
    lo, hi = problem.x_domain

    def model(x):
        return float(_cut_values(problem, cuts, x).min())

    xs = np.linspace(lo, hi, N_SCAN)
    vals = [model(x) for x in xs]
    i = int(np.argmax(vals))
    a, b = xs[max(i - 1, 0)], xs[min(i + 1, N_SCAN - 1)]
    x, m, _ = certainty.golden_section_max(model, a, b, min(tol, 1e-9) * max(1.0, hi - lo))
    if vals[i] > m:
        x, m = float(xs[i]), vals[i]
    return x, m


def saddle_mixture(problem: RmoceProblem, x: float, cuts, active_tol: float = 1e-6
                   ) -> PiecewiseLinearUtility:
    """Convex mixture of near-active cuts against which ``x`` is an optimal allocation.

    Weights are chosen so that the mixed objective's right slope at ``x`` is
    at most zero and its left slope at least zero (only the side inside
    ``X`` counts). The mixture stays in the ball because the ball is convex.
    """
    vals = _cut_values(problem, cuts, x)
    active = [c for c, f in zip(cuts, vals) if f <= vals.min() + active_tol]
    if len(active) == 1:
        return active[0]
    lo, hi = problem.x_domain
    h = 1e-7 * max(1.0, hi - lo)
    f0 = _cut_values(problem, active, x)
    right = (_cut_values(problem, active, min(x + h, hi)) - f0) / h if x + h <= hi else None
    left = (f0 - _cut_values(problem, active, max(x - h, lo))) / h if x - h >= lo else None
    m = len(active)
    # variables [theta (m), s]; minimise the worst slope violation s
    A_le, b_le = [], []
    if right is not None:
        A_le.append(np.concatenate([right, [-1.0]]))
        b_le.append(0.0)
    if left is not None:
        A_le.append(np.concatenate([-left, [-1.0]]))
        b_le.append(0.0)
    lp = LinearProgram(np.concatenate([np.zeros(m), [1.0]]),
                       A_eq=np.concatenate([np.ones(m), [0.0]])[None, :], b_eq=np.array([1.0]),
                       A_le=np.array(A_le), b_le=np.array(b_le),
                       lower=np.zeros(m + 1), upper=np.full(m + 1, np.inf), sense="min")
    sol = lp_solve(lp)
    theta = np.clip(sol.x[:m], 0.0, None)
    theta /= theta.sum()
    values = sum(w * u.values for w, u in zip(theta, active))
    return PiecewiseLinearUtility(problem.grid, values, problem.ball.lipschitz)


def lp_ball_distance(u: PiecewiseLinearUtility, center: PiecewiseLinearUtility) -> float:
    """Distance as measured by the ball constraint of the inner problem.

    This is the distance LP without crossing refinement. It is never below the
    exact distance, so the inner problem's ball sits inside the exact ball.
    """
    from .kantorovich import distance_dual_lp
    return distance_dual_lp(u, center, refine=False)


def random_ball_member(ball: KantorovichBall, rng: np.random.Generator) -> PiecewiseLinearUtility:
    """A random admissible utility feasible for the inner problem's ball constraint."""
    grid, c = ball.grid, ball.center
    s = np.sort(rng.random(grid.n - 1))[::-1] + 1e-3
    s = s / (s @ grid.steps)
    over = s > ball.lipschitz
    lam = 1.0
    if np.any(over):
        lam = float(np.min((ball.lipschitz - c.slopes[over]) / (s[over] - c.slopes[over])))
    direction = lam * (s - c.slopes)
    dist = lp_ball_distance(PiecewiseLinearUtility.from_slopes(grid, c.slopes + direction, ball.lipschitz), c)
    scale = rng.random() * (min(1.0, ball.radius / dist) if dist > 0 else 1.0)
    return PiecewiseLinearUtility.from_slopes(grid, c.slopes + scale * direction, ball.lipschitz)


def saddle_violations(problem: RmoceProblem, sol: RmoceSolution, n_x: int = 50, n_u: int = 20,
                      seed: int = 0) -> tuple[float, float]:
    """Largest breach of the two saddle inequalities at ``(x*, u*)``.

    Returns ``(max_x F(x, u*) - F(x*, u*), F(x*, u*) - min_u F(x*, u))`` over
    random probes ``x`` in ``X`` and random ball members ``u``.
    """
    rng = np.random.default_rng(seed)
    u_star, x_star = sol.worst_utility, sol.x_star
    f_star = problem.objective(x_star, u_star)
    xs = rng.uniform(*problem.x_domain, n_x)
    gap_x = max(problem.objective(x, u_star) for x in xs) - f_star
    members = [random_ball_member(problem.ball, rng) for _ in range(n_u)]
    # mixtures with u* probe the neighbourhood of the minimiser; the ball is convex
    for i in range(0, n_u, 2):
        w = rng.random()
        members[i] = PiecewiseLinearUtility(problem.grid, w * members[i].values + (1 - w) * u_star.values,
                                            problem.ball.lipschitz)
    gap_u = f_star - min(problem.objective(x_star, u) for u in members)
    return float(gap_x), float(gap_u)


# -- construction helpers and reporting ----------------------------------------------


def error_bound(L: float, grid: Grid) -> float:
    """``10 max(2, L) * mesh``: bound on the gap between the grid and continuous robust values."""
    return 10.0 * max(2.0, L) * grid.mesh


def truncate_domain(spec: DistributionSpec | None, samples, eps: float | None = None,
                    x_domain: tuple[float, float] | None = None) -> tuple[float, float]:
    """Utility domain ``[a, b]`` covering every ``x`` in ``X`` and every ``xi - x``.

    ``X`` defaults to the piecewise-linear MOCE bracket of the samples. With
    ``spec`` and ``eps`` given, ``b`` is widened so the law puts mass below
    ``eps`` above ``b - x_lo`` (and likewise on the left).
    """
    xi = np.asarray(samples, dtype=float)
    lo_s, hi_s = float(xi.min()), float(xi.max())
    if x_domain is None:
        x_domain = certainty.moce_bracket(DiscreteDistribution.from_samples(xi), None)
    xl, xu = x_domain
    a = min(xl, lo_s - xu)
    b = max(xu, hi_s - xl)
    if eps is not None:
        if not eps > 0:
            raise ValueError("eps must be positive")
        if spec is not None:
            q_lo, q_hi = spec.ppf([eps / 2.0, 1.0 - eps / 2.0])
            a = min(a, float(q_lo) - xu)
            b = max(b, float(q_hi) - xl)
    return float(a), float(b)


def build_problem(dist: DiscreteDistribution, center_utility, N: int, L: float, radius: float,
                  x_domain: tuple[float, float] | None = None,
                  domain: tuple[float, float] | None = None) -> RmoceProblem:
    """Project ``center_utility`` on a uniform ``N``-point grid covering the problem."""
    if x_domain is None:
        x_domain = certainty.moce_bracket(dist, None)
    if domain is None:
        domain = truncate_domain(None, dist.atoms, x_domain=x_domain)
    grid = uniform_grid(domain[0], domain[1], N)
    center = project_to_grid(center_utility, grid, lipschitz=L)
    return RmoceProblem(dist, KantorovichBall(center, radius), x_domain)


@dataclass(frozen=True)
class SweepPoint:
    radius: float
    value: float
    x_star: float
    worst_utility: PiecewiseLinearUtility


def radius_sweep(problem: RmoceProblem, radii, method: str = "direct", **kw) -> list[SweepPoint]:
    """One robust solve per radius, in the given order."""
    solver = {"direct": solve_direct, "alternating": solve_alternating}[method]
    out = []
    for r in radii:
        if r < 0:
            raise ValueError("radii must be non-negative")
        sol = solver(problem.with_radius(float(r)), **kw)
        out.append(SweepPoint(float(r), sol.value, sol.x_star, sol.worst_utility))
    return out
