"""Kantorovich distance between two piecewise-linear utilities on a shared grid.

Three routes are provided:

* :func:`distance_primal_lp` - maximise ``sum_j (s_j - s0_j) y_j`` over segment
  integrals ``y_j`` and node values ``z_j`` of a 1-Lipschitz test function;
* :func:`distance_dual_lp` - the Lagrange dual of that program over
  multipliers ``lam[i, j] <= 0``;
* :func:`distance_closed_form` - the exact ``integral |u - v|``, valid because
  both utilities are normalised (``du - dv`` has zero total mass).

The segment-wise calmness constraints of the LP only describe the test
function at the grid nodes, so on a segment where ``u - v`` changes sign the
LP value exceeds the true distance. With ``refine=True`` (the default) the
sign-change points are first inserted as extra breakpoints, after which all
three routes agree. ``refine=False`` gives the plain on-grid LP, which is the
form used as the ball constraint inside the robust MOCE inner problem.
"""

from __future__ import annotations

import numpy as np

from .lp import LinearProgram, LpError, solve
from .utility import Grid, PiecewiseLinearUtility


def _check(u: PiecewiseLinearUtility, v: PiecewiseLinearUtility):
    if u.grid != v.grid:
        raise ValueError("utilities must share the same grid")


def refine_at_crossings(u: PiecewiseLinearUtility, v: PiecewiseLinearUtility):
    """Insert the interior zeros of ``u - v`` as breakpoints of both utilities."""
    _check(u, v)
    t = u.grid.breakpoints
    D = u.values - v.values
    d0, d1 = D[:-1], D[1:]
    cross = np.flatnonzero(d0 * d1 < 0)
    if cross.size == 0:
        return u, v
    roots = t[cross] + (t[cross + 1] - t[cross]) * np.abs(d0[cross]) / (np.abs(d0[cross]) + np.abs(d1[cross]))
    # a root numerically on top of a node adds nothing
    roots = roots[(roots > t[cross]) & (roots < t[cross + 1])]
    grid = Grid(np.union1d(t, roots))
    return (PiecewiseLinearUtility(grid, u(grid.breakpoints), u.lipschitz),
            PiecewiseLinearUtility(grid, v(grid.breakpoints), v.lipschitz))


def primal_lp(u: PiecewiseLinearUtility, v: PiecewiseLinearUtility) -> LinearProgram:
    """Variables ``[y_1..y_{N-1}, z_1..z_N]``, all free."""
    _check(u, v)
    h = u.grid.steps
    n = h.size
    c = np.concatenate([u.slopes - v.slopes, np.zeros(n + 1)])
    rows, rhs = [], []
    for j in range(n):
        for node in (j, j + 1):
            for sign in (1.0, -1.0):
                r = np.zeros(2 * n + 1)
                r[j] = sign
                r[n + node] = -sign * h[j]
                rows.append(r)
                rhs.append(0.5 * h[j] ** 2)
    return LinearProgram(c, A_le=np.array(rows), b_le=np.array(rhs),
                         lower=np.full(2 * n + 1, -np.inf), upper=np.full(2 * n + 1, np.inf),
                         sense="max")


def dual_constraints(grid: Grid):
    """Equality block of the dual shared with the robust inner problem.

    Returns ``(A_lam, A_mult)`` where the dual feasibility conditions read
    ``(s - s0) + A_mult @ lam = 0`` (one row per segment) and
    ``A_lam @ lam = 0`` (node balance rows), with ``lam`` flattened as
    ``lam[i, j] -> 4 * j + i`` for multiplier family ``i = 0..3`` on segment ``j``.
    """
    h = grid.steps
    n = h.size
    nv = 4 * n
    A_mult = np.zeros((n, nv))
    for j in range(n):
        A_mult[j, 4 * j: 4 * j + 4] = [1.0, -1.0, 1.0, -1.0]
    bal = []
    r = np.zeros(nv)
    r[4 * 0 + 1], r[4 * 0 + 0] = h[0], -h[0]
    bal.append(r)
    for j in range(n - 1):
        r = np.zeros(nv)
        r[4 * (j + 1) + 1] += h[j + 1]
        r[4 * (j + 1) + 0] -= h[j + 1]
        r[4 * j + 3] += h[j]
        r[4 * j + 2] -= h[j]
        bal.append(r)
    r = np.zeros(nv)
    r[4 * (n - 1) + 3], r[4 * (n - 1) + 2] = h[n - 1], -h[n - 1]
    bal.append(r)
    return np.array(bal), A_mult


def dual_cost(grid: Grid) -> np.ndarray:
    """Coefficients of ``-1/2 sum (lam1+lam2+lam3+lam4) h_j^2`` in the flattened layout."""
    return -0.5 * np.repeat(grid.steps ** 2, 4)


def dual_lp(u: PiecewiseLinearUtility, v: PiecewiseLinearUtility) -> LinearProgram:
    _check(u, v)
    A_bal, A_mult = dual_constraints(u.grid)
    nv = A_mult.shape[1]
    A_eq = np.vstack([A_mult, A_bal])
    b_eq = np.concatenate([-(u.slopes - v.slopes), np.zeros(A_bal.shape[0])])
    return LinearProgram(dual_cost(u.grid), A_eq=A_eq, b_eq=b_eq,
                         lower=np.full(nv, -np.inf), upper=np.zeros(nv), sense="min")


def _value(lp: LinearProgram, kernel):
    sol = solve(lp, kernel=kernel)
    if not sol.optimal:
        raise LpError(f"distance LP ended with status {sol.status.value}")
    return max(sol.objective, 0.0)


def distance_primal_lp(u, v, refine: bool = True, kernel: str | None = None) -> float:
    if refine:
        u, v = refine_at_crossings(u, v)
    return _value(primal_lp(u, v), kernel)


def distance_dual_lp(u, v, refine: bool = True, kernel: str | None = None) -> float:
    if refine:
        u, v = refine_at_crossings(u, v)
    return _value(dual_lp(u, v), kernel)


def distance_closed_form(u: PiecewiseLinearUtility, v: PiecewiseLinearUtility) -> float:
    """``integral_a^b |u(t) - v(t)| dt``, split at sign changes."""
    _check(u, v)
    h = u.grid.steps
    D = u.values - v.values
    d0, d1 = D[:-1], D[1:]
    same = d0 * d1 >= 0
    area = np.where(same, 0.5 * h * (np.abs(d0) + np.abs(d1)), 0.0)
    denom = np.abs(d0) + np.abs(d1)
    cross = ~same
    area[cross] = 0.5 * h[cross] * (d0[cross] ** 2 + d1[cross] ** 2) / denom[cross]
    return float(area.sum())
