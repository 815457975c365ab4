"""Dense linear programs and a bounded-variable primal simplex solver.

The solver converts a :class:`LinearProgram` to the standard form
``min c.x  s.t.  A x = b,  0 <= x <= u`` and runs a two-phase simplex on a
dense tableau. Pricing is largest-coefficient with a switch to Bland's rule
after a run of degenerate steps, so the vertex path is deterministic.

A :class:`SimplexSolver` keeps its final tableau: problems that differ only in
the objective (the inner problem of the robust MOCE at successive ``x``) are
re-solved from the previous optimal basis without a new phase 1.
"""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import _kernel_py

try:
    if os.environ.get("ROBUST_OCE_PURE_PYTHON"):
        raise ImportError("compiled kernel disabled by environment")
    from . import _kernel as _kernel_c
except ImportError:  # pragma: no cover - depends on the build
    _kernel_c = None

KERNELS = {"python": _kernel_py}
if _kernel_c is not None:
    KERNELS["cython"] = _kernel_c
DEFAULT_KERNEL = "cython" if _kernel_c is not None else "python"

FEAS_TOL = 1e-9
OPT_TOL = 1e-9
REPORT_TOL = 1e-8
# warm solves between full tableau rebuilds
REFRESH_EVERY = 25
# pivots between reinversions inside one run
REINVERT_EVERY = 1000
# smallest entry accepted when pivoting a zero-level artificial out of the basis
DRIVE_OUT_TOL = 1e-7


class LpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"


class LpError(RuntimeError):
    """Raised by callers that require an optimal solution and did not get one."""


@dataclass
class LinearProgram:
    """``min`` or ``max`` of ``c.x`` subject to equality rows, ``<=`` rows and bounds.

    Missing constraint blocks may be left as ``None``. ``lower``/``upper``
    default to ``0`` and ``+inf``; use ``-np.inf`` for free variables.
    """

    c: np.ndarray
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    A_le: np.ndarray | None = None
    b_le: np.ndarray | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    sense: str = "min"

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float).ravel()
        n = self.c.size
        if self.sense not in ("min", "max"):
            raise ValueError(f"sense must be 'min' or 'max', got {self.sense!r}")
        self.A_eq, self.b_eq = _block(self.A_eq, self.b_eq, n, "eq")
        self.A_le, self.b_le = _block(self.A_le, self.b_le, n, "le")
        self.lower = np.zeros(n) if self.lower is None else np.asarray(self.lower, dtype=float).ravel()
        self.upper = np.full(n, np.inf) if self.upper is None else np.asarray(self.upper, dtype=float).ravel()
        if self.lower.size != n or self.upper.size != n:
            raise ValueError("bounds must have one entry per variable")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")
        if np.any(self.lower == np.inf) or np.any(self.upper == -np.inf):
            raise ValueError("bounds must allow a finite value")
        for arr in (self.c, self.A_eq, self.b_eq, self.A_le, self.b_le):
            if not np.all(np.isfinite(arr)):
                raise ValueError("LP coefficients must be finite")

    @property
    def n_vars(self) -> int:
        return self.c.size

    def residual(self, x: np.ndarray) -> float:
        """Largest constraint or bound violation at ``x``, scaled by ``1 + |rhs|``."""
        viol = [0.0]
        if self.b_eq.size:
            viol.append(np.max(np.abs(self.A_eq @ x - self.b_eq) / (1 + np.abs(self.b_eq))))
        if self.b_le.size:
            viol.append(np.max(np.maximum(self.A_le @ x - self.b_le, 0) / (1 + np.abs(self.b_le))))
        viol.append(np.max(np.maximum(self.lower - x, 0), initial=0.0))
        viol.append(np.max(np.maximum(x - self.upper, 0), initial=0.0))
        return float(max(viol))

    def dump(self) -> str:
        """Fixed-layout text rendering for debugging: objective row, then constraint rows."""
        fmt = lambda v: " ".join(f"{x: .10g}" for x in v)  # noqa: E731
        lines = [f"{self.sense.upper()} {fmt(self.c)}"]
        for row, rhs in zip(self.A_eq, self.b_eq):
            lines.append(f"EQ {fmt(row)} = {rhs:.10g}")
        for row, rhs in zip(self.A_le, self.b_le):
            lines.append(f"LE {fmt(row)} <= {rhs:.10g}")
        for j, (lo, hi) in enumerate(zip(self.lower, self.upper)):
            lines.append(f"BOUND x{j} {lo:.10g} {hi:.10g}")
        return "\n".join(lines) + "\n"


def _block(A, b, n, name):
    if A is None:
        return np.zeros((0, n)), np.zeros(0)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    if A.shape[1] != n or A.shape[0] != b.size:
        raise ValueError(f"A_{name} has shape {A.shape}, expected ({b.size}, {n})")
    return A, b


@dataclass
class LpSolution:
    status: LpStatus
    x: np.ndarray | None = None
    objective: float = float("nan")
    iterations: int = 0
    residual: float = float("nan")
    kernel: str = ""

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


@dataclass
class _StandardForm:
    A: np.ndarray  # rows x structural+slack columns
    b: np.ndarray
    upper: np.ndarray
    map_matrix: np.ndarray  # original vars = offset + map_matrix @ x_std[:n_struct]
    offset: np.ndarray
    n_struct: int
    slack_rows: dict = field(default_factory=dict)  # row -> slack column usable as initial basis


def _standard_form(lp: LinearProgram) -> _StandardForm:
    n = lp.n_vars
    cols = []
    upper = []
    offset = np.zeros(n)
    for j in range(n):
        lo, hi = lp.lower[j], lp.upper[j]
        if np.isfinite(lo):
            offset[j] = lo
            cols.append((j, 1.0))
            upper.append(hi - lo)
        elif np.isfinite(hi):
            offset[j] = hi
            cols.append((j, -1.0))
            upper.append(np.inf)
        else:
            cols.append((j, 1.0))
            upper.append(np.inf)
            cols.append((j, -1.0))
            upper.append(np.inf)
    n_struct = len(cols)
    M = np.zeros((n, n_struct))
    for k, (j, s) in enumerate(cols):
        M[j, k] = s

    A_orig = np.vstack([lp.A_eq, lp.A_le])
    b_orig = np.concatenate([lp.b_eq, lp.b_le]) - A_orig @ offset
    n_eq, n_le = lp.b_eq.size, lp.b_le.size
    m = n_eq + n_le
    A = np.zeros((m, n_struct + n_le))
    A[:, :n_struct] = A_orig @ M
    for i in range(n_le):
        A[n_eq + i, n_struct + i] = 1.0
    upper = np.concatenate([upper, np.full(n_le, np.inf)])

    slack_rows = {}
    for i in range(m):
        if b_orig[i] < 0:
            A[i] = -A[i]
            b_orig[i] = -b_orig[i]
        elif i >= n_eq:
            slack_rows[i] = n_struct + (i - n_eq)
    return _StandardForm(A, b_orig, upper, M, offset, n_struct, slack_rows)


def _reinvert(A, b, T, beta, basis, at_upper, in_basis, upper, cost, full=True):
    """Recompute basic values (and the tableau if ``full``) from ``A``; return reduced costs.

    The tableau rebuild costs far more than the factorisation itself and is
    only needed once round-off has piled up.
    """
    if A.shape[0] == 0:
        return cost.copy()
    lu = scipy.linalg.lu_factor(A[:, basis], check_finite=False)
    if not np.all(np.abs(np.diag(lu[0])) > 0.0):
        raise LpError("basis matrix became singular")
    xn = np.where(at_upper == 1, upper, 0.0)
    xn[in_basis == 1] = 0.0
    beta[:] = scipy.linalg.lu_solve(lu, b - A @ xn)
    if full:
        T[:] = scipy.linalg.lu_solve(lu, A)
    y = scipy.linalg.lu_solve(lu, cost[basis], trans=1)
    d = cost - y @ A
    d[basis] = 0.0
    return np.ascontiguousarray(d)


class SimplexSolver:
    """Two-phase dense simplex bound to one constraint set.

    ``solve()`` optimises the LP's own objective; ``solve(c)`` swaps in a new
    objective (same sense, same variable order) and warm-starts from the
    last optimal basis.
    """

    def __init__(self, lp: LinearProgram, kernel: str | None = None,
                 max_iter: int = 200_000, bland_after: int = 50):
        self.lp = lp
        self.kernel_name = kernel or DEFAULT_KERNEL
        if self.kernel_name not in KERNELS:
            raise ValueError(f"unknown kernel {self.kernel_name!r}; available: {sorted(KERNELS)}")
        self._k = KERNELS[self.kernel_name]
        self.max_iter = max_iter
        self.bland_after = bland_after
        self._sf = _standard_form(lp)
        self._feasible: bool | None = None
        self.iterations = 0
        self._warm_solves = 0
        self._phase1()

    # -- setup -----------------------------------------------------------------
    def _phase1(self):
        sf = self._sf
        m, ncol = sf.A.shape
        art_rows = [i for i in range(m) if i not in sf.slack_rows]
        n_art = len(art_rows)
        T = np.zeros((m, ncol + n_art))
        T[:, :ncol] = sf.A
        basis = np.empty(m, dtype=np.int64)
        for i, col in sf.slack_rows.items():
            basis[i] = col
        for k, i in enumerate(art_rows):
            T[i, ncol + k] = 1.0
            basis[i] = ncol + k
        upper = np.concatenate([sf.upper, np.full(n_art, np.inf)])
        beta = sf.b.copy()
        cost = np.concatenate([np.zeros(ncol), np.ones(n_art)])
        d = cost - cost[basis] @ T
        at_upper = np.zeros(ncol + n_art, dtype=np.int8)
        in_basis = np.zeros(ncol + n_art, dtype=np.int8)
        in_basis[basis] = 1

        A_full = np.hstack([sf.A, np.eye(m)[:, art_rows]]) if n_art else sf.A
        status, d = self._drive(A_full, sf.b, T, beta, d, upper, basis, at_upper, in_basis, cost)
        if status != _kernel_py.STATUS_OPTIMAL:
            # phase 1 is bounded below by zero; only the iteration cap can stop it
            self._feasible = None
            self._phase1_status = LpStatus.ITERATION_LIMIT
            return
        infeas = float(np.sum(beta[basis >= ncol]))
        if infeas > FEAS_TOL * (1.0 + np.max(np.abs(sf.b), initial=0.0)):
            self._feasible = False
            return

        # drive zero-level artificials out of the basis; drop redundant rows
        # A basic artificial may sit in any tableau row; the redundant constraint
        # is the one that artificial belongs to, not the tableau row index.
        keep_rows = np.ones(m, dtype=bool)
        keep_cons = np.ones(m, dtype=bool)
        for r in range(m):
            if basis[r] < ncol:
                continue
            row = np.abs(T[r, :ncol]) * (in_basis[:ncol] == 0)
            q = int(np.argmax(row)) if row.size else -1
            if q >= 0 and row[q] > DRIVE_OUT_TOL:
                in_basis[basis[r]] = 0
                self._k.pivot(T, d, r, q)
                basis[r] = q
                in_basis[q] = 1
                beta[r] = sf.upper[q] if at_upper[q] else 0.0
                at_upper[q] = 0
            else:
                keep_rows[r] = False
                keep_cons[art_rows[basis[r] - ncol]] = False
        T = np.ascontiguousarray(T[keep_rows][:, :ncol])
        self._A = sf.A[keep_cons]
        self._b = sf.b[keep_cons]
        self._T = T
        self._beta = np.ascontiguousarray(beta[keep_rows])
        self._basis = np.ascontiguousarray(basis[keep_rows])
        self._upper = sf.upper.copy()
        self._at_upper = np.ascontiguousarray(at_upper[:ncol])
        self._in_basis = np.ascontiguousarray(in_basis[:ncol])
        self._feasible = True

    def _drive(self, A, b, T, beta, d, upper, basis, at_upper, in_basis, cost):
        """Run the kernel in chunks, reinverting the basis between chunks.

        An unbounded verdict is only trusted if it survives a fresh tableau,
        since drift in a long degenerate run can hide a blocking row.
        Returns ``(status, reduced costs)``.
        """
        budget = self.max_iter
        rechecked = False
        while True:
            status, it = self._k.run_simplex(T, beta, d, upper, basis, at_upper, in_basis,
                                             min(budget, REINVERT_EVERY), OPT_TOL, self.bland_after)
            self.iterations += it
            budget -= it
            if status == _kernel_py.STATUS_OPTIMAL:
                return status, d
            if status == _kernel_py.STATUS_UNBOUNDED:
                if rechecked and it == 0:
                    return status, d
                rechecked = True
            else:
                rechecked = False
            if budget <= 0:
                return _kernel_py.STATUS_ITERATION_LIMIT, d
            d = _reinvert(A, b, T, beta, basis, at_upper, in_basis, upper, cost)
            np.clip(beta, 0.0, upper[basis], out=beta)

    def _std_cost(self, c):
        c = np.asarray(c, dtype=float).ravel()
        if c.size != self.lp.n_vars:
            raise ValueError("objective length does not match the LP")
        sign = -1.0 if self.lp.sense == "max" else 1.0
        cs = np.zeros(self._T.shape[1])
        cs[: self._sf.n_struct] = sign * (c @ self._sf.map_matrix)
        return c, cs

    def _refactor(self, cs, full: bool = True):
        if full:
            self._warm_solves = 0
        return _reinvert(self._A, self._b, self._T, self._beta, self._basis, self._at_upper,
                         self._in_basis, self._upper, cs, full)

    def _certified(self, d) -> bool:
        score = np.where(self._at_upper == 1, d, -d)
        score[self._in_basis == 1] = 0.0
        return bool(np.all(score <= OPT_TOL) and np.all(self._beta >= -FEAS_TOL)
                    and np.all(self._beta <= self._upper[self._basis] + FEAS_TOL))

    # -- public ----------------------------------------------------------------
    def solve(self, c=None) -> LpSolution:
        if self._feasible is None:
            return LpSolution(LpStatus.ITERATION_LIMIT, iterations=self.iterations, kernel=self.kernel_name)
        if not self._feasible:
            return LpSolution(LpStatus.INFEASIBLE, iterations=self.iterations, kernel=self.kernel_name)
        c, cs = self._std_cost(self.lp.c if c is None else c)
        d = np.ascontiguousarray(cs - cs[self._basis] @ self._T)
        d[self._basis] = 0.0
        start = self.iterations
        self._warm_solves += 1
        for attempt in range(3):
            status, d = self._drive(self._A, self._b, self._T, self._beta, d, self._upper,
                                    self._basis, self._at_upper, self._in_basis, cs)
            if status == _kernel_py.STATUS_UNBOUNDED:
                return LpSolution(LpStatus.UNBOUNDED, iterations=self.iterations - start,
                                  kernel=self.kernel_name)
            if status == _kernel_py.STATUS_ITERATION_LIMIT:
                return LpSolution(LpStatus.ITERATION_LIMIT, iterations=self.iterations - start,
                                  kernel=self.kernel_name)
            # confirm optimality and feasibility from a fresh factorisation of the basis
            d = self._refactor(cs, full=self._warm_solves > REFRESH_EVERY)
            if self._certified(d):
                break
            d = self._refactor(cs, full=True)
            if self._certified(d):
                break
            np.clip(self._beta, 0.0, self._upper[self._basis], out=self._beta)
        x = self._primal()
        return LpSolution(LpStatus.OPTIMAL, x=x, objective=float(c @ x),
                          iterations=self.iterations - start,
                          residual=self.lp.residual(x), kernel=self.kernel_name)

    def _primal(self):
        xs = np.where(self._at_upper == 1, self._upper, 0.0)
        xs[self._basis] = self._beta
        sf = self._sf
        return sf.offset + sf.map_matrix @ xs[: sf.n_struct]


def solve(lp: LinearProgram, kernel: str | None = None, **kw) -> LpSolution:
    """Solve ``lp`` from scratch."""
    return SimplexSolver(lp, kernel=kernel, **kw).solve()
