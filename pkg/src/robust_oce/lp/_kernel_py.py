"""Pure numpy pivot loop, the fallback for the compiled ``_kernel`` module.

Makes the same pricing, ratio-test and tie-breaking choices as the Cython
loop, so both kernels walk the same vertex path.
"""

import numpy as np

STATUS_OPTIMAL = 0
STATUS_UNBOUNDED = 1
STATUS_ITERATION_LIMIT = 2

_TIE = 1e-12


def pivot(T, d, r, q):
    """In-place pivot of tableau ``T`` and reduced-cost row ``d`` on ``(r, q)``."""
    T[r] /= T[r, q]
    T[r, q] = 1.0
    col = T[:, q].copy()
    col[r] = 0.0
    rows = np.flatnonzero(col)
    if rows.size:
        T[rows] -= np.outer(col[rows], T[r])
        T[rows, q] = 0.0
    f = d[q]
    if f != 0.0:
        d -= f * T[r]
        d[q] = 0.0


def run_simplex(T, beta, d, upper, basis, at_upper, in_basis, max_iter, tol,
                bland_after):
    """Bounded-variable primal simplex iterations on a dense tableau.

    All arrays are modified in place.

    T : (m, n) array, current ``B^-1 A``.
    beta : (m,) values of the basic variables.
    d : (n,) reduced costs of the (minimisation) objective.
    upper : (n,) upper bounds (``inf`` allowed); lower bounds are all zero.
    basis : (m,) int64 column index basic in each row.
    at_upper : (n,) int8 flag, nonbasic variable resting at its upper bound.
    in_basis : (n,) int8 flag.
    max_iter : cap on pivots plus bound flips.
    tol : pricing / pivot tolerance.
    bland_after : consecutive degenerate steps before switching from
        largest-coefficient pricing to Bland's lowest-index rule.

    Returns ``(status, iterations)``.
    """
    m, n = T.shape
    it = 0
    degenerate = 0
    while it < max_iter:
        bland = degenerate >= bland_after
        score = np.where(at_upper == 1, d, -d)
        score[in_basis == 1] = 0.0
        eligible = np.flatnonzero(score > tol)
        if eligible.size == 0:
            return STATUS_OPTIMAL, it
        if bland:
            q = int(eligible[0])
        else:
            q = int(eligible[np.argmax(score[eligible])])
        sigma = -1.0 if at_upper[q] else 1.0

        alpha = T[:, q]
        rate = sigma * alpha
        theta = upper[q]
        r = -1
        best_idx = -1
        best_piv = 0.0
        ub = upper[basis]
        for i in np.flatnonzero((rate > tol) | ((rate < -tol) & np.isfinite(ub))):
            a = alpha[i]
            if rate[i] > tol:
                theta_i = max(beta[i], 0.0) / rate[i]
            else:
                theta_i = max(ub[i] - beta[i], 0.0) / (-rate[i])
            if r < 0 or theta_i < theta - _TIE:
                theta, r, best_idx, best_piv = theta_i, i, basis[i], abs(a)
            elif theta_i <= theta + _TIE:
                if bland:
                    if basis[i] < best_idx:
                        theta, r, best_idx, best_piv = min(theta, theta_i), i, basis[i], abs(a)
                elif abs(a) > best_piv:
                    theta, r, best_idx, best_piv = min(theta, theta_i), i, basis[i], abs(a)

        flip = np.isfinite(upper[q]) and (r < 0 or upper[q] <= theta + _TIE)
        if r < 0 and not flip:
            return STATUS_UNBOUNDED, it
        if flip:
            theta = upper[q]
        degenerate = 0 if theta > tol else degenerate + 1

        nz = np.flatnonzero(alpha)
        beta[nz] -= sigma * theta * alpha[nz]

        if flip:
            at_upper[q] = 0 if at_upper[q] else 1
        else:
            val_q = (upper[q] if at_upper[q] else 0.0) + sigma * theta
            j = basis[r]
            in_basis[j] = 0
            at_upper[j] = 1 if sigma * T[r, q] < 0.0 else 0
            basis[r] = q
            in_basis[q] = 1
            at_upper[q] = 0
            beta[r] = val_q
            pivot(T, d, r, q)
        it += 1
    return STATUS_ITERATION_LIMIT, it
