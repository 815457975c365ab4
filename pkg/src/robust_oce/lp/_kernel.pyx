# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled pivot loop for the bounded-variable primal simplex.

Operates in place on a dense tableau. Must stay behaviourally identical to
``_kernel_py.run_simplex``; the test-suite runs both on the same problems.
"""

from libc.math cimport fabs, INFINITY
from libc.stdlib cimport malloc, free

import numpy as np
cimport numpy as cnp

cnp.import_array()

DEF STATUS_OPTIMAL = 0
DEF STATUS_UNBOUNDED = 1
DEF STATUS_ITERATION_LIMIT = 2


cdef void _pivot(double[:, ::1] T, double[::1] d, Py_ssize_t r, Py_ssize_t q) nogil:
    cdef Py_ssize_t m = T.shape[0]
    cdef Py_ssize_t n = T.shape[1]
    cdef Py_ssize_t i, j, k, nnz = 0
    cdef double p = T[r, q]
    cdef double f
    # the pivot row is usually sparse: gather its support once
    cdef Py_ssize_t *nz = <Py_ssize_t *> malloc(n * sizeof(Py_ssize_t))
    for j in range(n):
        if T[r, j] != 0.0:
            T[r, j] /= p
            nz[nnz] = j
            nnz += 1
    T[r, q] = 1.0
    for i in range(m):
        if i == r:
            continue
        f = T[i, q]
        if f != 0.0:
            for k in range(nnz):
                j = nz[k]
                T[i, j] -= f * T[r, j]
            T[i, q] = 0.0
    f = d[q]
    if f != 0.0:
        for k in range(nnz):
            j = nz[k]
            d[j] -= f * T[r, j]
        d[q] = 0.0
    free(nz)


def run_simplex(double[:, ::1] T, double[::1] beta, double[::1] d,
                double[::1] upper, long[::1] basis, signed char[::1] at_upper,
                signed char[::1] in_basis, long max_iter, double tol,
                long bland_after):
    """Iterate until optimal, unbounded or ``max_iter`` pivots/flips.

    Returns ``(status, iterations)``. See ``_kernel_py.run_simplex`` for the
    meaning of every argument.
    """
    cdef Py_ssize_t m = T.shape[0]
    cdef Py_ssize_t n = T.shape[1]
    cdef Py_ssize_t i, j, q, r
    cdef long it = 0
    cdef long degenerate = 0
    cdef bint bland
    cdef double best, score, sigma, rate, theta, theta_i, a, best_piv
    cdef double val_q
    cdef long best_idx
    cdef bint flip
    cdef int status = STATUS_ITERATION_LIMIT

    with nogil:
        while it < max_iter:
            bland = degenerate >= bland_after
            # pricing
            q = -1
            best = 0.0
            for j in range(n):
                if in_basis[j]:
                    continue
                if at_upper[j]:
                    score = d[j]
                else:
                    score = -d[j]
                if score > tol:
                    if bland:
                        q = j
                        break
                    if score > best:
                        best = score
                        q = j
            if q < 0:
                status = STATUS_OPTIMAL
                break
            sigma = -1.0 if at_upper[q] else 1.0

            # ratio test
            theta = upper[q]
            r = -1
            best_idx = -1
            best_piv = 0.0
            for i in range(m):
                a = T[i, q]
                rate = sigma * a
                if rate > tol:
                    theta_i = beta[i]
                    if theta_i < 0.0:
                        theta_i = 0.0
                    theta_i = theta_i / rate
                elif rate < -tol and upper[basis[i]] < INFINITY:
                    theta_i = upper[basis[i]] - beta[i]
                    if theta_i < 0.0:
                        theta_i = 0.0
                    theta_i = theta_i / (-rate)
                else:
                    continue
                if r < 0 or theta_i < theta - 1e-12:
                    theta = theta_i
                    r = i
                    best_idx = basis[i]
                    best_piv = fabs(a)
                elif theta_i <= theta + 1e-12:
                    if bland:
                        if basis[i] < best_idx:
                            theta = theta_i if theta_i < theta else theta
                            r = i
                            best_idx = basis[i]
                            best_piv = fabs(a)
                    elif fabs(a) > best_piv:
                        theta = theta_i if theta_i < theta else theta
                        r = i
                        best_idx = basis[i]
                        best_piv = fabs(a)

            flip = upper[q] < INFINITY and (r < 0 or upper[q] <= theta + 1e-12)
            if r < 0 and not flip:
                status = STATUS_UNBOUNDED
                break
            if flip:
                theta = upper[q]

            if theta > tol:
                degenerate = 0
            else:
                degenerate += 1

            for i in range(m):
                a = T[i, q]
                if a != 0.0:
                    beta[i] -= sigma * theta * a

            if flip:
                at_upper[q] = 0 if at_upper[q] else 1
            else:
                val_q = (upper[q] if at_upper[q] else 0.0) + sigma * theta
                j = basis[r]
                in_basis[j] = 0
                # the leaving variable sits at whichever bound it reached
                if sigma * T[r, q] < 0.0:
                    at_upper[j] = 1
                else:
                    at_upper[j] = 0
                basis[r] = q
                in_basis[q] = 1
                at_upper[q] = 0
                beta[r] = val_q
                _pivot(T, d, r, q)
            it += 1
    return status, it


def pivot(double[:, ::1] T, double[::1] d, Py_ssize_t r, Py_ssize_t q):
    """Single in-place pivot on ``(r, q)`` (used when driving out artificials)."""
    with nogil:
        _pivot(T, d, r, q)
