"""Certainty equivalents of a single utility: OCE, MOCE, CVaR and utility recovery.

Both objectives are concave in the allocation ``x``:

* MOCE  ``x -> u(x) + E u(xi - x)``
* OCE   ``x -> x + E u(xi - x)``

so a golden-section search on a bracket finds the maximum. For utilities
with a finite set of kinks the objective is piecewise linear, its maximum
sits on a kink, and an exact search over kink candidates replaces the
golden-section answer. A flat optimum is reported by the midpoint of the
maximising interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .distributions import DiscreteDistribution
from .utility import DomainError, Exponential, cvar_utility

GOLDEN_TOL = 1e-9
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


class NoInteriorOptimum(RuntimeError):
    """The OCE objective keeps increasing however far the bracket is widened."""


@dataclass(frozen=True)
class CeResult:
    value: float
    x_star: float
    bracket: tuple[float, float]
    evaluations: int


def golden_section_max(f: Callable[[float], float], lo: float, hi: float,
                       tol: float = GOLDEN_TOL) -> tuple[float, float, int]:
    """Maximise a unimodal ``f`` on ``[lo, hi]``; returns ``(x, f(x), evaluations)``.

    The search stops once the interval is narrower than ``tol`` and reports
    the best of the final midpoint and the two interior probes.
    """
    if hi < lo:
        raise ValueError("empty bracket")
    if hi - lo <= tol:
        x = 0.5 * (lo + hi)
        return x, f(x), 1
    c = hi - _INVPHI * (hi - lo)
    d = lo + _INVPHI * (hi - lo)
    fc, fd = f(c), f(d)
    n = 2
    while hi - lo > tol:
        if fc >= fd:
            hi, d, fd = d, c, fc
            c = hi - _INVPHI * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _INVPHI * (hi - lo)
            fd = f(d)
        n += 1
    x = 0.5 * (lo + hi)
    fx = f(x)
    n += 1
    best = max((fx, x), (fc, c), (fd, d))
    return best[1], best[0], n


def _plateau_max(f, cands: np.ndarray, scale: float):
    """Exact maximiser of a concave piecewise-linear ``f`` whose kinks are in ``cands``.

    ``cands`` is sorted and contains every kink inside the bracket plus its
    endpoints. Returns ``(x, fx, evaluations)`` with ``x`` the midpoint of the
    maximising interval.
    """
    eps = 1e-12 * max(1.0, scale)
    cache = {}

    def F(i):
        if i not in cache:
            cache[i] = f(float(cands[i]))
        return cache[i]

    n = cands.size
    if n == 1:
        return float(cands[0]), F(0), 1

    # first i whose forward step no longer rises: the left end of the plateau
    lo, hi = 0, n - 1
    while lo < hi:
        m = (lo + hi) // 2
        if F(m + 1) - F(m) > eps:
            lo = m + 1
        else:
            hi = m
    left = lo
    top = F(left)
    # last i still at the top level
    lo, hi = left, n - 1
    while lo < hi:
        m = (lo + hi + 1) // 2
        if F(m) >= top - eps:
            lo = m
        else:
            hi = m - 1
    right = lo
    x = 0.5 * (cands[left] + cands[right])
    fx = f(float(x))
    return float(x), max(fx, top), len(cache) + 1


def _slope_polish(f, df, x, lo, hi, fx, n):
    """Bisect on the (decreasing) derivative ``df`` around the golden-section point.

    Near a smooth maximum the objective is flat to rounding error over a
    window of width about ``sqrt(eps)``; the sign of the derivative is not.
    """
    w = max(1e-6, 1e-6 * abs(x))
    a, b = max(lo, x - w), min(hi, x + w)
    if not (df(a) >= 0.0 >= df(b)):
        return x, fx, n
    for _ in range(60):
        m = 0.5 * (a + b)
        if df(m) > 0.0:
            a = m
        else:
            b = m
        n += 1
        if b - a <= 4e-16 * max(1.0, abs(m)):
            break
    xm = 0.5 * (a + b)
    fm = f(xm)
    return (xm, fm, n + 1) if fm >= fx - 1e-15 * max(1.0, abs(fx)) else (x, fx, n + 1)


def _maximise(f, lo, hi, kinks_of_f, tol, df=None):
    x, fx, n = golden_section_max(f, lo, hi, tol)
    if kinks_of_f is None:
        if df is not None:
            return _slope_polish(f, df, x, lo, hi, fx, n)
        return x, fx, n
    cands = np.unique(np.concatenate([[lo, hi], kinks_of_f]))
    cands = cands[(cands >= lo) & (cands <= hi)]
    xk, fk, nk = _plateau_max(f, cands, abs(fx))
    if fk >= fx - 1e-12 * max(1.0, abs(fx)):
        return xk, fk, n + nk
    return x, fx, n + nk


def _kinks(u):
    k = getattr(u, "kinks", None)
    return None if k is None else k()


def _domain(u):
    return getattr(u, "domain", (-np.inf, np.inf))


def _check_cover(u, d: DiscreteDistribution, lo, hi, own_x: bool):
    a, b = _domain(u)
    slack = 1e-9 * max(1.0, b - a) if np.isfinite(b - a) else 0.0
    need = [d.min - hi, d.max - lo] + ([lo, hi] if own_x else [])
    if min(need) < a - slack or max(need) > b + slack:
        raise DomainError(f"utility domain [{a}, {b}] does not cover "
                          f"[{min(need)}, {max(need)}] needed on bracket [{lo}, {hi}]")


def moce_bracket(d: DiscreteDistribution, u) -> tuple[float, float]:
    """Interval known to contain a MOCE maximiser.

    Strictly concave ``u``: ``[min/2, max/2]`` of the support. Otherwise the
    support itself, with the side that excludes zero replaced by zero.
    """
    lo, hi = d.min, d.max
    if getattr(u, "strictly_concave", False):
        return lo / 2.0, hi / 2.0
    if lo >= 0:
        return 0.0, hi
    if hi <= 0:
        return lo, 0.0
    return lo, hi


def moce_objective(d: DiscreteDistribution, u) -> Callable[[float], float]:
    atoms, probs = d.atoms, d.probs

    def f(x):
        return float(u(x)) + float(probs @ u(atoms - x))
    return f


def oce_objective(d: DiscreteDistribution, u) -> Callable[[float], float]:
    atoms, probs = d.atoms, d.probs

    def f(x):
        return x + float(probs @ u(atoms - x))
    return f


def moce(d: DiscreteDistribution, u, bracket: tuple[float, float] | None = None,
         tol: float = GOLDEN_TOL) -> CeResult:
    """``sup_x u(x) + E u(xi - x)`` on ``bracket`` (default :func:`moce_bracket`)."""
    lo, hi = bracket if bracket is not None else moce_bracket(d, u)
    _check_cover(u, d, lo, hi, own_x=True)
    k = _kinks(u)
    kinks = None if k is None else np.concatenate([k, (d.atoms[:, None] - k[None, :]).ravel()])
    df = None
    if hasattr(u, "derivative") and k is None:
        def df(x):
            return float(u.derivative(x)) - float(d.probs @ u.derivative(d.atoms - x))
    x, v, n = _maximise(moce_objective(d, u), lo, hi, kinks, tol, df)
    return CeResult(v, x, (lo, hi), n)


def _oce_bracket(d, u, f):
    """Widen ``[min, max]`` of the support until the objective turns down at both ends."""
    a, b = _domain(u)
    # feasible x keeps every xi - x inside the utility domain
    xmin, xmax = d.max - b, d.min - a
    lo, hi = max(d.min, xmin), min(d.max, xmax)
    if lo > hi:
        raise DomainError("utility domain too narrow for the support")
    width = max(hi - lo, 1.0)
    for side in (-1, 1):
        for _ in range(64):
            edge = hi if side > 0 else lo
            limit = xmax if side > 0 else xmin
            step = min(width, abs(limit - edge)) if np.isfinite(limit) else width
            if step <= 0:
                break
            probe = edge + side * step
            f_edge, f_probe = f(edge), f(probe)
            # a concave objective that has turned down by the probe peaks before it
            if side > 0:
                hi = probe
            else:
                lo = probe
            if f_probe <= f_edge + 1e-12 * max(1.0, abs(f_edge)):
                break
            width *= 2.0
        else:
            raise NoInteriorOptimum("OCE objective still increasing after widening the bracket")
    if (hi >= xmax and f(hi) > f(hi - 1e-6 * width) + 1e-12) or (
            lo <= xmin and f(lo) > f(lo + 1e-6 * width) + 1e-12):
        raise NoInteriorOptimum("OCE objective increases up to the edge of the utility domain")
    return lo, hi


def oce(d: DiscreteDistribution, u, bracket: tuple[float, float] | None = None,
        tol: float = GOLDEN_TOL) -> CeResult:
    """``sup_x x + E u(xi - x)``.

    Raises :class:`NoInteriorOptimum` when the objective has no maximiser,
    which happens when the utility's slope never reaches one.
    """
    f = oce_objective(d, u)
    lo, hi = bracket if bracket is not None else _oce_bracket(d, u, f)
    _check_cover(u, d, lo, hi, own_x=False)
    k = _kinks(u)
    kinks = None if k is None else (d.atoms[:, None] - k[None, :]).ravel()
    df = None
    if hasattr(u, "derivative") and k is None:
        def df(x):
            return 1.0 - float(d.probs @ u.derivative(d.atoms - x))
    x, v, n = _maximise(f, lo, hi, kinks, tol, df)
    return CeResult(v, x, (lo, hi), n)


def moce_exponential_closed_form(d: DiscreteDistribution, alpha: float, scale: float = 1.0) -> CeResult:
    """MOCE of ``scale * (1 - exp(-alpha t))`` without any search."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    # log E exp(-alpha xi), shifted by the smallest atom to avoid overflow
    m = -alpha * d.min + math.log(float(d.probs @ np.exp(-alpha * (d.atoms - d.min))))
    x = -m / (2.0 * alpha)
    value = 2.0 * scale * -math.expm1(-alpha * x)
    return CeResult(value, x, (x, x), 0)


def cvar(d: DiscreteDistribution, alpha: float) -> float:
    """CVaR at level ``alpha`` of the loss ``-xi``: the mean of its worst ``alpha`` tail.

    Minimises ``eta + E(-xi - eta)_+ / alpha`` over the loss atoms, where the
    convex piecewise-linear objective attains its minimum.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    loss = -d.atoms
    excess = np.maximum(loss[None, :] - loss[:, None], 0.0) @ d.probs
    return float(np.min(loss + excess / alpha))


def cvar_via_oce(d: DiscreteDistribution, alpha: float) -> float:
    """``-S_u(xi)`` with ``u(t) = -(-t)_+ / alpha``."""
    return -oce(d, cvar_utility(alpha)).value


def recover_utility(u, z: float, p_list, oracle: Callable[[float, float], float] | None = None):
    """Estimate ``u(z)`` as ``M[z, p] / p`` for small ``p``.

    ``M[z, p]`` is the MOCE of the two-point income paying ``z`` with
    probability ``p`` and 0 otherwise. Returns ``(estimate, trace)`` where
    ``trace`` lists ``(p, M[z, p] / p)`` in the order of ``p_list`` and the
    estimate uses the smallest ``p``.
    """
    if z <= 0:
        raise ValueError("z must be positive")
    if oracle is None:
        def oracle(z, p):
            two_point = DiscreteDistribution([0.0, z], [1.0 - p, p])
            return moce(two_point, u, bracket=(0.0, z / 2.0)).value
    trace = [(float(p), oracle(z, p) / p) for p in p_list]
    p_min = min(p_list)
    est = next(r for p, r in trace if p == p_min)
    return est, trace


def exponential_moce(d: DiscreteDistribution, u: Exponential) -> CeResult:
    """Closed form for an :class:`Exponential` utility including its shift."""
    r = moce_exponential_closed_form(d, u.alpha, u.scale)
    return CeResult(r.value + 2.0 * u.shift, r.x_star, r.bracket, 0)
