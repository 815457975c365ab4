"""Utility functions: piecewise-linear utilities on a grid and parametric families.

Every utility is a vectorised callable with two extra attributes used by the
certainty-equivalent solvers:

``strictly_concave``
    whether the 1-D objectives built from it have a unique maximiser;
``kinks()``
    breakpoints of a piecewise-linear utility (``None`` for smooth ones),
    where the exact maximum of a piecewise-linear concave objective lives.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

NORM_TOL = 1e-10


class DomainError(ValueError):
    """A piecewise-linear utility was evaluated outside its grid."""


@dataclass(frozen=True, eq=False)
class Grid:
    breakpoints: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.breakpoints, dtype=float).ravel()
        if t.size < 2:
            raise ValueError("a grid needs at least two breakpoints")
        if not np.all(np.isfinite(t)) or np.any(np.diff(t) <= 0):
            raise ValueError("breakpoints must be finite and strictly increasing")
        t.setflags(write=False)
        object.__setattr__(self, "breakpoints", t)

    @property
    def a(self) -> float:
        return float(self.breakpoints[0])

    @property
    def b(self) -> float:
        return float(self.breakpoints[-1])

    @property
    def n(self) -> int:
        return self.breakpoints.size

    @property
    def steps(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    @property
    def mesh(self) -> float:
        """Largest gap between neighbouring breakpoints."""
        return float(self.steps.max())

    def __eq__(self, other):
        return isinstance(other, Grid) and np.array_equal(self.breakpoints, other.breakpoints)

    def __hash__(self):
        return hash(self.breakpoints.tobytes())

    def segment(self, t) -> np.ndarray:
        """Segment index under the half-open convention: ``[t_1, t_2]``, then ``(t_j, t_{j+1}]``."""
        idx = np.searchsorted(self.breakpoints, t, side="left") - 1
        return np.clip(idx, 0, self.n - 2)


def uniform_grid(a: float, b: float, N: int) -> Grid:
    if not a < b:
        raise ValueError("need a < b")
    if N < 2:
        raise ValueError("need N >= 2")
    t = np.linspace(a, b, N)
    t[0], t[-1] = a, b
    return Grid(t)


@dataclass(frozen=True, eq=False)
class PiecewiseLinearUtility:
    """Continuous piecewise-linear function through ``(t_i, values_i)``.

    Construction only checks shapes; :func:`validate` reports whether the
    function is a normalised, nondecreasing, concave, ``lipschitz``-bounded
    member of the admissible set.
    """

    grid: Grid
    values: np.ndarray
    lipschitz: float = np.inf

    strictly_concave = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        if v.size != self.grid.n:
            raise ValueError("one value per breakpoint required")
        if not np.all(np.isfinite(v)):
            raise ValueError("values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "lipschitz", float(self.lipschitz))

    @classmethod
    def from_slopes(cls, grid: Grid, slopes, lipschitz: float = np.inf) -> PiecewiseLinearUtility:
        values = np.concatenate([[0.0], np.cumsum(np.asarray(slopes, dtype=float) * grid.steps)])
        return cls(grid, values, lipschitz)

    @cached_property
    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / self.grid.steps

    @cached_property
    def intercepts(self) -> np.ndarray:
        return self.values[:-1] - self.slopes * self.grid.breakpoints[:-1]

    @property
    def domain(self) -> tuple[float, float]:
        return self.grid.a, self.grid.b

    def kinks(self) -> np.ndarray:
        return self.grid.breakpoints

    def __eq__(self, other):
        return (isinstance(other, PiecewiseLinearUtility) and self.grid == other.grid
                and np.array_equal(self.values, other.values) and self.lipschitz == other.lipschitz)

    def __hash__(self):
        return hash((self.grid, self.values.tobytes(), self.lipschitz))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        a, b = self.domain
        slack = 1e-9 * max(1.0, b - a)
        if np.any(t < a - slack) or np.any(t > b + slack):
            raise DomainError(f"utility defined on [{a}, {b}], evaluated at "
                              f"[{np.min(t)}, {np.max(t)}]")
        j = self.grid.segment(t)
        return self.slopes[j] * t + self.intercepts[j]

    def sup_distance(self, other: Callable, n_dense: int = 10_001) -> float:
        """Max ``|self - other|`` over a dense uniform grid of the domain."""
        tt = np.linspace(self.grid.a, self.grid.b, n_dense)
        return float(np.max(np.abs(self(tt) - other(tt))))

    def to_dict(self) -> dict:
        return {"breakpoints": self.grid.breakpoints.tolist(), "values": self.values.tolist(),
                "lipschitz": None if np.isinf(self.lipschitz) else self.lipschitz}

    @classmethod
    def from_dict(cls, obj: dict) -> PiecewiseLinearUtility:
        lip = obj.get("lipschitz")
        return cls(Grid(obj["breakpoints"]), obj["values"], np.inf if lip is None else lip)


@dataclass(frozen=True)
class Violation:
    kind: str  # normalization | monotonicity | concavity | lipschitz
    index: int
    magnitude: float


def validate(u: PiecewiseLinearUtility, tol: float = NORM_TOL) -> list[Violation]:
    """Every broken membership condition with its size; empty means admissible."""
    out = []
    if abs(u.values[0]) > tol:
        out.append(Violation("normalization", 0, abs(u.values[0])))
    if abs(u.values[-1] - 1.0) > tol:
        out.append(Violation("normalization", u.grid.n - 1, abs(u.values[-1] - 1.0)))
    s = u.slopes
    for j in np.flatnonzero(s < -tol):
        out.append(Violation("monotonicity", int(j), float(-s[j])))
    rise = np.diff(s)
    for j in np.flatnonzero(rise > tol):
        out.append(Violation("concavity", int(j + 1), float(rise[j])))
    for j in np.flatnonzero(s > u.lipschitz + tol):
        out.append(Violation("lipschitz", int(j), float(s[j] - u.lipschitz)))
    return out


# -- parametric utilities --------------------------------------------------------


@dataclass(frozen=True)
class Exponential:
    """``shift + scale * (1 - exp(-alpha t))``."""

    alpha: float
    scale: float = 1.0
    shift: float = 0.0

    strictly_concave = True
    domain = (-np.inf, np.inf)

    def __post_init__(self):
        if self.alpha <= 0 or self.scale <= 0:
            raise ValueError("Exponential needs alpha > 0 and scale > 0")

    def __call__(self, t):
        return self.shift + self.scale * -np.expm1(-self.alpha * np.asarray(t, dtype=float))

    def derivative(self, t):
        return self.scale * self.alpha * np.exp(-self.alpha * np.asarray(t, dtype=float))

    def kinks(self):
        return None


@dataclass(frozen=True)
class TwoPieceLinear:
    """``gamma1 * max(t, 0) - gamma2 * max(-t, 0)``; ``(0, 1/alpha)`` is the CVaR utility."""

    gamma1: float
    gamma2: float

    strictly_concave = False
    domain = (-np.inf, np.inf)

    def __post_init__(self):
        if not 0 <= self.gamma1 < self.gamma2:
            raise ValueError("TwoPieceLinear needs 0 <= gamma1 < gamma2")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.gamma1 * np.maximum(t, 0.0) - self.gamma2 * np.maximum(-t, 0.0)

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t > 0, self.gamma1, self.gamma2)

    def kinks(self):
        return np.array([0.0])


@dataclass(frozen=True)
class CallableUtility:
    """Wrap an arbitrary vectorised function ``f``."""

    f: Callable = field(compare=False)
    strictly_concave: bool = True
    domain: tuple = (-np.inf, np.inf)
    kink_points: tuple | None = None

    def __call__(self, t):
        return np.asarray(self.f(np.asarray(t, dtype=float)), dtype=float)

    def derivative(self, t, h=1e-7):
        t = np.asarray(t, dtype=float)
        return (self(t + h) - self(t)) / h

    def kinks(self):
        return None if self.kink_points is None else np.asarray(self.kink_points, dtype=float)


def cvar_utility(alpha: float) -> TwoPieceLinear:
    if not 0 < alpha < 1:
        raise ValueError("CVaR level must lie in (0, 1)")
    return TwoPieceLinear(0.0, 1.0 / alpha)


def parse_utility(text: str):
    """``exp:alpha[,scale[,shift]]``, ``pwl:gamma1,gamma2`` or ``cvar:alpha``."""
    kind, _, rest = text.partition(":")
    vals = [float(v) for v in rest.split(",") if v.strip()]
    kind = kind.strip().lower()
    if kind in ("exp", "exponential"):
        return Exponential(*vals)
    if kind in ("pwl", "twopiece"):
        return TwoPieceLinear(*vals)
    if kind == "cvar":
        return cvar_utility(*vals)
    raise ValueError(f"unknown utility {text!r}")


def renormalize(u: Callable, a: float, b: float) -> Callable:
    """Positive affine rescaling with value 0 at ``a`` and 1 at ``b``."""
    ua, ub = float(u(a)), float(u(b))
    if not ub > ua:
        raise ValueError("utility must increase over [a, b] to be renormalised")
    return lambda t: (u(t) - ua) / (ub - ua)


def left_slope(u: Callable, a: float, b: float) -> float:
    """Slope at ``a`` of the renormalised utility: a Lipschitz modulus for concave ``u``."""
    span = float(u(b)) - float(u(a))
    deriv = getattr(u, "derivative", None)
    if deriv is not None:
        return float(deriv(a)) / span
    h = 1e-7 * (b - a)
    return (float(u(a + h)) - float(u(a))) / h / span


def project_to_grid(u: Callable, grid: Grid, lipschitz: float | None = None,
                    renormalise: bool = True) -> PiecewiseLinearUtility:
    """Interpolate ``u`` (renormalised on the grid span) at the breakpoints.

    ``lipschitz`` defaults to the left-endpoint slope of the renormalised
    utility, the smallest valid modulus for a concave ``u``.
    """
    a, b = grid.a, grid.b
    target = renormalize(u, a, b) if renormalise else u
    values = np.asarray(target(grid.breakpoints), dtype=float)
    if lipschitz is None:
        lipschitz = left_slope(u, a, b) if renormalise else left_slope(u, a, b) * (float(u(b)) - float(u(a)))
    plu = PiecewiseLinearUtility(grid, values, lipschitz)
    bad = [v for v in validate(plu, tol=1e-9) if v.kind in ("monotonicity", "concavity")]
    if bad:
        raise ValueError(f"utility is not nondecreasing and concave on the grid: {bad[:3]}")
    return plu
