"""Scenario distributions for the random income.

A :class:`DiscreteDistribution` is the scenario model every solver consumes.
:class:`DistributionSpec` names a parametric law (sampled by inverse CDF) and
:class:`ContaminationModel` describes the noisy "perceived data" channel used
by the robustness harness.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import stats

PROB_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    """Finite distribution with strictly increasing atoms and positive probabilities.

    Repeated atoms are merged by summing their probability, so two samples that
    are permutations of each other build identical objects.
    """

    atoms: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float).ravel()
        probs = np.asarray(self.probs, dtype=float).ravel()
        if atoms.size == 0 or atoms.size != probs.size:
            raise ValueError("atoms and probs must be non-empty and of equal length")
        if not (np.all(np.isfinite(atoms)) and np.all(np.isfinite(probs))):
            raise ValueError("atoms and probabilities must be finite")
        if np.any(probs < 0):
            raise ValueError("probabilities must be non-negative")
        total = probs.sum()
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {total}, not 1")
        keep = probs > 0
        uniq, inv = np.unique(atoms[keep], return_inverse=True)
        merged = np.bincount(inv, weights=probs[keep], minlength=uniq.size)
        merged = merged / merged.sum()
        uniq.setflags(write=False)
        merged.setflags(write=False)
        object.__setattr__(self, "atoms", uniq)
        object.__setattr__(self, "probs", merged)

    @classmethod
    def from_samples(cls, samples) -> DiscreteDistribution:
        """Empirical distribution, each sample carrying mass ``1/K``."""
        samples = np.asarray(samples, dtype=float).ravel()
        if samples.size == 0:
            raise ValueError("need at least one sample")
        uniq, counts = np.unique(samples, return_counts=True)
        return cls(uniq, counts / samples.size)

    @classmethod
    def dirac(cls, c: float) -> DiscreteDistribution:
        return cls([c], [1.0])

    def __len__(self):
        return self.atoms.size

    def __eq__(self, other):
        if not isinstance(other, DiscreteDistribution):
            return NotImplemented
        return np.array_equal(self.atoms, other.atoms) and np.array_equal(self.probs, other.probs)

    def __hash__(self):
        return hash((self.atoms.tobytes(), self.probs.tobytes()))

    @property
    def min(self) -> float:
        return float(self.atoms[0])

    @property
    def max(self) -> float:
        return float(self.atoms[-1])

    def mean(self) -> float:
        return float(self.probs @ self.atoms)

    def scaled(self, delta: float) -> DiscreteDistribution:
        """Law of ``delta * xi``."""
        return DiscreteDistribution(self.atoms * delta, self.probs)

    def shifted(self, c: float) -> DiscreteDistribution:
        return DiscreteDistribution(self.atoms + c, self.probs)

    def cdf(self, t):
        idx = np.searchsorted(self.atoms, t, side="right")
        cum = np.concatenate([[0.0], np.cumsum(self.probs)])
        return cum[idx]

    def to_dict(self) -> dict:
        return {"atoms": self.atoms.tolist(), "probs": self.probs.tolist()}


def expect(d: DiscreteDistribution, f: Callable) -> float:
    """``sum_k p_k f(xi_k)``; ``f`` may be vectorised or scalar."""
    try:
        vals = np.asarray(f(d.atoms), dtype=float)
        if vals.shape != d.atoms.shape:
            raise ValueError
    except (TypeError, ValueError):
        vals = np.array([float(f(a)) for a in d.atoms])
    if not np.all(np.isfinite(vals)):
        bad = d.atoms[~np.isfinite(vals)]
        raise ValueError(f"f is not finite at atoms {bad.tolist()}")
    return float(d.probs @ vals)


def kantorovich_distance_dist(P: DiscreteDistribution, Q: DiscreteDistribution) -> float:
    """Wasserstein-1 distance: the area between the two CDFs, exact on the merged grid."""
    grid = np.union1d(P.atoms, Q.atoms)
    if grid.size < 2:
        return 0.0
    gap = np.abs(P.cdf(grid[:-1]) - Q.cdf(grid[:-1]))
    return float(gap @ np.diff(grid))


# -- parametric laws -----------------------------------------------------------

_PARAM_NAMES = {
    "uniform": ("lo", "hi"),
    "lognormal": ("mu", "sigma"),
    "pareto": ("scale", "shape"),
    "gamma": ("shape", "scale"),
    "dirac": ("c",),
}


@dataclass(frozen=True)
class DistributionSpec:
    """A named law. ``explicit`` carries its atoms/probs; ``shift`` is added to every draw.

    >>> DistributionSpec.parse("pareto:1,1.5").params
    {'scale': 1.0, 'shape': 1.5}
    """

    kind: str
    params: dict = field(default_factory=dict)
    shift: float = 0.0

    def __post_init__(self):
        kind = self.kind.lower()
        object.__setattr__(self, "kind", kind)
        p = self.params
        if kind == "explicit":
            DiscreteDistribution(p["atoms"], p["probs"])
            return
        if kind not in _PARAM_NAMES:
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        missing = set(_PARAM_NAMES[kind]) - set(p)
        if missing:
            raise ValueError(f"{kind} needs parameters {sorted(missing)}")
        object.__setattr__(self, "params", {k: float(p[k]) for k in _PARAM_NAMES[kind]})
        p = self.params
        if kind == "uniform" and not p["lo"] < p["hi"]:
            raise ValueError("uniform needs lo < hi")
        if kind == "lognormal" and p["sigma"] <= 0:
            raise ValueError("lognormal needs sigma > 0")
        if kind in ("pareto", "gamma") and (p["shape"] <= 0 or p["scale"] <= 0):
            raise ValueError(f"{kind} needs shape > 0 and scale > 0")

    @classmethod
    def parse(cls, text: str) -> DistributionSpec:
        """Parse ``kind:v1,v2`` (positional parameters in the documented order)."""
        kind, _, rest = text.partition(":")
        kind = kind.strip().lower()
        if kind not in _PARAM_NAMES:
            raise ValueError(f"unknown distribution kind {kind!r}")
        values = [float(v) for v in rest.split(",") if v.strip()]
        names = _PARAM_NAMES[kind]
        if len(values) != len(names):
            raise ValueError(f"{kind} expects {len(names)} parameter(s) {names}")
        return cls(kind, dict(zip(names, values)))

    @classmethod
    def from_dict(cls, obj: dict) -> DistributionSpec:
        obj = dict(obj)
        kind = obj.pop("kind")
        shift = float(obj.pop("shift", 0.0))
        return cls(kind, obj, shift)

    @classmethod
    def from_json(cls, text: str) -> DistributionSpec:
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        out = {"kind": self.kind, **self.params}
        if self.shift:
            out["shift"] = self.shift
        return out

    def frozen(self):
        """The matching ``scipy.stats`` frozen law (continuous kinds only)."""
        p = self.params
        loc = self.shift
        if self.kind == "uniform":
            return stats.uniform(loc=p["lo"] + loc, scale=p["hi"] - p["lo"])
        if self.kind == "lognormal":
            return stats.lognorm(s=p["sigma"], scale=np.exp(p["mu"]), loc=loc)
        if self.kind == "pareto":
            return stats.pareto(b=p["shape"], scale=p["scale"], loc=loc)
        if self.kind == "gamma":
            return stats.gamma(a=p["shape"], scale=p["scale"], loc=loc)
        raise ValueError(f"{self.kind} has no continuous law")

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "dirac":
            return np.full(u.shape, self.params["c"] + self.shift)
        if self.kind == "explicit":
            d = DiscreteDistribution(self.params["atoms"], self.params["probs"])
            idx = np.searchsorted(np.cumsum(d.probs), u, side="right")
            return d.atoms[np.minimum(idx, d.atoms.size - 1)] + self.shift
        if self.kind == "pareto":
            # inverse CDF of F(x) = 1 - (scale/x)^shape
            p = self.params
            return p["scale"] * (1.0 - u) ** (-1.0 / p["shape"]) + self.shift
        return self.frozen().ppf(u)

    def draw(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """``n`` iid draws by inverse CDF from ``rng``."""
        return self.ppf(rng.random(n))


def sample(spec: DistributionSpec, K: int, seed: int) -> DiscreteDistribution:
    """Empirical distribution of ``K`` iid draws, deterministic in ``seed``."""
    if K < 1:
        raise ValueError("K must be at least 1")
    return DiscreteDistribution.from_samples(spec.draw(K, np.random.default_rng(seed)))


@dataclass(frozen=True)
class ContaminationModel:
    """Each sample independently receives additive ``noise`` with probability ``mix_weight``."""

    mix_weight: float
    noise: DistributionSpec

    def __post_init__(self):
        if not 0.0 <= self.mix_weight <= 1.0:
            raise ValueError("mix_weight must lie in [0, 1]")

    @classmethod
    def from_dict(cls, obj: dict) -> ContaminationModel:
        noise = obj["noise"]
        noise = DistributionSpec.parse(noise) if isinstance(noise, str) else DistributionSpec.from_dict(noise)
        return cls(float(obj["mix_weight"]), noise)

    def to_dict(self) -> dict:
        return {"mix_weight": self.mix_weight, "noise": self.noise.to_dict()}


def contaminate(samples, model: ContaminationModel, seed: int) -> np.ndarray:
    samples = np.asarray(samples, dtype=float)
    rng = np.random.default_rng(seed)
    hit = rng.random(samples.shape) < model.mix_weight
    noise = model.noise.draw(samples.size, rng).reshape(samples.shape)
    return np.where(hit, samples + noise, samples)


def read_explicit_csv(path) -> DiscreteDistribution:
    """Read ``atom,prob`` lines (a header line is skipped if not numeric)."""
    atoms, probs = [], []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            a, p = line.split(",")[:2]
            try:
                atoms.append(float(a))
                probs.append(float(p))
            except ValueError:
                continue
    return DiscreteDistribution(atoms, probs)
