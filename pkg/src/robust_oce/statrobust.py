"""Monte-Carlo check that the sample-based certainty equivalent is statistically robust.

The estimator is computed on ``M`` independent ``N``-samples from a clean law
``P`` and on the same samples after contamination (law ``Q``). Reusing the
clean draws for both channels (common random numbers) means that with no
contamination the two estimator laws coincide exactly.

The check compares

* ``lhs`` = Kantorovich distance between the two ``M``-point estimator laws,
* ``rhs`` = ``L`` times the Kantorovich distance between ``P`` and ``Q``,
  estimated from large reference samples,

and passes when ``lhs <= rhs + 2 * stderr`` (``stderr`` from a paired
bootstrap over replications).

Replication ``m`` draws with seed ``splitmix64`` output number ``m`` started
from the master seed, so any single replication can be rerun alone.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import certainty, rmoce
from .distributions import (ContaminationModel, DiscreteDistribution, DistributionSpec,
                            contaminate, kantorovich_distance_dist)
from .utility import Exponential

MASK64 = (1 << 64) - 1
REFERENCE_SIZE = 100_000
BOOTSTRAP = 200


def splitmix64(state: int) -> tuple[int, int]:
    """One step of the splitmix64 generator: returns ``(new_state, output)``."""
    state = (state + 0x9E3779B97F4A7C15) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


def derive_seeds(master: int, count: int) -> list[int]:
    """The first ``count`` splitmix64 outputs from ``master``."""
    state = int(master) & MASK64
    out = []
    for _ in range(count):
        state, z = splitmix64(state)
        out.append(z)
    return out


@dataclass(frozen=True)
class EstimatorConfig:
    """Which certainty equivalent to estimate.

    ``kind="moce"`` (default) uses the parametric ``utility`` directly;
    ``kind="rmoce"`` projects it on an ``N_grid``-point grid and solves the
    robust problem with ``radius`` and slope bound ``L``.
    """

    kind: str = "moce"
    utility: object = field(default_factory=lambda: Exponential(2.0, 0.5))
    N_grid: int = 10
    L: float = 30.0
    radius: float = 0.0

    def __post_init__(self):
        if self.kind not in ("moce", "rmoce"):
            raise ValueError(f"unknown estimator {self.kind!r}")

    def evaluate(self, samples) -> float:
        d = DiscreteDistribution.from_samples(samples)
        if self.kind == "moce":
            return certainty.moce(d, self.utility).value
        problem = rmoce.build_problem(d, self.utility, self.N_grid, self.L, self.radius)
        return rmoce.solve_direct(problem).value


@dataclass
class EstimatorLaw:
    values: np.ndarray
    seeds: list
    failures: int = 0


def _replication(spec, contamination, N, seed):
    """Clean draw and, if requested, its contaminated copy for one replication."""
    clean = spec.draw(N, np.random.default_rng(seed))
    if contamination is None:
        return clean, None
    return clean, contaminate(clean, contamination, splitmix64(seed)[1])


def estimator_law(spec: DistributionSpec, contamination: ContaminationModel | None, N: int, M: int,
                  config: EstimatorConfig | None = None, seed: int = 0) -> EstimatorLaw:
    """``M`` estimates, each on a fresh ``N``-sample (contaminated if a model is given).

    Failed solves are counted and left out of ``values``.
    """
    if N < 2 or M < 1:
        raise ValueError("need N >= 2 and M >= 1")
    config = config or EstimatorConfig()
    seeds = derive_seeds(seed, M)
    values, failures = [], 0
    for s in seeds:
        clean, dirty = _replication(spec, contamination, N, s)
        try:
            values.append(config.evaluate(clean if dirty is None else dirty))
        except (ArithmeticError, ValueError, RuntimeError):
            failures += 1
    return EstimatorLaw(np.array(values), seeds, failures)


@dataclass
class RobustnessReport:
    lhs: float
    rhs: float
    stderr: float
    N: int
    M: int
    L: float
    seed: int
    passed: bool
    failures: int = 0
    clean_values: np.ndarray = field(default=None, repr=False)
    perturbed_values: np.ndarray = field(default=None, repr=False)
    seeds: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        out = {k: v for k, v in asdict(self).items()
               if k not in ("clean_values", "perturbed_values", "seeds", "passed")}
        out["pass"] = self.passed
        out["replication_seeds"] = [int(s) for s in self.seeds]
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def values_csv(self) -> str:
        """``replication,seed,clean,perturbed`` rows."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["replication", "seed", "clean", "perturbed"])
        for i, (s, a, b) in enumerate(zip(self.seeds, self.clean_values, self.perturbed_values)):
            w.writerow([i, s, repr(float(a)), repr(float(b))])
        return buf.getvalue()


def _law_distance(a, b) -> float:
    return kantorovich_distance_dist(DiscreteDistribution.from_samples(a),
                                     DiscreteDistribution.from_samples(b))


def robustness_check(P: DistributionSpec, contamination: ContaminationModel, N: int, M: int,
                     L: float, seed: int = 0, config: EstimatorConfig | None = None,
                     reference_size: int = REFERENCE_SIZE) -> RobustnessReport:
    if M < 30:
        raise ValueError("need at least 30 replications")
    config = config or EstimatorConfig()
    seeds = derive_seeds(seed, M)
    clean_vals, dirty_vals, failures = [], [], 0
    for s in seeds:
        clean, dirty = _replication(P, contamination, N, s)
        try:
            a, b = config.evaluate(clean), config.evaluate(dirty)
        except (ArithmeticError, ValueError, RuntimeError):
            failures += 1
            continue
        clean_vals.append(a)
        dirty_vals.append(b)
    clean_vals, dirty_vals = np.array(clean_vals), np.array(dirty_vals)
    lhs = _law_distance(clean_vals, dirty_vals)

    # paired bootstrap over replications for the Monte-Carlo error of lhs
    rng = np.random.default_rng(derive_seeds(seed ^ 0x5EED, 1)[0])
    idx = rng.integers(0, clean_vals.size, size=(BOOTSTRAP, clean_vals.size))
    boot = [_law_distance(clean_vals[i], dirty_vals[i]) for i in idx]
    stderr = float(np.std(boot, ddof=1))

    ref_seed = derive_seeds(seed ^ 0xC0FFEE, 1)[0]
    ref_clean, ref_dirty = _replication(P, contamination, reference_size, ref_seed)
    rhs = L * _law_distance(ref_clean, ref_dirty)
    return RobustnessReport(lhs, rhs, stderr, N, M, L, seed, bool(lhs <= rhs + 2.0 * stderr),
                            failures, clean_vals, dirty_vals, seeds)
