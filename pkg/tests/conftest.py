import numpy as np
import pytest

from robust_oce.distributions import DiscreteDistribution
from robust_oce.utility import Grid, PiecewiseLinearUtility, uniform_grid


def random_plu(grid: Grid, rng: np.random.Generator, lipschitz: float = np.inf) -> PiecewiseLinearUtility:
    """Admissible utility: positive nonincreasing slopes normalised to rise from 0 to 1."""
    s = np.sort(rng.random(grid.n - 1))[::-1] + 1e-3
    s = s / (s @ grid.steps)
    return PiecewiseLinearUtility.from_slopes(grid, s, lipschitz)


def random_distribution(rng: np.random.Generator, k_max: int = 30, loc: float = 0.0,
                        scale: float = 1.0) -> DiscreteDistribution:
    K = int(rng.integers(1, k_max + 1))
    atoms = loc + scale * rng.normal(size=K)
    probs = rng.random(K) + 0.05
    return DiscreteDistribution(atoms, probs / probs.sum())


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def unit_grid():
    return uniform_grid(0.0, 1.0, 3)


# -- acceptance report -------------------------------------------------------------

_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line for an acceptance criterion and fail the test if it did not pass."""
    lines = request.config.stash[_ACCEPTANCE]

    def record(number: int, title: str, ok: bool, detail: str):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title}: {detail}"
        lines.append((number, line))
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
