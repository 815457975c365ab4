"""Time the compiled and pure-Python simplex kernels on the robust inner problem.

    python3 benchmarks/bench_kernels.py [--sizes 10,50,100] [--solves 20]

For each grid size N it builds the inner LP of the uniform test case, then
re-solves it at ``--solves`` allocations across ``X`` (warm starts). Both
kernels must reach the same objective values; the script exits non-zero if
they differ by more than 1e-9.
"""

import argparse
import sys
import time

import numpy as np

from robust_oce.distributions import DistributionSpec, sample
from robust_oce.lp import KERNELS
from robust_oce.rmoce import InnerSolver, build_problem
from robust_oce.utility import Exponential


def run(kernel, problem, xs):
    t0 = time.perf_counter()
    inner = InnerSolver(problem, kernel=kernel)
    t_build = time.perf_counter() - t0
    t0 = time.perf_counter()
    values = [inner(x)[1] for x in xs]
    return t_build, time.perf_counter() - t0, inner.solver.iterations, np.array(values)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", default="10,50,100")
    p.add_argument("--solves", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)

    kernels = sorted(KERNELS)
    if "cython" not in kernels:
        print("compiled kernel not built; only the Python kernel is available")
    d = sample(DistributionSpec.parse("uniform:-1,1"), 100, args.seed)
    print(f"{'N':>5} {'kernel':>8} {'phase1 s':>9} {'solves s':>9} {'pivots':>8} {'speedup':>8}")
    ok = True
    for N in (int(v) for v in args.sizes.split(",")):
        problem = build_problem(d, Exponential(2.0, 0.5), N, 30.0, 0.05)
        xs = np.linspace(*problem.x_domain, args.solves)
        results = {k: run(k, problem, xs) for k in kernels}
        base = sum(results["python"][:2])
        for k in kernels:
            tb, ts, piv, _ = results[k]
            print(f"{N:>5} {k:>8} {tb:>9.3f} {ts:>9.3f} {piv:>8d} {base / (tb + ts):>7.1f}x")
        if len(kernels) > 1:
            gap = np.max(np.abs(results["cython"][3] - results["python"][3]))
            ok &= gap <= 1e-9
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
