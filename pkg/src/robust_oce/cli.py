"""Command-line front end: ``robust-oce <subcommand> [options]``.

Every subcommand accepts ``--config FILE`` (JSON); explicit flags override
keys from the file. Results go to stdout as JSON, and file outputs go to
``--out DIR``. Exit status is 0 on success, 1 for a bad configuration and 2
when a solver fails.

CSV outputs and their header rows:

``reproduce-table1``
    distribution,K,seed,M_u,S_u,x_star,eta_star,M_from_x_star,S_from_x_star,cpu_time
``rmoce`` (worst_utility.csv)
    t,u
``sweep`` (sweep.csv / sweep_curves.csv)
    parameter,value,x_star,error_bound,status,cpu_time / parameter,t,u
``robustness`` (robustness_values.csv)
    replication,seed,clean,perturbed
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import certainty, kantorovich, rmoce, statrobust
from .distributions import (ContaminationModel, DiscreteDistribution, DistributionSpec,
                            read_explicit_csv, sample)
from .lp import LpError
from .utility import Exponential, PiecewiseLinearUtility, parse_utility

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2

TABLE1_DISTRIBUTIONS = ("uniform:-1,1", "lognormal:0,1", "pareto:1,1.5", "gamma:0.53,3")
TABLE1_SIZES = (10, 100, 1000)
TABLE1_HEADER = ["distribution", "K", "seed", "M_u", "S_u", "x_star", "eta_star",
                 "M_from_x_star", "S_from_x_star", "cpu_time"]
SWEEP_HEADER = ["parameter", "value", "x_star", "error_bound", "status", "cpu_time"]

RMOCE_DEFAULTS = {"distribution": "uniform:-1,1", "K": 100, "seed": 0,
                  "center_utility": "exp:2,0.5", "N": 10, "L": 30.0, "radius": 0.05,
                  "method": "alternating"}


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


# -- config helpers --------------------------------------------------------------


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def _merge(cfg: dict, args: argparse.Namespace, keys) -> dict:
    out = dict(cfg)
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            out[k] = v
    return out


def _spec(obj) -> DistributionSpec:
    if isinstance(obj, DistributionSpec):
        return obj
    if isinstance(obj, str):
        return DistributionSpec.parse(obj)
    if isinstance(obj, dict):
        return DistributionSpec.from_dict(obj)
    raise ConfigError(f"cannot interpret distribution {obj!r}")


def _utility(obj):
    if isinstance(obj, str):
        return parse_utility(obj)
    if isinstance(obj, dict):
        kind = obj.get("kind", "exp")
        if kind in ("exp", "exponential"):
            return Exponential(obj["alpha"], obj.get("scale", 1.0), obj.get("shift", 0.0))
        return parse_utility(f"{kind}:{','.join(str(v) for k, v in obj.items() if k != 'kind')}")
    raise ConfigError(f"cannot interpret utility {obj!r}")


def _parse_atoms(text: str) -> np.ndarray:
    """``1..10`` (integer range) or a comma-separated list."""
    if ".." in text:
        lo, hi = text.split("..")
        return np.arange(int(lo), int(hi) + 1, dtype=float)
    return np.array([float(v) for v in text.split(",") if v.strip()])


def _distribution(cfg: dict) -> DiscreteDistribution:
    if cfg.get("atoms") is not None:
        atoms = _parse_atoms(cfg["atoms"]) if isinstance(cfg["atoms"], str) else np.asarray(cfg["atoms"])
        probs = cfg.get("probs")
        return DiscreteDistribution(atoms, probs if probs is not None else np.full(atoms.size, 1 / atoms.size))
    if cfg.get("atoms_csv") is not None:
        return read_explicit_csv(cfg["atoms_csv"])
    if cfg.get("dist") is None and cfg.get("distribution") is None:
        raise ConfigError("give a distribution with --dist, --atoms or --atoms-csv")
    spec = _spec(cfg.get("dist") or cfg.get("distribution"))
    if spec.kind == "dirac":
        return DiscreteDistribution.dirac(spec.params["c"] + spec.shift)
    if spec.kind == "explicit":
        return DiscreteDistribution(spec.params["atoms"], spec.params["probs"])
    return sample(spec, int(cfg.get("K", 100)), int(cfg.get("seed", 0)))


def _out_dir(args) -> Path:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit(obj):
    print(json.dumps(obj, indent=2, sort_keys=True))


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt(v) -> str:
    return repr(float(v))


# -- subcommands -------------------------------------------------------------------


DIST_KEYS = ("dist", "atoms", "atoms_csv", "K", "seed")


def cmd_moce(args):
    cfg = _merge(_load_config(args.config), args, DIST_KEYS + ("utility",))
    d = _distribution(cfg)
    u = _utility(cfg.get("utility", "exp:2,0.5"))
    t0 = time.perf_counter()
    r = (certainty.moce if args.command == "moce" else certainty.oce)(d, u)
    _emit({"value": r.value, "x_star": r.x_star, "bracket": list(r.bracket),
           "runtime": time.perf_counter() - t0})


def cmd_cvar(args):
    cfg = _merge(_load_config(args.config), args, DIST_KEYS + ("alpha",))
    if cfg.get("alpha") is None:
        raise ConfigError("--alpha is required")
    d = _distribution(cfg)
    alpha = float(cfg["alpha"])
    _emit({"alpha": alpha, "cvar": certainty.cvar(d, alpha), "cvar_via_oce": certainty.cvar_via_oce(d, alpha)})


def _read_plu(path) -> PiecewiseLinearUtility:
    try:
        with open(path) as fh:
            return PiecewiseLinearUtility.from_dict(json.load(fh))
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise ConfigError(f"cannot read utility {path}: {exc}") from exc


def cmd_kdist(args):
    cfg = _merge(_load_config(args.config), args, ("u", "v"))
    if cfg.get("u") is None or cfg.get("v") is None:
        raise ConfigError("--u and --v are required")
    u, v = _read_plu(cfg["u"]), _read_plu(cfg["v"])
    _emit({"primal_lp": kantorovich.distance_primal_lp(u, v),
           "dual_lp": kantorovich.distance_dual_lp(u, v),
           "closed_form": kantorovich.distance_closed_form(u, v)})


RMOCE_KEYS = ("distribution", "K", "seed", "center_utility", "N", "L", "radius", "method")


def _rmoce_cfg(args) -> dict:
    cfg = dict(RMOCE_DEFAULTS)
    cfg.update(_merge(_load_config(args.config), args, RMOCE_KEYS))
    if getattr(args, "dist", None) is not None:
        cfg["distribution"] = args.dist
    if cfg["method"] not in ("direct", "alternating"):
        raise ConfigError(f"unknown method {cfg['method']!r}")
    return cfg


def _problem(cfg, N=None, radius=None) -> rmoce.RmoceProblem:
    d = _distribution({"distribution": cfg["distribution"], "K": cfg["K"], "seed": cfg["seed"]})
    return rmoce.build_problem(d, _utility(cfg["center_utility"]), int(N or cfg["N"]), float(cfg["L"]),
                               float(cfg["radius"] if radius is None else radius),
                               x_domain=cfg.get("x_domain"), domain=cfg.get("domain"))


def _solve(problem, method):
    if method == "direct":
        return rmoce.solve_direct(problem)
    return rmoce.solve_alternating(problem)


def cmd_rmoce(args):
    cfg = _rmoce_cfg(args)
    problem = _problem(cfg)
    t0 = time.perf_counter()
    sol = _solve(problem, cfg["method"])
    elapsed = time.perf_counter() - t0
    out = _out_dir(args)
    result = sol.to_dict()
    result["error_bound"] = rmoce.error_bound(float(cfg["L"]), problem.grid)
    result["config"] = {k: cfg[k] for k in sorted(cfg) if k in RMOCE_KEYS}
    with open(out / "solution.json", "w") as fh:
        json.dump(result, fh, indent=2, sort_keys=True)
    u = sol.worst_utility
    _write_csv(out / "worst_utility.csv", ["t", "u"],
               [[_fmt(t), _fmt(v)] for t, v in zip(u.grid.breakpoints, u.values)])
    _emit({"value": sol.value, "x_star": sol.x_star, "status": sol.status.value,
           "x_domain": list(sol.x_domain), "error_bound": result["error_bound"], "runtime": elapsed})
    return EXIT_OK if sol.status is rmoce.SolveStatus.CONVERGED else EXIT_SOLVER


def cmd_sweep(args):
    cfg = _rmoce_cfg(args)
    param = args.param or cfg.get("param", "radius")
    if param not in ("radius", "N"):
        raise ConfigError("--param must be radius or N")
    values = args.values or cfg.get("values")
    if not values:
        values = [0.1, 0.05, 0.01, 0.0] if param == "radius" else [20, 40, 60, 80, 100]
    if isinstance(values, str):
        values = [float(v) for v in values.split(",")]
    rows, curves, summary = [], [], []
    for p in values:
        problem = _problem(cfg, N=int(p) if param == "N" else None, radius=p if param == "radius" else None)
        t0 = time.perf_counter()
        sol = _solve(problem, cfg["method"])
        elapsed = time.perf_counter() - t0
        label = int(p) if param == "N" else float(p)
        rows.append([label, _fmt(sol.value), _fmt(sol.x_star),
                     _fmt(rmoce.error_bound(float(cfg["L"]), problem.grid)), sol.status.value, f"{elapsed:.4f}"])
        summary.append({"parameter": label, "value": sol.value, "x_star": sol.x_star,
                        "status": sol.status.value, "cpu_time": elapsed})
        u = sol.worst_utility
        curves.extend([label, _fmt(t), _fmt(v)] for t, v in zip(u.grid.breakpoints, u.values))
    out = _out_dir(args)
    _write_csv(out / "sweep.csv", SWEEP_HEADER, rows)
    _write_csv(out / "sweep_curves.csv", ["parameter", "t", "u"], curves)
    _emit({"param": param, "rows": summary})


def cmd_robustness(args):
    cfg = {"distribution": "uniform:-1,1", "mix_weight": 0.1, "noise": "dirac:0.5",
           "N": 50, "M": 200, "L": 30.0, "seed": 0, "estimator": "moce"}
    cfg.update(_merge(_load_config(args.config), args,
                      ("distribution", "mix_weight", "noise", "N", "M", "L", "seed", "estimator")))
    if getattr(args, "dist", None) is not None:
        cfg["distribution"] = args.dist
    if isinstance(cfg.get("contamination"), dict):
        cfg["mix_weight"] = cfg["contamination"]["mix_weight"]
        cfg["noise"] = cfg["contamination"]["noise"]
    model = ContaminationModel(float(cfg["mix_weight"]), _spec(cfg["noise"]))
    est = statrobust.EstimatorConfig(kind=cfg["estimator"], L=float(cfg["L"]))
    rep = statrobust.robustness_check(_spec(cfg["distribution"]), model, int(cfg["N"]), int(cfg["M"]),
                                      float(cfg["L"]), seed=int(cfg["seed"]), config=est)
    out = _out_dir(args)
    (out / "robustness.json").write_text(rep.to_json() + "\n")
    (out / "robustness_values.csv").write_text(rep.values_csv())
    _emit(rep.to_dict())


def table1_rows(seed: int):
    """One row per (distribution, K), with the closed-form consistency columns."""
    u = Exponential(2.0, 0.5)
    seeds = statrobust.derive_seeds(seed, len(TABLE1_DISTRIBUTIONS) * len(TABLE1_SIZES))
    rows = []
    i = 0
    for name in TABLE1_DISTRIBUTIONS:
        for K in TABLE1_SIZES:
            s = seeds[i] % (2 ** 63)
            i += 1
            d = sample(DistributionSpec.parse(name), K, s)
            t0 = time.perf_counter()
            m = certainty.moce(d, u)
            o = certainty.oce(d, u)
            elapsed = time.perf_counter() - t0
            rows.append({"distribution": name, "K": K, "seed": s, "M_u": m.value, "S_u": o.value,
                         "x_star": m.x_star, "eta_star": o.x_star,
                         "M_from_x_star": -np.expm1(-2.0 * m.x_star), "S_from_x_star": 2.0 * m.x_star,
                         "cpu_time": elapsed, "xi_min": d.min, "xi_max": d.max})
    return rows


def cmd_table1(args):
    cfg = _merge(_load_config(args.config), args, ("seed",))
    rows = table1_rows(int(cfg.get("seed", 0)))
    out = _out_dir(args)
    _write_csv(out / "table1.csv", TABLE1_HEADER,
               [[r["distribution"], r["K"], r["seed"]] + [_fmt(r[k]) for k in TABLE1_HEADER[3:-1]]
                + [f"{r['cpu_time']:.4f}"] for r in rows])
    _emit({"rows": len(rows), "csv": str(out / "table1.csv")})


# -- entry point ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="robust-oce", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="JSON file with default values")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output directory (default: current)")

    def dist_flags(sp):
        sp.add_argument("--dist", help="kind:params, e.g. uniform:-1,1 or dirac:2")
        sp.add_argument("--atoms", help="equally likely atoms: 1..10 or 1,2,3")
        sp.add_argument("--atoms-csv", dest="atoms_csv", help="file of atom,prob lines")
        sp.add_argument("--K", type=int, help="sample size for parametric laws")

    for name, fn in (("moce", cmd_moce), ("oce", cmd_moce)):
        sp = sub.add_parser(name, help=f"{name.upper()} of one utility")
        common(sp)
        dist_flags(sp)
        sp.add_argument("--utility", help="exp:alpha[,scale[,shift]] | pwl:g1,g2 | cvar:alpha")
        sp.set_defaults(func=fn)

    sp = sub.add_parser("cvar", help="CVaR of -xi, sort-based and through OCE")
    common(sp)
    dist_flags(sp)
    sp.add_argument("--alpha", type=float)
    sp.set_defaults(func=cmd_cvar)

    sp = sub.add_parser("kdist", help="Kantorovich distance between two utility JSON files")
    common(sp)
    sp.add_argument("--u")
    sp.add_argument("--v")
    sp.set_defaults(func=cmd_kdist)

    for name, fn in (("rmoce", cmd_rmoce), ("sweep", cmd_sweep)):
        sp = sub.add_parser(name, help="robust MOCE" if name == "rmoce" else "robust MOCE across radii or N")
        common(sp)
        sp.add_argument("--dist")
        sp.add_argument("--K", type=int)
        sp.add_argument("--center-utility", dest="center_utility")
        sp.add_argument("--N", type=int)
        sp.add_argument("--L", type=float)
        sp.add_argument("--radius", type=float)
        sp.add_argument("--method", choices=["direct", "alternating"])
        if name == "sweep":
            sp.add_argument("--param", choices=["radius", "N"])
            sp.add_argument("--values", help="comma-separated parameter values")
        sp.set_defaults(func=fn)

    sp = sub.add_parser("robustness", help="Monte-Carlo statistical robustness check")
    common(sp)
    sp.add_argument("--dist")
    sp.add_argument("--mix-weight", dest="mix_weight", type=float)
    sp.add_argument("--noise", help="noise law, e.g. dirac:0.5")
    sp.add_argument("--N", type=int)
    sp.add_argument("--M", type=int)
    sp.add_argument("--L", type=float)
    sp.add_argument("--estimator", choices=["moce", "rmoce"])
    sp.set_defaults(func=cmd_robustness)

    sp = sub.add_parser("reproduce-table1", help="MOCE/OCE table for the exponential utility")
    common(sp)
    sp.set_defaults(func=cmd_table1)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # usage errors and --help
        return int(exc.code or 0)
    try:
        code = args.func(args)
    except (ConfigError, ValueError, KeyError, TypeError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (LpError, certainty.NoInteriorOptimum, ArithmeticError, RuntimeError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK if code is None else code


if __name__ == "__main__":
    sys.exit(main())
