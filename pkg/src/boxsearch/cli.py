"""Command-line front end: exact tables, speed-up sweeps, experiments, checks.

Subcommands emit CSV or JSON only; figures are left to external tools.  Every
command is deterministic given --seed (default from BOXSEARCH_SEED, else 17),
and JSON reports echo the resolved options for provenance.  Exit status is 0
iff every requested check passed.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from fractions import Fraction

from . import __version__, bounds, matrix, sim
from .strategy import BLOCK_RANDOM, COORDINATED, NESTED, SOLO, SearchParams, StrategyKind

DEFAULT_SEED = 17
SEED_ENV_VAR = "BOXSEARCH_SEED"

_STRATEGY_CHOICES = (NESTED, BLOCK_RANDOM, SOLO, COORDINATED)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def _json_text(payload: dict) -> str:
    return json.dumps(payload, indent=2) + "\n"


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _default_seed() -> int:
    env = os.environ.get(SEED_ENV_VAR)
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise SystemExit(f"invalid {SEED_ENV_VAR}={env!r}: not an integer") from exc
    return DEFAULT_SEED


def _report(command: str, seed: int, options: dict, results) -> dict:
    return {"version": __version__, "seed": seed, "command": command,
            "options": options, "results": results}


def _parse_perturbation(spec: str) -> sim.Perturbation:
    parts = spec.split(":")
    kind = parts[0]
    try:
        if kind == "identity":
            return sim.Perturbation()
        if kind == "shift":
            return sim.Perturbation(kind="shift", shift=int(parts[1]))
        if kind == "extra-boxes":
            return sim.Perturbation(kind="extra-boxes")
        if kind == "local-shuffle":
            window = int(parts[1])
            seed = int(parts[2]) if len(parts) > 2 else 0
            return sim.Perturbation(kind="local-shuffle", window=window, seed=seed)
    except (IndexError, ValueError) as exc:
        raise argparse.ArgumentTypeError(f"bad perturbation spec {spec!r}: {exc}") from exc
    raise argparse.ArgumentTypeError(
        f"unknown perturbation {kind!r}; expected identity, shift:C, "
        f"extra-boxes, or local-shuffle:W[:SEED]")


def _parse_x_range(spec: str) -> list[int]:
    try:
        lo, hi, step = (int(v) for v in spec.split(":"))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad range {spec!r}; expected LO:HI:STEP") from exc
    if lo < 1 or hi < lo or step < 1:
        raise argparse.ArgumentTypeError(f"bad range {spec!r}; need 1 <= LO <= HI, STEP >= 1")
    return list(range(lo, hi + 1, step))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="boxsearch",
        description="Uncoordinated parallel box-search: exact analysis, "
                    "Monte Carlo experiments, and bound verification.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_common(p: argparse.ArgumentParser, default_format: str = "csv") -> None:
        p.add_argument("--format", choices=("csv", "json"), default=default_format,
                       help="output format")
        p.add_argument("--output", default=None, help="output path (default: stdout)")
        p.add_argument("--seed", type=int, default=None,
                       help=f"base seed (default: ${SEED_ENV_VAR} or {DEFAULT_SEED})")

    p = sub.add_parser("matrix", help="render a slab of the survival table N(x, t)",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--k", type=int, default=2, help="fleet design parameter")
    p.add_argument("--strategy", choices=_STRATEGY_CHOICES, default=NESTED)
    p.add_argument("--block", type=int, default=3, help="block length (block-random)")
    p.add_argument("--searcher-id", type=int, default=1, help="searcher id (coordinated)")
    p.add_argument("--xmax", type=int, required=True, help="rows 1..xmax")
    p.add_argument("--tmax", type=int, required=True, help="columns 0..tmax")
    p.add_argument("--exact", action="store_true", help="rational values like 2/3")
    p.add_argument("--max-cells", type=int, default=10_000_000,
                   help="refuse slabs larger than this")
    add_common(p)

    p = sub.add_parser("speedup", help="theta and speed-up over a set of x values",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--x", type=int, action="append", default=None,
                   help="treasure index (repeatable)")
    p.add_argument("--x-range", type=_parse_x_range, default=None, metavar="LO:HI:STEP")
    p.add_argument("--mode", choices=("exact", "mc"), default="exact")
    p.add_argument("--epsilon", type=float, default=1e-6,
                   help="certified truncation error on theta (exact mode)")
    p.add_argument("--trials", type=int, default=None, help="trial count (mc mode)")
    p.add_argument("--window", action="store_true",
                   help="report max-over-window theta (window 2(k+1))")
    add_common(p)

    p = sub.add_parser("robustness", help="perturbed vs unperturbed speed-up",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--x", type=int, required=True)
    p.add_argument("--trials", type=int, default=2000)
    p.add_argument("--perturbation", type=_parse_perturbation, action="append",
                   default=None, metavar="SPEC",
                   help="identity | shift:C | extra-boxes | local-shuffle:W[:SEED] "
                        "(repeatable; default shift:5 and extra-boxes)")
    p.add_argument("--tolerance", type=float, default=0.05,
                   help="flag speed-up losses beyond this fraction")
    add_common(p, default_format="json")

    p = sub.add_parser("crash", help="crashed oversized fleet vs right-sized fleet",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--k", type=int, required=True, help="fleet size before crashes")
    p.add_argument("--k-prime", type=int, required=True, help="number of crashed searchers")
    p.add_argument("--x", type=int, required=True)
    p.add_argument("--trials", type=int, default=2000)
    add_common(p, default_format="json")

    p = sub.add_parser("verify-bounds", help="run the numeric bound checks",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--k", type=int, action="append", default=None,
                   help="fleet sizes to check (repeatable; default 2 3 5)")
    p.add_argument("--x-tail", type=int, default=10_000,
                   help="x at which the tail sum is evaluated")
    p.add_argument("--theta-x", type=int, default=10_000,
                   help="x for the dominance check against exact theta")
    p.add_argument("--instances", type=int, default=20,
                   help="random water-filling instances")
    p.add_argument("--skip-theta", action="store_true",
                   help="skip the exact-theta dominance check (slowest entry)")
    add_common(p, default_format="json")

    return parser


def _cmd_matrix(args, seed: int) -> int:
    cells = args.xmax * (args.tmax + 1)
    if args.xmax < 1 or args.tmax < 0:
        raise SystemExit("--xmax must be >= 1 and --tmax >= 0")
    if cells > args.max_cells:
        raise SystemExit(
            f"--xmax {args.xmax} x --tmax {args.tmax} is {cells} cells, "
            f"above --max-cells {args.max_cells}")
    params = SearchParams(args.k)
    if args.strategy == BLOCK_RANDOM:
        kind = StrategyKind.block_random(args.block)
    elif args.strategy == COORDINATED:
        kind = StrategyKind.coordinated(args.searcher_id)
    elif args.strategy == SOLO:
        kind = StrategyKind.solo()
    else:
        kind = StrategyKind.nested()
    view = matrix.SurvivalMatrix(kind, params, exact=args.exact)
    rows = [[x] + [view.value(x, t) for t in range(args.tmax + 1)]
            for x in range(1, args.xmax + 1)]
    if args.format == "csv":
        header = "x," + ",".join(str(t) for t in range(args.tmax + 1))
        lines = [header]
        for row in rows:
            lines.append(",".join(_fmt(v) for v in row))
        _emit("\n".join(lines) + "\n", args.output)
    else:
        results = [{"x": row[0], "n": [_fmt(v) if args.exact else v for v in row[1:]]}
                   for row in rows]
        options = {"k": args.k, "strategy": kind.describe(), "xmax": args.xmax,
                   "tmax": args.tmax, "exact": args.exact}
        _emit(_json_text(_report("matrix", seed, options, results)), args.output)
    return 0


def _cmd_speedup(args, seed: int) -> int:
    xs: list[int] = list(args.x or [])
    if args.x_range:
        xs.extend(args.x_range)
    if not xs:
        raise SystemExit("speedup needs --x or --x-range")
    if args.mode == "mc" and not args.trials:
        raise SystemExit("--trials is required when --mode mc")
    params = SearchParams(args.k)
    rows = []
    if args.mode == "exact":
        for p in matrix.speedup_curve(params, xs, args.epsilon, window=args.window):
            rows.append({"k": p.k, "x": p.x, "strategy": NESTED, "mode": "exact",
                         "theta": p.theta, "speedup": p.speedup, "stderr": None,
                         "trials": None, "truncation_t": p.truncation_t,
                         "tail_bound": p.tail_bound})
    else:
        for x in sorted(xs):
            template = sim.TrialConfig(params=params, kind=StrategyKind.nested(),
                                       treasure=x, seed=seed)
            stats = sim.estimate_speedup(template, args.trials)
            rows.append({"k": args.k, "x": x, "strategy": NESTED, "mode": "mc",
                         "theta": stats.mean_time / x, "speedup": stats.speedup_point,
                         "stderr": stats.stderr, "trials": stats.trials,
                         "truncation_t": None, "tail_bound": None})
    if args.format == "csv":
        header = "k,x,strategy,mode,theta,speedup,stderr,trials,truncation_t,tail_bound"
        lines = [header]
        for r in rows:
            lines.append(",".join(_fmt(r[c]) for c in header.split(",")))
        _emit("\n".join(lines) + "\n", args.output)
    else:
        options = {"k": args.k, "x": sorted(xs), "mode": args.mode,
                   "epsilon": args.epsilon, "trials": args.trials, "window": args.window}
        _emit(_json_text(_report("speedup", seed, options, rows)), args.output)
    return 0


def _cmd_robustness(args, seed: int) -> int:
    params = SearchParams(args.k)
    perts = args.perturbation or [
        sim.Perturbation(kind="shift", shift=5),
        sim.Perturbation(kind="extra-boxes"),
    ]
    report = sim.robustness_experiment(params, args.x, perts, args.trials, seed,
                                       tolerance=args.tolerance)
    results = [{"perturbation": "identity (baseline)",
                **sim.stats_dict(report.baseline),
                "speedup_ratio": 1.0, "violation": False}]
    for e in report.entries:
        results.append({"perturbation": e.perturbation, **sim.stats_dict(e.stats),
                        "speedup_ratio": e.speedup_ratio, "violation": e.violation})
    options = {"k": args.k, "x": args.x, "trials": args.trials,
               "tolerance": args.tolerance,
               "perturbations": [p.describe() for p in perts]}
    payload = _report("robustness", seed, options, results)
    payload["failures"] = [e.perturbation for e in report.entries if e.violation]
    if args.format == "csv":
        rows = [(args.k, args.x, NESTED, "identity", report.baseline)]
        rows += [(args.k, args.x, NESTED, e.perturbation, e.stats) for e in report.entries]
        _emit(sim.sweep_csv(rows), args.output)
    else:
        _emit(_json_text(payload), args.output)
    return 1 if report.any_violation else 0


def _cmd_crash(args, seed: int) -> int:
    if not 0 <= args.k_prime < args.k:
        raise SystemExit(f"--k-prime must satisfy 0 <= k' < k, got k'={args.k_prime} k={args.k}")
    report = sim.crash_experiment(args.k, args.k_prime, args.x, args.trials, seed)
    results = [
        {"fleet": "crashed", "k": args.k, "crashed": args.k_prime,
         **sim.stats_dict(report.with_crashes)},
        {"fleet": "control", "k": args.k - args.k_prime, "crashed": 0,
         **sim.stats_dict(report.control)},
        {"check": "ci95-overlap", "passed": report.overlap},
    ]
    options = {"k": args.k, "k_prime": args.k_prime, "x": args.x, "trials": args.trials}
    payload = _report("crash", seed, options, results)
    payload["failures"] = [] if report.overlap else ["ci95-overlap"]
    if args.format == "csv":
        rows = [(args.k, args.x, NESTED, f"crashed:{args.k_prime}", report.with_crashes),
                (args.k - args.k_prime, args.x, NESTED, "control", report.control)]
        _emit(sim.sweep_csv(rows), args.output)
    else:
        _emit(_json_text(payload), args.output)
    return 0 if report.overlap else 1


def _verify_entries(args, seed: int) -> list[dict]:
    ks = args.k or [2, 3, 5]
    entries: list[dict] = []

    def add(name: str, value, bound, passed: bool, k=None, note: str = "") -> None:
        margin = None
        if value is not None and bound is not None:
            margin = bound - value
        entries.append({"name": name, "k": k, "value": value, "bound": bound,
                        "margin": margin,
                        "status": "pass" if passed else "fail",
                        **({"note": note} if note else {})})

    def skip(name: str, k, note: str) -> None:
        entries.append({"name": name, "k": k, "value": None, "bound": None,
                        "margin": None, "status": "skip", "note": note})

    for alpha in (0.5, 1.0, 2.0):
        dev = abs(bounds.gamma_asymptotic_ratio(1_000_000, alpha) - 1.0)
        add(f"gamma-asymptotic(alpha={alpha:g})", dev, 1e-3, dev <= 1e-3,
            note="|ratio - 1|")

    direct = bounds.direct_ratio_product(100, 10_000, 2.0 / 3.0)
    viag = bounds.gamma_ratio_product(100, 10_000, 2.0 / 3.0)
    rel = abs(viag - direct) / direct
    add("log-gamma-vs-direct-product", rel, 1e-10, rel <= 1e-10)

    res = max(bounds.upper_bound_identity_residual(k) for k in range(2, 51))
    add("upper-bound-identity(k=2..50)", res, 1e-12, res <= 1e-12)

    for k in ks:
        if k < 2:
            skip("claim1-tail", k, "not applicable: k >= 2 required")
            continue
        delta = 2.0 / (k - 1)
        limit = 1.0 / (delta * k - 1.0)
        value = bounds.claim1_tail_sum(args.x_tail, delta, k, tolerance=1e-5)
        add("claim1-tail", value, limit * 1.01, value <= limit * 1.01, k=k)

    rng_seed = seed
    import numpy as np
    rng = np.random.default_rng(rng_seed)
    worst = 0.0
    worst_resid = 0.0
    for _ in range(args.instances):
        n = int(rng.integers(2, 5))
        k = int(rng.integers(2, 4))
        prob = bounds.WaterFillProblem(tuple(float(v) for v in rng.uniform(0.2, 5.0, n)),
                                       float(rng.uniform(0.1, n - 0.1)), k)
        f, _alpha = bounds.waterfill_closed_form(prob)
        closed = bounds.waterfill_objective(prob, f)
        _gf, grid = bounds.waterfill_grid_oracle(prob, resolution=1e-7)
        worst = max(worst, abs(closed - grid))
        worst_resid = max(worst_resid, abs(sum(1.0 - v for v in f) - prob.budget))
    add(f"water-filling-vs-grid({args.instances} instances)", worst, 1e-4, worst <= 1e-4)
    add("water-filling-feasibility", worst_resid, 1e-10, worst_resid <= 1e-10)

    for k in ks:
        if k < 2:
            skip("lower-bound-closed-form", k, "not applicable: k >= 2 required")
            skip("lower-bound-quadrature", k, "not applicable: k >= 2 required")
            continue
        target = 4.0 * k / (k + 1) ** 2
        near = bounds.lower_bound_closed_form(k, 2.001)
        add("lower-bound-near-limit(a=2.001)", abs(near - target) / target, 0.01,
            abs(near - target) / target <= 0.01, k=k)
        try:
            res3 = bounds.lowerbound_value(bounds.LowerBoundConfig(k=k, a=3.0), tolerance=1e-6)
            add("lower-bound-quadrature(a=3)", res3.rel_gap, 1e-6,
                res3.rel_gap <= 1e-6, k=k)
        except RuntimeError as exc:
            add("lower-bound-quadrature(a=3)", None, 1e-6, False, k=k, note=str(exc))

    for k in ks:
        if k < 2:
            skip("product-formula-agreement", k, "not applicable: k >= 2 required")
            continue
        params = SearchParams(k)
        delta = params.delta
        worst_rel = 0.0
        for xp in range(1, 41):
            for tp in range(xp, 41):
                a = matrix.nested_survival(params, (k + 1) * xp, 2 * tp)
                b = bounds.gamma_ratio_product(xp, tp, delta)
                worst_rel = max(worst_rel, abs(a - b) / b)
        add("product-formula-agreement(x',t'<=40)", worst_rel, 1e-12, worst_rel <= 1e-12, k=k)

    for k in ks:
        view = matrix.SurvivalMatrix(StrategyKind.nested(), SearchParams(k), exact=True)
        worst_col = max(view.column_sum_residual(t, SearchParams(k).pool_limit(t))
                        for t in range(1, 101))
        add("column-identity(t<=100)", float(worst_col), 0.0, worst_col == 0, k=k)

    if not args.skip_theta:
        for k in ks:
            if k < 2:
                skip("lower-bound-dominance", k, "not applicable: k >= 2 required")
                continue
            est = matrix.theta_window(SearchParams(k), args.theta_x, epsilon=1e-6)
            lb = bounds.lower_bound_closed_form(k, 2.001)
            add("lower-bound-dominance", lb, est.theta * 1.02, lb <= est.theta * 1.02, k=k)

    return entries


def _cmd_verify_bounds(args, seed: int) -> int:
    entries = _verify_entries(args, seed)
    failures = [e["name"] for e in entries if e["status"] == "fail"]
    options = {"k": args.k or [2, 3, 5], "x_tail": args.x_tail, "theta_x": args.theta_x,
               "instances": args.instances, "skip_theta": args.skip_theta}
    payload = _report("verify-bounds", seed, options, entries)
    payload["failures"] = failures
    if args.format == "csv":
        lines = ["name,k,value,bound,margin,status"]
        for e in entries:
            lines.append(",".join(_fmt(e.get(c)) for c in ("name", "k", "value", "bound",
                                                           "margin", "status")))
        _emit("\n".join(lines) + "\n", args.output)
    else:
        _emit(_json_text(payload), args.output)
    return 1 if failures else 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    seed = args.seed if args.seed is not None else _default_seed()
    if args.subcommand == "matrix":
        return _cmd_matrix(args, seed)
    if args.subcommand == "speedup":
        return _cmd_speedup(args, seed)
    if args.subcommand == "robustness":
        return _cmd_robustness(args, seed)
    if args.subcommand == "crash":
        return _cmd_crash(args, seed)
    return _cmd_verify_bounds(args, seed)


if __name__ == "__main__":
    raise SystemExit(main())
