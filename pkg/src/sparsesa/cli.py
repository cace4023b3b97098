"""Command-line entry point: ``sparsesa {solve,cv,synth,validate}``.

Exit codes: 0 success, 1 usage, 2 data error, 3 numerical failure (including
a failed ``validate`` check).

Every JSON output embeds the resolved configuration under ``"config"``;
passing that file back with ``--config`` replays the run.  The thread count
and output directory are left out of it because they never change results.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import baselines, io
from .cv import make_folds, sweep_k, top_selected
from .errors import DimensionMismatch, ParseError, SparseSAError, TooLarge
from .linalg import Instance
from .rng import make_rng
from .sampler import Schedule, anneal, random_support, run_fixed_beta, visit_frequencies
from .synthetic import SynthParams, generate

log = logging.getLogger("sparsesa")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
VALIDATE_STREAM = 0xB0175
# Configuration keys that cannot influence results.
_NOT_CONFIG = {"func", "threads", "out_dir", "config", "verbose"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_k_set(text: str) -> list[int]:
    """``"1..5"``, ``"2:16:2"`` (inclusive stop) or ``"1,2,4"``."""
    text = str(text).strip()
    try:
        if ".." in text:
            lo, hi = text.split("..")
            return list(range(int(lo), int(hi) + 1))
        if ":" in text:
            parts = [int(p) for p in text.split(":")]
            step = parts[2] if len(parts) == 3 else 1
            return list(range(parts[0], parts[1] + 1, step))
        return sorted({int(p) for p in text.split(",") if p.strip()})
    except ValueError:
        raise UsageError(f"cannot parse K set {text!r}") from None


def _schedule(args) -> Schedule:
    return Schedule(args.beta0, args.ratio, args.stages, args.sweeps)


def _config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in _NOT_CONFIG}


def _load(args) -> Instance:
    if not args.input:
        raise UsageError("--input is required")
    inst = io.load_instance(args.input, standardize=args.standardize,
                            response_col=args.response_col, scale=args.scale)
    log.info("loaded %s: M=%d, N=%d", args.input, inst.m, inst.n)
    return inst


def _pmap(fn, items, threads):
    """Ordered map over a thread pool; results do not depend on ``threads``."""
    threads = threads or os.cpu_count() or 1
    if threads == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_solve(args) -> int:
    inst = _load(args)
    k = args.k
    if k > inst.m:
        raise UsageError(f"K={k} exceeds M={inst.m}; K <= M is required")
    if args.restarts < 1:
        raise UsageError("--restarts must be at least 1")
    schedule = _schedule(args)
    runs = _pmap(lambda r: anneal(inst, k, schedule, rng=make_rng(args.seed, r)),
                 range(args.restarts), args.threads)
    best = min(runs, key=lambda r: r.best_rss)
    omp_support, omp_state = baselines.omp(inst, k)

    out = _out_dir(args)
    io.write_json(out / "solve.json", {
        "config": _config(args),
        "m": inst.m,
        "n": inst.n,
        "k": k,
        "best_support": list(best.best_support.ones),
        "coefficients": best.best_state.coeffs.tolist(),
        "rss": best.best_rss,
        "eps": best.best_rss / inst.m,
        "restart_rss": [r.best_rss for r in runs],
        "best_restart": runs.index(best),
        "accepted": best.accepted,
        "proposed": best.proposed,
        "trace": [{"beta": b, "eps": e} for b, e in best.trace],
        "omp": {
            "support": list(omp_support.ones),
            "coefficients": omp_state.coeffs.tolist(),
            "rss": omp_state.rss,
            "eps": omp_state.rss / inst.m,
        },
    })
    io.write_csv(out / "trace.csv", ["beta", "T", "eps"],
                 [(b, 1.0 / b if b > 0 else float("inf"), e) for b, e in best.trace])
    print(f"K={k}: RSS={best.best_rss:.10g} (OMP {omp_state.rss:.10g}), support {list(best.best_support.ones)}")
    return EXIT_OK


def cmd_cv(args) -> int:
    inst = _load(args)
    k_set = parse_k_set(args.k_set)
    plan = make_folds(inst.m, args.folds, seed=args.seed)
    report = sweep_k(inst, k_set, _schedule(args), plan, base_seed=args.seed,
                     restarts=args.restarts, threads=args.threads)
    out = _out_dir(args)
    io.write_json(out / "cv.json", {"config": _config(args), "m": inst.m, "n": inst.n,
                                     "n_folds": len(plan), **report.to_dict()})
    io.write_csv(out / "looe.csv", ["K", "looe", "failed_folds"],
                 [(k, report.looe[k], len(report.failures.get(k, []))) for k in report.k_values])
    rows = []
    for k in report.k_values:
        for rank, (var, count) in enumerate(top_selected(report.frequencies[k], args.top), start=1):
            rows.append((k, rank, "*" if var is None else var, count))
    io.write_csv(out / "frequencies.csv", ["K", "rank", "variable", "times_selected"], rows)
    for k in report.k_values:
        print(f"K={k}: looe={report.looe[k]:.6g}")
    print(f"best K = {report.best_k}")
    return EXIT_OK


def cmd_synth(args) -> int:
    params = SynthParams(n=args.n, alpha=args.alpha, rho0=args.rho0, sigma_x2=args.sigma_x2,
                         sigma_xi2=args.sigma_xi2, seed=args.seed, n_nonzero=args.n_nonzero)
    planted = generate(params)
    out = _out_dir(args)
    io.write_instance(out / args.name, planted.instance)
    io.write_json(out / (Path(args.name).stem + ".truth.json"), {
        "config": _config(args),
        "params": params.to_dict(),
        "m": params.m,
        "seed": params.seed,
        "x0": planted.x0.tolist(),
        "true_support": list(planted.true_support.ones),
    })
    print(f"wrote {out / args.name}: M={params.m}, N={params.n}, |support|={len(planted.true_support)}")
    return EXIT_OK


def cmd_validate(args) -> int:
    inst = _load(args)
    k = args.k
    schedule = _schedule(args)
    opt_support, opt_rss = baselines.exhaustive(inst, k, cap=args.cap)
    table = baselines.enumerate_boltzmann(inst, k, args.beta, cap=args.cap)
    omp_support, omp_state = baselines.omp(inst, k)

    tol = 1e-10 * max(opt_rss, 1e-300) + 1e-12 * 0.5 * inst.yy
    runs = _pmap(lambda t: anneal(inst, k, schedule, rng=make_rng(args.seed, t)),
                 range(args.trials), args.threads)
    gaps = [r.best_rss - opt_rss for r in runs]
    hits = sum(g <= tol for g in gaps)

    rng = make_rng(args.seed, VALIDATE_STREAM)
    start = random_support(inst, k, rng)
    _, stats = run_fixed_beta(start, args.beta, args.steps / inst.n, inst, rng, record=True)
    tv = baselines.total_variation(visit_frequencies(stats.visits), table.as_dict())

    sa_ok = hits >= args.min_hits
    tv_ok = tv < args.tv_tol
    out = _out_dir(args)
    io.write_json(out / "validate.json", {
        "config": _config(args),
        "m": inst.m,
        "n": inst.n,
        "exhaustive": {"support": list(opt_support.ones), "rss": opt_rss},
        "omp": {"support": list(omp_support.ones), "rss": omp_state.rss,
                "gap": omp_state.rss - opt_rss},
        "anneal": {"trials": args.trials, "hits": hits, "required": args.min_hits,
                   "max_gap": max(gaps) if gaps else 0.0, "pass": sa_ok},
        "equilibrium": {"beta": args.beta, "steps": stats.steps, "tv": tv,
                        "tolerance": args.tv_tol, "pass": tv_ok},
        "pass": sa_ok and tv_ok,
    })
    print(f"anneal vs exhaustive: {hits}/{args.trials} optimal (need {args.min_hits}) "
          f"{'PASS' if sa_ok else 'FAIL'}")
    print(f"fixed beta={args.beta}: TV={tv:.5f} (< {args.tv_tol}) {'PASS' if tv_ok else 'FAIL'}")
    print(f"OMP gap: {omp_state.rss - opt_rss:.6g}")
    return EXIT_OK if sa_ok and tv_ok else EXIT_NUMERIC


def _add_common(p, needs_input=True):
    p.add_argument("--config", help="JSON file of option defaults (e.g. a previous output)")
    if needs_input:
        p.add_argument("--input", help="instance CSV")
        p.add_argument("--response-col", default="y", help="response column name or index")
        p.add_argument("--standardize", action="store_true", help="center y and every column")
        p.add_argument("--scale", action="store_true", help="also scale columns to unit variance")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default=".")
    p.add_argument("-v", "--verbose", action="store_true")


def _add_schedule(p):
    d = Schedule()
    p.add_argument("--beta0", type=float, default=d.beta0)
    p.add_argument("--ratio", type=float, default=d.ratio)
    p.add_argument("--stages", type=int, default=d.stages)
    p.add_argument("--sweeps", type=float, default=d.sweeps_per_stage,
                   help="proposals per column at each temperature")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sparsesa", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="anneal for one K and compare with OMP")
    _add_common(p)
    _add_schedule(p)
    p.add_argument("--k", type=int, required=False)
    p.add_argument("--restarts", type=int, default=1)
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("cv", help="cross-validated sweep over K")
    _add_common(p)
    _add_schedule(p)
    p.add_argument("--k-set", default=None, help="e.g. 1..5, 2:16:2 or 1,2,4")
    p.add_argument("--folds", default="loo", help="loo or k:<n>")
    p.add_argument("--restarts", type=int, default=1)
    p.add_argument("--threads", type=int, default=None, help="worker threads (default: all cores)")
    p.add_argument("--top", type=int, default=5, help="variables per K in frequencies.csv")
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("synth", help="write a planted synthetic instance")
    _add_common(p, needs_input=False)
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--rho0", type=float, default=0.1)
    p.add_argument("--sigma-x2", type=float, default=10.0)
    p.add_argument("--sigma-xi2", type=float, default=0.1)
    p.add_argument("--n-nonzero", type=int, default=None)
    p.add_argument("--name", default="instance.csv")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("validate", help="desk-scale check against exhaustive enumeration")
    _add_common(p)
    _add_schedule(p)
    p.add_argument("--k", type=int, required=False)
    p.add_argument("--beta", type=float, default=2.0, help="inverse temperature of the equilibrium check")
    p.add_argument("--steps", type=int, default=1_000_000)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--min-hits", type=int, default=95)
    p.add_argument("--tv-tol", type=float, default=0.02)
    p.add_argument("--cap", type=int, default=baselines.ENUM_CAP)
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_validate)
    return parser


def _parse(parser, argv):
    args = parser.parse_args(argv)
    if args.config:
        cfg = io.read_json(args.config)
        cfg = cfg.get("config", cfg)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        sub.set_defaults(**{k: v for k, v in cfg.items() if k not in _NOT_CONFIG | {"command"}})
        args = parser.parse_args(argv)
    return args


def main(argv=None) -> int:
    parser = build_parser()
    args = _parse(parser, argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command in ("solve", "validate") and args.k is None:
        parser.error("--k is required")
    if args.command == "cv" and args.k_set is None:
        parser.error("--k-set is required")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TooLarge as exc:
        print(f"error: {exc}. Enumeration-based validation is for small instances only.",
              file=sys.stderr)
        return EXIT_DATA
    except (ParseError, DimensionMismatch, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SparseSAError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
