"""Command-line front end: ``qcw <command> [options]``.

Every command writes its payload (CSV or JSON) to ``--out`` (default stdout)
and a run manifest next to it (``<out>.manifest.json``; on stderr when the
payload goes to stdout). Exit codes: 0 success, 1 numeric or verification
failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import io
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

from . import __version__
from .circle import ModelParams
from .errors import ParameterError, QCWError

logger = logging.getLogger("qcw")

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".15g")
    return str(x)


def to_csv(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if np.isfinite(x) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def to_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, ensure_ascii=False) + "\n"


def _threads(args) -> int:
    env = os.environ.get("QCW_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError as exc:
            raise UsageError(f"QCW_THREADS must be an integer, got {env!r}") from exc
    else:
        n = args.threads or os.cpu_count() or 1
    if n < 1:
        raise UsageError("thread count must be positive")
    return n


def _pool_map(fn: Callable, items, threads: int) -> list:
    """Map in a worker pool; results come back in input order."""
    if threads == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------------------
# commands; each returns (payload text, status, extra manifest fields)
# ---------------------------------------------------------------------------


def cmd_critical_curve(args):
    from .mean_field import critical_lambda

    if args.steps < 1:
        raise UsageError("--steps must be positive")
    if args.beta_max < args.beta_min:
        raise UsageError("--beta-max must be >= --beta-min")
    betas = np.linspace(args.beta_min, args.beta_max, args.steps) if args.steps > 1 else np.array([args.beta_min])
    lams = _pool_map(critical_lambda, betas, _threads(args))
    rows = [[b, l] for b, l in zip(betas, lams) if l is not None]
    warnings = []
    skipped = int(np.sum([l is None for l in lams]))
    if skipped:
        warnings.append(f"{skipped} beta values <= 1 have no critical transverse field and were omitted")
        logger.warning(warnings[-1])
    if args.format == "json":
        text = to_json({"beta": [r[0] for r in rows], "lambda_c": [r[1] for r in rows], "warnings": warnings})
    else:
        text = to_csv(["beta", "lambda_c"], rows)
    return text, EXIT_OK, {"warnings": warnings}


def cmd_mstar(args):
    from .mean_field import solve_m_star

    sol = solve_m_star(args.lam, args.beta)
    rec = {"m_star": sol.m_star, "f": sol.f, "s4": sol.s4, "g_value": sol.g_value, "prediction": sol.m_star_prediction}
    if args.json:
        return to_json(rec), EXIT_OK, {}
    return to_csv(list(rec), [list(rec.values())]), EXIT_OK, {}


def cmd_exponent(args):
    from .mean_field import lambda_for_f, solve_m_star

    try:
        deltas = [float(x) for x in args.f_minus_one_list.split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --f-minus-one-list: {exc}") from exc
    if not deltas or any(d <= 0 for d in deltas):
        raise UsageError("--f-minus-one-list needs positive numbers")

    def point(d):
        lam = lambda_for_f(1.0 + d, args.beta)
        s = solve_m_star(lam, args.beta)
        return {"lambda": lam, "f": s.f, "m_star": s.m_star, "prediction": s.m_star_prediction,
                "ratio": s.m_star / s.m_star_prediction}

    recs = _pool_map(point, deltas, _threads(args))
    slope = None
    if len(recs) >= 2:
        slope = float(np.polyfit(np.log(deltas), np.log([r["m_star"] for r in recs]), 1)[0])
    if args.format == "json":
        return to_json({"beta": args.beta, "points": recs, "fitted_exponent": slope}), EXIT_OK, {}
    header = ["lambda", "f", "m_star", "prediction", "ratio"]
    return to_csv(header, [[r[k] for k in header] for r in recs]), EXIT_OK, {"fitted_exponent": slope}


def cmd_ed(args):
    from .ed import block_free_energy, dense_ed, path_moments

    params = ModelParams(beta=args.beta, lam=args.lam, h=args.h)
    method = "dense" if args.dense else "blocks" if args.blocks else ("dense" if args.n <= 10 else "blocks")
    res = dense_ed(params, args.n) if method == "dense" else block_free_energy(params, args.n)
    moments = path_moments(params, args.n, method=method)
    out = {
        "n": args.n, "lambda": args.lam, "beta": args.beta, "h": args.h, "method": method,
        "free_energy_density": res.free_energy_density, "mz_moments": list(res.mz_moments),
        "mx_mean": res.mx_mean,
        "diag_pmf": {"levels": list(res.diag_pmf.keys()), "probabilities": list(res.diag_pmf.values())},
        "path_moments": list(moments),
    }
    return to_json(out), EXIT_OK, {}


def cmd_pimc(args):
    from .pimc import ChainConfig, McParams, run_chain

    params = ModelParams(beta=args.beta, lam=args.lam, h=args.h)
    burn = None if args.burn_in < 0 else args.burn_in
    mc = McParams(args.sweeps, burn, args.seed, args.sampler)
    stats = run_chain(ChainConfig(params, args.n, args.slices), mc)
    out = {"n": args.n, "slices": args.slices, "sampler": args.sampler, "lambda": args.lam, "beta": args.beta,
           "h": args.h, "stats": stats.as_dict()}
    return to_json(out), EXIT_OK, {}


def cmd_verify(args):
    from . import verify_suites

    if args.cases < 1:
        raise UsageError("--cases must be positive")
    suites = verify_suites.SUITES if args.suite == "all" else [args.suite]
    report = {}
    failures = 0
    for name in suites:
        rng = np.random.default_rng(np.random.SeedSequence([args.seed, verify_suites.SUITES.index(name)]))
        cases = verify_suites.run(name, args.cases, rng)
        failures += sum(not c["pass"] for c in cases)
        report[name] = {"passed": sum(c["pass"] for c in cases), "failed": sum(not c["pass"] for c in cases), "cases": cases}
    status = EXIT_OK if failures == 0 else EXIT_FAILURE
    return to_json({"seed": args.seed, "suites": report, "all_passed": failures == 0}), status, {"failures": failures}


# ---------------------------------------------------------------------------
# parser and driver
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qcw", description="Quantum Curie-Weiss numerical laboratory.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, fmt=False):
        sp.add_argument("--out", default="-", help="output path ('-' for stdout)")
        sp.add_argument("--threads", type=int, default=None, help="worker threads (QCW_THREADS overrides)")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("-v", "--verbose", action="store_true")
        if fmt:
            sp.add_argument("--format", choices=("csv", "json"), default="csv")

    sp = sub.add_parser("critical-curve", help="lambda_c(beta) on a beta grid")
    sp.add_argument("--beta-min", type=float, required=True)
    sp.add_argument("--beta-max", type=float, required=True)
    sp.add_argument("--steps", type=int, default=50)
    common(sp, fmt=True)
    sp.set_defaults(func=cmd_critical_curve)

    sp = sub.add_parser("mstar", help="spontaneous magnetisation at one point")
    sp.add_argument("--lambda", dest="lam", type=float, required=True)
    sp.add_argument("--beta", type=float, required=True)
    sp.add_argument("--json", action="store_true")
    common(sp)
    sp.set_defaults(func=cmd_mstar)

    sp = sub.add_parser("exponent", help="m* against its leading-order prediction near f = 1")
    sp.add_argument("--beta", type=float, required=True)
    sp.add_argument("--f-minus-one-list", required=True, help="comma-separated values of f - 1")
    common(sp, fmt=True)
    sp.set_defaults(func=cmd_exponent)

    sp = sub.add_parser("ed", help="exact diagonalisation")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--lambda", dest="lam", type=float, required=True)
    sp.add_argument("--beta", type=float, required=True)
    sp.add_argument("--h", type=float, default=0.0)
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--dense", action="store_true")
    g.add_argument("--blocks", action="store_true")
    common(sp)
    sp.set_defaults(func=cmd_ed)

    sp = sub.add_parser("pimc", help="path-integral Monte Carlo chain")
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--slices", type=int, default=256)
    sp.add_argument("--sweeps", type=int, required=True)
    sp.add_argument("--burn-in", type=int, default=-1, help="negative: ten pilot autocorrelation times")
    sp.add_argument("--sampler", choices=("trotter", "ct"), default="trotter")
    sp.add_argument("--lambda", dest="lam", type=float, required=True)
    sp.add_argument("--beta", type=float, required=True)
    sp.add_argument("--h", type=float, default=0.0)
    common(sp)
    sp.set_defaults(func=cmd_pimc)

    sp = sub.add_parser("verify", help="run inequality verification suites")
    sp.add_argument("--suite", choices=("ursell", "rp", "mincons", "rate", "fk", "all"), default="all")
    sp.add_argument("--cases", type=int, default=20)
    common(sp)
    sp.set_defaults(func=cmd_verify)
    return p


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat()


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on usage errors
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    start = _now()
    params = {k: v for k, v in vars(args).items() if k != "func"}
    try:
        text, status, extra = args.func(args)
    except (UsageError, ParameterError) as exc:
        parser.print_usage(sys.stderr)
        print(f"qcw {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (QCWError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(json.dumps({"command": args.command, "error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_FAILURE
    manifest = {
        "command": args.command,
        "parameters": params,
        "seed": args.seed,
        "version": __version__,
        "start": start,
        "end": _now(),
        "output_sha256": hashlib.sha256(text.encode("utf-8")).hexdigest(),
        **extra,
    }
    try:
        if args.out == "-":
            sys.stdout.write(text)
            sys.stdout.flush()
            print(json.dumps(_jsonable({"manifest": manifest})), file=sys.stderr)
        else:
            with open(args.out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            with open(args.out + ".manifest.json", "w", encoding="utf-8") as fh:
                fh.write(to_json(manifest))
    except OSError as exc:
        print(json.dumps({"command": args.command, "error": "OSError", "message": str(exc)}), file=sys.stderr)
        return EXIT_FAILURE
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
