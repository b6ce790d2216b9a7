"""Command-line front end: ``qrl fit``, ``qrl predict``, ``qrl simulate``.

Exit status is 0 on success, 1 on a data, solver or variance error and 2 on
a usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import rng as rng_mod
from .data import QrlSpec, load_dataset
from .errors import QrlError
from .estimator import FitResult, fit_qrl, predict_residual_quantile, rearrange_quantiles
from .inference import coefficient_tests, coefficient_cis
from .survival import fit_censoring_survival
from .variance import DEFAULT_B, METHODS, estimate_variance

log = logging.getLogger("mqrl")

THREADS_ENV = "MQRL_THREADS"


class UsageError(Exception):
    pass


def _floats(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _methods(text: str) -> list[str]:
    out = [v.strip().upper() for v in text.split(",") if v.strip()]
    bad = [m for m in out if m not in METHODS]
    if bad or not out:
        raise argparse.ArgumentTypeError(f"unknown variance method(s) {bad}; choose from {','.join(METHODS).lower()}")
    return out


def _schema(text: str) -> dict:
    schema = {}
    for part in text.split(","):
        if "=" not in part:
            raise argparse.ArgumentTypeError(f"schema entries look like role=column, got {part!r}")
        role, col = (s.strip() for s in part.split("=", 1))
        if role not in ("cluster", "time", "status"):
            raise argparse.ArgumentTypeError(f"unknown schema role {role!r}")
        schema[role] = col
    return schema


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def _default_threads() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            log.warning("ignoring non-integer %s=%r", THREADS_ENV, env)
    return os.cpu_count() or 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qrl", description="Quantile residual lifetime regression for clustered data.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to standard error")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tau", type=_floats, default=[0.5], help="quantile levels, comma-separated")
    common.add_argument("--t0", type=_floats, default=[0.0], help="landmark times, comma-separated")
    common.add_argument("--variance", type=_methods, default=[], help="fr, ifr, cfs, rbs (comma-separated)")
    common.add_argument("--B", type=_positive, default=None, help=f"resampling size (default {DEFAULT_B} for fit)")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--strict", action="store_true", help="refuse to run randomized work without --seed")
    common.add_argument("--threads", type=_positive, default=None, help=f"worker processes (default ${THREADS_ENV} or CPU count)")
    common.add_argument("--level", type=float, default=0.95, help="confidence level")
    common.add_argument("--out", required=True)

    fit = sub.add_parser("fit", parents=[common], help="fit a QRL model to a CSV file")
    fit.add_argument("--data", required=True)
    fit.add_argument("--schema", type=_schema, default=None, help="column remap, e.g. cluster=id,time=T,status=D")

    pred = sub.add_parser("predict", help="predict residual-life quantiles from a fit JSON")
    pred.add_argument("--fit", required=True, dest="fit_json")
    pred.add_argument("--profiles", required=True, help="CSV with one column per covariate, optional 'id' column")
    pred.add_argument("--rearrange", action="store_true", help="make predictions monotone across the tau grid")
    pred.add_argument("--exp", action="store_true", help="report on the time scale instead of log scale")
    pred.add_argument("--out", required=True)

    sim = sub.add_parser("simulate", parents=[common], help="run a Monte Carlo study")
    sim.add_argument("--scenario", type=int, required=True, choices=range(1, 9), metavar="{1..8}")
    sim.add_argument("--n", type=_positive, default=200, help="clusters")
    sim.add_argument("--m", type=_positive, default=3, help="cluster size")
    sim.add_argument("--reps", type=_positive, default=500)
    sim.add_argument("--workers", type=_positive, default=None, help="alias of --threads")
    sim.add_argument("--timing", action="store_true", help="add mean runtime columns (not reproducible)")
    return parser


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".qrl-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _resolve_seed(args, randomized: bool) -> int | None:
    if args.seed is not None:
        return args.seed
    if not randomized:
        return None
    if args.strict:
        raise UsageError("--strict requires --seed for randomized work")
    seed = int(np.random.SeedSequence().entropy % 2**63)
    log.warning("no --seed given; using generated seed %d", seed)
    return seed


def _variance_task(args):
    method, ds, spec, alpha, B, seed = args
    try:
        return estimate_variance(method, ds, spec, alpha, B=B, seed=seed).to_dict()
    except (QrlError, ValueError) as exc:
        return {"method": method, "error": f"{type(exc).__name__}: {exc}"}


def _decorate(var: dict, alpha, level: float) -> dict:
    if "error" in var:
        return var
    cov = np.asarray(var["cov"])
    ci = coefficient_cis(alpha, cov, level)
    var["ci"] = [[_num(lo), _num(hi)] for lo, hi in ci]
    var["level"] = level
    var["tests"] = [
        {"statistic": _num(t.statistic), "p_value": _num(t.p_value), "stars": t.stars if np.isfinite(t.p_value) else ""}
        for t in coefficient_tests(alpha, cov)
    ]
    negative = [j for j in range(cov.shape[0]) if cov[j, j] < 0]
    if negative:
        var["negative_variance"] = negative
    var["se"] = [_num(s) for s in var["se"]]
    return var


def _num(v):
    v = float(v)
    return v if np.isfinite(v) else None


def cmd_fit(args) -> int:
    if not 0 < args.level < 1:
        raise UsageError("--level must lie in (0, 1)")
    seed = _resolve_seed(args, any(m != "CFS" for m in args.variance))
    B = args.B or DEFAULT_B
    ds = load_dataset(args.data, args.schema)
    curve = fit_censoring_survival(ds)
    cells, tasks = [], []
    for t0 in args.t0:
        for tau in args.tau:
            try:
                spec = QrlSpec(tau, t0)
                fit = fit_qrl(ds, spec, curve)
            except (QrlError, ValueError) as exc:
                cells.append({"tau": tau, "t0": t0, "error": f"{type(exc).__name__}: {exc}"})
                continue
            c = len(cells)
            cells.append({**fit.to_dict(), "variance": {}})
            for m in args.variance:
                vseed = None if seed is None else int(rng_mod.stream(seed, rng_mod.STREAM_VARIANCE, c).integers(2**63))
                tasks.append((c, (m, ds, spec, fit.alpha_hat, B, vseed)))
    threads = args.threads or _default_threads()
    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(threads, len(tasks))) as pool:
            results = list(pool.map(_variance_task, [t for _, t in tasks]))
    else:
        results = [_variance_task(t) for _, t in tasks]
    for (c, t), res in zip(tasks, results):
        cells[c]["variance"][t[0]] = _decorate(res, t[3], args.level)
    doc = {"data": os.path.basename(args.data), "seed": seed, "B": B, "cells": cells}
    _atomic_write(args.out, json.dumps(doc, indent=2) + "\n")
    failed = [c for c in cells if "error" in c]
    for c in failed:
        print(f"qrl: cell tau={c['tau']} t0={c['t0']}: {c['error']}", file=sys.stderr)
    return 1 if len(failed) == len(cells) else 0


def _read_profiles(path, names):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: no profiles")
    missing = [n for n in names if n not in rows[0]]
    if missing:
        raise ValueError(f"{path}: missing covariate column(s) {missing}")
    out = []
    for k, row in enumerate(rows, start=2):
        try:
            x = [1.0] + [float(row[n]) for n in names]
        except ValueError:
            raise ValueError(f"{path}: row {k}: non-numeric covariate") from None
        out.append((row.get("id", str(k - 1)), x))
    return out


def cmd_predict(args) -> int:
    with open(args.fit_json, encoding="utf-8") as fh:
        doc = json.load(fh)
    fits = [FitResult.from_dict(c) for c in doc["cells"] if "error" not in c]
    if not fits:
        raise ValueError(f"{args.fit_json}: no fitted cells")
    names = fits[0].covariate_names
    profiles = _read_profiles(args.profiles, names)
    lines = ["id,t0,tau,theta"]
    for pid, x in profiles:
        for t0 in sorted({f.t0 for f in fits}):
            grid = sorted((f.tau, predict_residual_quantile(f, x)) for f in fits if f.t0 == t0)
            if args.rearrange:
                grid = rearrange_quantiles(grid)
            for tau, theta in grid:
                v = float(np.exp(theta)) if args.exp else theta
                lines.append(f"{pid},{t0!r},{tau!r},{v!r}")
    _atomic_write(args.out, "\n".join(lines) + "\n")
    return 0


def cmd_simulate(args) -> int:
    from .simulation import run_monte_carlo, scenario

    if not 0 < args.level < 1:
        raise UsageError("--level must lie in (0, 1)")
    if args.reps < 2:
        raise UsageError("--reps must be at least 2")
    seed = _resolve_seed(args, True)
    spec = scenario(args.scenario, n=args.n, m=args.m, taus=tuple(args.tau), t0s=tuple(args.t0))
    workers = args.workers or args.threads or _default_threads()
    table = run_monte_carlo(spec, args.reps, args.variance, B=args.B or 200, seed=seed, workers=workers, level=args.level)
    _atomic_write(args.out, table.to_csv(timing=args.timing))
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="qrl: %(message)s")
    handler = {"fit": cmd_fit, "predict": cmd_predict, "simulate": cmd_simulate}[args.command]
    try:
        return handler(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"qrl: error: {exc}", file=sys.stderr)
        return 2
    except (QrlError, ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"qrl: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
