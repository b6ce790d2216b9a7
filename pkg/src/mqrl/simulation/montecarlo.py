"""Monte Carlo harness: simulate, fit, estimate variances, summarise.

Replicate ``r`` draws its data from the stream keyed ``(seed, DATA, r)`` and
hands each variance estimator a seed derived from ``(seed, VARIANCE, r,
cell)``, so the summary depends only on ``seed`` and never on how replicates
are spread over worker processes. Results are always aggregated in replicate
order.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .. import rng as rng_mod
from ..data import QrlSpec
from ..errors import QrlError
from ..estimator import fit_qrl
from ..inference import normal_quantile
from ..survival import fit_censoring_survival
from ..variance import MAX_FAILURE_FRACTION, estimate_variance
from .scenarios import ScenarioSpec, generate_scenario, true_coefficients

__all__ = ["SummaryTable", "run_replicate", "run_monte_carlo"]

log = logging.getLogger(__name__)


def _cells(spec: ScenarioSpec):
    return [(tau, t0) for t0 in spec.t0s for tau in spec.taus]


def run_replicate(spec: ScenarioSpec, r: int, methods: Sequence[str], B: int, seed: int) -> dict:
    """Fit and estimate variances for replicate ``r``.

    Returns ``{"alpha": {cell: array|None}, "se": {(cell, method): array|None},
    "seconds": {(cell, method): float}, "censoring": float}``.
    """
    sim = generate_scenario(spec, rng_mod.stream(seed, rng_mod.STREAM_DATA, r))
    ds = sim.dataset
    curve = fit_censoring_survival(ds)
    out = {"alpha": {}, "se": {}, "seconds": {}, "censoring": sim.censoring_rate}
    for c, cell in enumerate(_cells(spec)):
        tau, t0 = cell
        q = QrlSpec(tau, t0)
        try:
            fit = fit_qrl(ds, q, curve)
        except (QrlError, ValueError) as exc:
            log.debug("replicate %d cell %s: fit failed: %s", r, cell, exc)
            out["alpha"][cell] = None
            continue
        out["alpha"][cell] = fit.alpha_hat
        vseed = int(rng_mod.stream(seed, rng_mod.STREAM_VARIANCE, r, c).integers(2**63))
        for m in methods:
            start = time.perf_counter()
            try:
                est = estimate_variance(m, ds, q, fit.alpha_hat, B=B, seed=vseed, curve=curve)
                out["se"][cell, m] = est.se
            except (QrlError, ValueError) as exc:
                log.debug("replicate %d cell %s %s failed: %s", r, cell, m, exc)
                out["se"][cell, m] = None
            out["seconds"][cell, m] = time.perf_counter() - start
    return out


def _replicate_task(args):
    return run_replicate(*args)


@dataclass
class SummaryTable:
    """Per-coefficient Monte Carlo summary.

    Each row holds ``coef, t0, tau, truth, bias, MCSD, fits`` and, per
    variance method ``M``, ``ASE_M``, ``CP_M``, ``fail_M`` and ``runtime_M``
    (mean seconds per replicate). ``flagged`` rows had more than 10% failed
    fits or variance estimates.
    """

    scenario: int
    reps: int
    seed: int
    methods: tuple[str, ...]
    rows: list[dict] = field(default_factory=list)
    censoring_rate: float = float("nan")

    def row(self, coef: int, t0: float, tau: float) -> dict:
        for r in self.rows:
            if r["coef"] == coef and r["t0"] == t0 and r["tau"] == tau:
                return r
        raise KeyError((coef, t0, tau))

    def to_csv(self, timing: bool = False) -> str:
        """CSV text, one line per coefficient and cell.

        Wall-clock columns are only written with ``timing=True`` since they
        are the one part of the table that is not reproducible.
        """
        head = ["coef", "t0", "tau", "truth", "bias", "MCSD", "fits"]
        for m in self.methods:
            head += [f"ASE_{m}", f"CP_{m}", f"fail_{m}"] + ([f"runtime_{m}"] if timing else [])
        head.append("flagged")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(head)
        for r in self.rows:
            line = [f"alpha{r['coef']}", _fmt(r["t0"]), _fmt(r["tau"]), _fmt(r["truth"]), _fmt(r["bias"]), _fmt(r["MCSD"]), r["fits"]]
            for m in self.methods:
                line += [_fmt(r[f"ASE_{m}"]), _fmt(r[f"CP_{m}"]), r[f"fail_{m}"]]
                if timing:
                    line.append(_fmt(r[f"runtime_{m}"]))
            line.append(int(r["flagged"]))
            w.writerow(line)
        return buf.getvalue()

    def write_csv(self, path, timing: bool = False) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv(timing))


def _fmt(v) -> str:
    if isinstance(v, float) and math.isnan(v):
        return "NA"
    return f"{v:.6f}" if isinstance(v, float) else str(v)


def _summarise(spec, results, methods, level, seed) -> SummaryTable:
    z = normal_quantile(0.5 + level / 2.0)
    reps = len(results)
    table = SummaryTable(spec.id, reps, seed, tuple(methods))
    table.censoring_rate = float(np.mean([res["censoring"] for res in results]))
    for cell in _cells(spec):
        tau, t0 = cell
        truth = true_coefficients(spec, tau, t0)
        ok = [i for i, res in enumerate(results) if res["alpha"].get(cell) is not None]
        est = np.array([results[i]["alpha"][cell] for i in ok]).reshape(len(ok), spec.p)
        for j in range(spec.p):
            row = {
                "coef": j,
                "t0": t0,
                "tau": tau,
                "truth": float(truth[j]),
                "bias": float(est[:, j].mean() - truth[j]) if ok else float("nan"),
                "MCSD": float(est[:, j].std(ddof=1)) if len(ok) > 1 else float("nan"),
                "fits": len(ok),
            }
            flagged = reps - len(ok) > MAX_FAILURE_FRACTION * reps
            for m in methods:
                se = [(i, results[i]["se"][cell, m]) for i in ok if results[i]["se"].get((cell, m)) is not None]
                good = [(i, s[j]) for i, s in se if np.isfinite(s[j])]
                fails = len(ok) - len(good)
                if good:
                    ses = np.array([s for _, s in good])
                    hits = [abs(results[i]["alpha"][cell][j] - truth[j]) <= z * s for i, s in good]
                    row[f"ASE_{m}"] = float(ses.mean())
                    row[f"CP_{m}"] = float(np.mean(hits))
                else:
                    row[f"ASE_{m}"] = row[f"CP_{m}"] = float("nan")
                row[f"fail_{m}"] = fails
                secs = [results[i]["seconds"][cell, m] for i in ok]
                row[f"runtime_{m}"] = float(np.mean(secs)) if secs else float("nan")
                flagged = flagged or fails > MAX_FAILURE_FRACTION * reps
            row["flagged"] = flagged
            table.rows.append(row)
    return table


def run_monte_carlo(
    spec: ScenarioSpec,
    reps: int,
    methods: Sequence[str] = ("FR",),
    B: int = 200,
    seed: int = 0,
    workers: int = 1,
    level: float = 0.95,
) -> SummaryTable:
    """Run ``reps`` replicates of ``spec`` and summarise bias, Monte Carlo SD,
    average standard errors and coverage of ``level`` Wald intervals.

    ``workers > 1`` spreads replicates over processes; the table is identical
    for any worker count.
    """
    if reps < 2:
        raise ValueError("need at least two replicates")
    if workers < 1:
        raise ValueError("workers must be positive")
    methods = tuple(m.upper() for m in methods)
    tasks = [(spec, r, methods, B, seed) for r in range(reps)]
    if workers == 1:
        results = [run_replicate(*t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_replicate_task, tasks, chunksize=max(1, reps // (4 * workers))))
    return _summarise(spec, results, methods, level, seed)
