"""IPCW estimation of quantile residual lifetime coefficients.

For a landmark time ``t0`` and quantile level ``tau`` the model is

    log(T - t0) = x' alpha + e,   tau-quantile of e given T >= t0 is 0,

and ``alpha`` solves the censoring-weighted estimating equation
``S_N(alpha) = 0``. The root is found as the minimiser of a weighted
check-loss problem on an augmented sample: every at-risk row contributes its
log residual time with weight ``status * G(t0)/G(Y)``, plus one pseudo row with
response ``A`` and covariates scaled by ``1 - status * G(t0)/G(Y)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data import ClusteredDataset, QrlSpec, validate_for_fit
from .errors import QrlError, RiskSetError, SolverError
from .solver import WqrProblem, solve_weighted_qr
from .survival import KmCurve, fit_censoring_survival, ipcw_ratio

__all__ = [
    "FitResult",
    "GridCell",
    "A_MARGIN",
    "build_augmented_problem",
    "evaluate_score",
    "fit_qrl",
    "fit_quantile_grid",
    "rearrange_quantiles",
    "predict_residual_quantile",
]

log = logging.getLogger(__name__)

A_MARGIN = 100.0


@dataclass(frozen=True, eq=False)
class FitResult:
    alpha_hat: np.ndarray
    tau: float
    t0: float
    risk_set_size: int
    score_sup_norm: float
    A_used: float
    n: int
    N: int
    covariate_names: tuple[str, ...] = ()
    solver: dict = field(default_factory=dict)

    @property
    def p(self) -> int:
        return int(self.alpha_hat.shape[0])

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "t0": self.t0,
            "alpha": [float(a) for a in self.alpha_hat],
            "score_sup_norm": self.score_sup_norm,
            "risk_set_size": self.risk_set_size,
            "A_used": self.A_used,
            "n": self.n,
            "N": self.N,
            "covariates": ["(Intercept)", *self.covariate_names],
            "solver": dict(self.solver),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FitResult":
        names = tuple(d.get("covariates", ["(Intercept)"])[1:])
        return cls(
            alpha_hat=np.asarray(d["alpha"], dtype=float),
            tau=float(d["tau"]),
            t0=float(d["t0"]),
            risk_set_size=int(d["risk_set_size"]),
            score_sup_norm=float(d["score_sup_norm"]),
            A_used=float(d["A_used"]),
            n=int(d["n"]),
            N=int(d["N"]),
            covariate_names=names,
            solver=dict(d.get("solver", {})),
        )


def _row_weights(dataset, t0, curve):
    """At-risk mask and IPCW ratio ``status * G(t0)/G(Y)`` on the at-risk rows."""
    at_risk = dataset.time >= t0
    ratio = np.zeros(dataset.N)
    events = at_risk & (dataset.status == 1)
    if events.any():
        ratio[events] = ipcw_ratio(curve, t0, dataset.time[events])
    return at_risk, ratio


def build_augmented_problem(
    dataset: ClusteredDataset,
    spec: QrlSpec,
    curve: KmCurve,
    obs_weights=None,
    A: float | None = None,
) -> tuple[WqrProblem, float]:
    """Assemble the weighted check-loss problem whose minimiser is ``alpha``.

    Parameters
    ----------
    obs_weights : array_like, shape (N,), optional
        Per-row multipliers (the perturbation weights of a resampling
        replicate); both rows generated by an observation are scaled.
    A : float, optional
        Pseudo response. Defaults to the largest at-risk event log residual
        time plus :data:`A_MARGIN`.

    Returns
    -------
    problem, A
    """
    at_risk, ratio = _row_weights(dataset, spec.t0, curve)
    if not at_risk.any():
        raise RiskSetError(f"empty risk set at t0={spec.t0}")
    gamma = np.ones(dataset.N) if obs_weights is None else np.asarray(obs_weights, dtype=float)

    # Y == t0 has no log residual time: drop it from the real rows only
    real = at_risk & (dataset.time > spec.t0)
    log_res = np.log(dataset.time[real] - spec.t0)
    if A is None:
        ev = dataset.status[real] == 1
        top = log_res[ev].max() if ev.any() else (log_res.max() if log_res.size else 0.0)
        A = float(top) + A_MARGIN

    X = dataset.X
    X_real = X[real]
    w_real = gamma[real] * ratio[real]
    X_pseudo = (1.0 - ratio[at_risk])[:, None] * X[at_risk]
    w_pseudo = gamma[at_risk]
    problem = WqrProblem(
        np.concatenate([log_res, np.full(int(at_risk.sum()), A)]),
        np.vstack([X_real, X_pseudo]),
        np.concatenate([w_real, w_pseudo]),
        spec.tau,
    )
    return problem, A


def _solve_augmented(dataset, spec, curve, obs_weights=None, A=None):
    """Solve the augmented problem, enlarging ``A`` until every pseudo row sits
    strictly above its fitted value (otherwise the pseudo rows stop acting as a
    linear term and the minimiser is no longer a root of the score)."""
    for _ in range(8):
        problem, A_used = build_augmented_problem(dataset, spec, curve, obs_weights, A)
        sol = solve_weighted_qr(problem)
        n_real = problem.responses.shape[0] - int((dataset.time >= spec.t0).sum())
        pseudo_fit = problem.design[n_real:] @ sol.coef
        active = problem.weights[n_real:] > 0
        if np.all(pseudo_fit[active] < A_used):
            return sol, A_used
        A = 2.0 * A_used + float(np.max(np.abs(pseudo_fit)))
        log.info("pseudo response too small; retrying with A=%g", A)
    raise SolverError("could not find a pseudo response above all pseudo-row fits", sol.coef)


def evaluate_score(dataset: ClusteredDataset, alpha, spec: QrlSpec, curve: KmCurve, obs_weights=None) -> np.ndarray:
    """Censoring-weighted estimating function at ``alpha``.

    Computes ``N^-1 sum_ij w_ij X_ij 1{Y_ij >= t0} [status_ij 1{Y_ij <= t0 +
    exp(X_ij'alpha)} G(t0)/G(Y_ij) - tau]`` with ``w_ij`` the optional
    per-row multipliers (1 by default).
    """
    alpha = np.asarray(alpha, dtype=float)
    at_risk, ratio = _row_weights(dataset, spec.t0, curve)
    fitted = np.exp(np.clip(dataset.X @ alpha, -700.0, 700.0))
    below = dataset.time <= spec.t0 + fitted
    term = np.where(at_risk, ratio * below - spec.tau, 0.0)
    if obs_weights is not None:
        term = term * np.asarray(obs_weights, dtype=float)
    return dataset.X.T @ term / dataset.N


def fit_qrl(dataset: ClusteredDataset, spec: QrlSpec, curve: KmCurve | None = None, A: float | None = None) -> FitResult:
    """Estimate ``alpha`` for one ``(tau, t0)``.

    ``curve`` defaults to the Kaplan-Meier estimate of the censoring
    distribution from ``dataset``.
    """
    report = validate_for_fit(dataset, spec)
    if curve is None:
        curve = fit_censoring_survival(dataset)
    sol, A_used = _solve_augmented(dataset, spec, curve, A=A)
    score = evaluate_score(dataset, sol.coef, spec, curve)
    return FitResult(
        alpha_hat=sol.coef,
        tau=spec.tau,
        t0=spec.t0,
        risk_set_size=report.size,
        score_sup_norm=float(np.max(np.abs(score))),
        A_used=A_used,
        n=dataset.n,
        N=dataset.N,
        covariate_names=dataset.covariate_names,
        solver={"method": sol.method, "iterations": sol.iterations, "gap": sol.gap, "objective": sol.objective},
    )


def score_bound(dataset: ClusteredDataset, spec: QrlSpec, curve: KmCurve) -> float:
    """Largest value ``||S_N(alpha_hat)||_inf`` may take at an exact minimiser:
    ``(p/N) max_ij (w_ij ||X_ij||_inf)`` over the weighted real rows."""
    at_risk, ratio = _row_weights(dataset, spec.t0, curve)
    w = np.where(at_risk, ratio, 0.0)
    return dataset.p / dataset.N * float(np.max(w * np.abs(dataset.X).max(axis=1)))


@dataclass(frozen=True, eq=False)
class GridCell:
    tau: float
    t0: float
    fit: FitResult | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.fit is not None


def fit_quantile_grid(dataset: ClusteredDataset, taus: Sequence[float], t0s: Sequence[float]) -> list[GridCell]:
    """Fit every ``(tau, t0)`` pair independently.

    A cell that cannot be fitted is returned with ``error`` set; the others
    are unaffected. Cells are ordered by ``t0`` then ``tau``.
    """
    cells = []
    curve = fit_censoring_survival(dataset)
    for t0 in t0s:
        for tau in taus:
            try:
                fit = fit_qrl(dataset, QrlSpec(float(tau), float(t0)), curve)
            except (QrlError, ValueError) as exc:
                cells.append(GridCell(float(tau), float(t0), None, f"{type(exc).__name__}: {exc}"))
            else:
                cells.append(GridCell(float(tau), float(t0), fit))
    return cells


def rearrange_quantiles(theta_by_tau: Sequence[tuple[float, float]]) -> list[tuple[float, float]]:
    """Monotone rearrangement: sort the estimates and reassign them to the
    same increasing ``tau`` grid.

    >>> rearrange_quantiles([(0.1, 10.1), (0.2, 9.9), (0.3, 10.2)])
    [(0.1, 9.9), (0.2, 10.1), (0.3, 10.2)]
    """
    taus = [float(t) for t, _ in theta_by_tau]
    if any(b <= a for a, b in zip(taus, taus[1:])):
        raise ValueError("tau values must be strictly increasing")
    values = sorted(float(v) for _, v in theta_by_tau)
    return list(zip(taus, values))


def predict_residual_quantile(fit: FitResult, x, time_scale: bool = False) -> float:
    """``x' alpha_hat``: the tau-quantile of ``log(T - t0)`` for covariates ``x``.

    ``x`` includes the leading intercept 1. With ``time_scale=True`` the
    quantile of the residual lifetime ``T - t0`` itself is returned.
    """
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != fit.p:
        raise ValueError(f"covariate vector has length {x.shape[0]}, model has p={fit.p}")
    if x[0] != 1.0:
        raise ValueError("x[0] must be the intercept 1")
    theta = float(x @ fit.alpha_hat)
    if not time_scale:
        return theta
    return math.exp(theta) if theta < 709.0 else math.inf
