"""Covariance estimators for the QRL coefficient estimate.

Four methods, all returning the covariance of ``alpha_hat`` itself (the
asymptotic ``V / N``):

``FR``
    Perturbation resampling with one unit-exponential multiplier per cluster
    in both the score and the censoring Kaplan-Meier curve; the sample
    covariance of ``B`` re-solved estimates.
``IFR``
    The same with one multiplier per observation, i.e. pretending failure
    times are independent. Kept as the comparator that ignores clustering.
``CFS``
    Closed-form sandwich ``Lambda^-1 Sigma Lambda^-1 / N`` with a
    difference-quotient density estimate and a cluster-level score plus
    censoring-martingale correction.
``RBS``
    Resampling-based sandwich: ``Sigma`` from perturbed scores at
    ``alpha_hat``, then the slope through scores at Gaussian perturbations of
    ``alpha_hat``; needs no re-solving.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special

from . import rng as rng_mod
from .data import ClusteredDataset, QrlSpec
from .errors import QrlError, VarianceError
from .estimator import _solve_augmented, evaluate_score, fit_qrl
from .survival import KmCurve, KmLayout, fit_censoring_survival, ipcw_ratio, survival_at

__all__ = [
    "CovarianceEstimate",
    "DEFAULT_B",
    "EPSILON",
    "MAX_FAILURE_FRACTION",
    "bandwidth_hall",
    "density_quotient",
    "variance_fr",
    "variance_ifr",
    "variance_cfs",
    "variance_rbs",
    "estimate_variance",
    "cfs_components",
]

log = logging.getLogger(__name__)

DEFAULT_B = 500
EPSILON = 1e-6
MAX_FAILURE_FRACTION = 0.10
_COND_MAX = 1e12
_EIG_FLOOR = 1e-10

MultiplierSampler = Callable[[np.random.Generator, int], np.ndarray]


def unit_exponential(rng: np.random.Generator, size: int) -> np.ndarray:
    return rng.standard_exponential(size)


@dataclass(frozen=True, eq=False)
class CovarianceEstimate:
    matrix: np.ndarray
    method: str
    B: int = 0
    failures: int = 0
    bandwidth: float | None = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        m = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        m = 0.5 * (m + m.T)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def se(self) -> np.ndarray:
        d = np.diag(self.matrix)
        return np.sqrt(np.where(d >= 0, d, np.nan))

    def to_dict(self) -> dict:
        out = {
            "method": self.method,
            "B": self.B,
            "cov": self.matrix.tolist(),
            "se": [float(v) for v in self.se],
            "failures": self.failures,
        }
        if self.bandwidth is not None:
            out["bandwidth"] = self.bandwidth
        return out


def _seed_of(seed) -> int:
    if isinstance(seed, np.random.Generator):
        return int(seed.integers(2**63))
    return int(seed)


def _resample(dataset, spec, B, seed, per_observation, multiplier_sampler, method):
    if B < 2:
        raise ValueError("B must be at least 2")
    seed = _seed_of(seed)
    sampler = multiplier_sampler or unit_exponential
    layout = KmLayout(dataset.time, dataset.status)
    size = dataset.N if per_observation else dataset.n
    estimates, failures = [], 0
    for b in range(B):
        g = np.asarray(sampler(rng_mod.stream(seed, rng_mod.STREAM_MULTIPLIER, b), size), dtype=float)
        weights = g if per_observation else g[dataset.cluster]
        try:
            curve = layout.curve(weights)
            sol, _ = _solve_augmented(dataset, spec, curve, obs_weights=weights)
        except QrlError as exc:
            failures += 1
            log.debug("%s replicate %d failed: %s", method, b, exc)
            continue
        estimates.append(sol.coef)
    if failures > MAX_FAILURE_FRACTION * B:
        raise VarianceError(f"{method}: {failures} of {B} perturbed fits failed")
    est = np.array(estimates)
    if est.shape[0] < 2:
        raise VarianceError(f"{method}: fewer than two successful replicates")
    # shift by one replicate first: identical replicates then give exact zeros
    cov = np.atleast_2d(np.cov(est - est[0], rowvar=False, ddof=1))
    return CovarianceEstimate(cov, method, B, failures)


def variance_fr(
    dataset: ClusteredDataset,
    spec: QrlSpec,
    alpha_hat=None,
    B: int = DEFAULT_B,
    seed=0,
    multiplier_sampler: MultiplierSampler | None = None,
) -> CovarianceEstimate:
    """Cluster perturbation resampling.

    Replicate ``b`` draws one multiplier per cluster from the stream keyed by
    ``(seed, b)``, rebuilds the weighted censoring curve, re-solves, and the
    returned matrix is the sample covariance of the ``B`` solutions.
    ``alpha_hat`` is accepted for interface symmetry and is not used.
    Failed re-solves are dropped and counted; more than 10% aborts.
    """
    return _resample(dataset, spec, B, seed, False, multiplier_sampler, "FR")


def variance_ifr(
    dataset: ClusteredDataset,
    spec: QrlSpec,
    alpha_hat=None,
    B: int = DEFAULT_B,
    seed=0,
    multiplier_sampler: MultiplierSampler | None = None,
) -> CovarianceEstimate:
    """Like :func:`variance_fr` but with one multiplier per observation."""
    return _resample(dataset, spec, B, seed, True, multiplier_sampler, "IFR")


def bandwidth_hall(tau: float, N: int) -> float:
    """Hall-Sheather type bandwidth for the quantile-spacing density estimate.

    ``1.57 N^(-1/3) [1.5 phi(z)^2 / (2 z^2 + 1)]^(1/3)`` with ``z`` the
    standard normal ``tau``-quantile, shrunk when needed so that
    ``tau +/- h`` stays inside ``(0.001, 0.999)``.
    """
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must lie in (0, 1)")
    if N < 2:
        raise ValueError("N must be at least 2")
    z = special.ndtri(tau)
    phi = math.exp(-0.5 * z * z) / math.sqrt(2.0 * math.pi)
    h = 1.57 * N ** (-1.0 / 3.0) * (1.5 * phi * phi / (2.0 * z * z + 1.0)) ** (1.0 / 3.0)
    room = min(tau - 0.001, 0.999 - tau)
    if room <= 0:
        raise ValueError(f"tau={tau} leaves no room for a bandwidth inside (0.001, 0.999)")
    return float(min(h, 0.99 * room))


def density_quotient(alpha_plus, alpha_minus, x, h: float, epsilon: float = EPSILON):
    """``max(0, 2h / (x'(alpha_plus - alpha_minus) - epsilon))``, and 0
    whenever the spacing does not exceed ``epsilon``.

    ``x`` may be one covariate vector or a matrix of rows.
    """
    spacing = np.asarray(x, dtype=float) @ (np.asarray(alpha_plus, dtype=float) - np.asarray(alpha_minus, dtype=float))
    spacing = np.asarray(spacing, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        f = np.where(spacing > epsilon, 2.0 * h / (spacing - epsilon), 0.0)
    f = np.maximum(f, 0.0)
    return float(f) if f.ndim == 0 else f


def cfs_components(dataset: ClusteredDataset, spec: QrlSpec, alpha, curve: KmCurve):
    """Per-cluster score ``psi`` and censoring correction ``eta``, shape (n, p).

    ``eta_i`` plugs the Kaplan-Meier estimate into the martingale
    representation of ``G(t0)/G(Y) - Ghat(t0)/Ghat(Y)``: for every at-risk
    event ``(k, j)`` inside the quantile window it integrates cluster ``i``'s
    censoring martingale from ``t0`` to ``Y_kj`` against the inverse at-risk
    count.
    """
    alpha = np.asarray(alpha, dtype=float)
    Y, d, X, t0 = dataset.time, dataset.status, dataset.X, spec.t0
    at_risk = Y >= t0
    ratio = np.zeros(dataset.N)
    ev = at_risk & (d == 1)
    if ev.any():
        ratio[ev] = ipcw_ratio(curve, t0, Y[ev])
    window = Y <= t0 + np.exp(np.clip(X @ alpha, -700, 700))

    per_obs = X * np.where(at_risk, ratio * window - spec.tau, 0.0)[:, None]
    psi = np.zeros((dataset.n, dataset.p))
    np.add.at(psi, dataset.cluster, per_obs)

    eta = np.zeros_like(psi)
    contrib = ev & window
    cens = d == 0
    if contrib.any() and cens.any():
        ys = np.sort(Y)
        n_at_risk = lambda t: dataset.N - np.searchsorted(ys, t, side="left")  # noqa: E731
        # cumulative compensator increments over censored times in [t0, t]
        ct = np.sort(Y[cens & at_risk])
        H = np.concatenate([[0.0], np.cumsum(1.0 / n_at_risk(ct).astype(float) ** 2)])

        def H_at(t):
            return H[np.searchsorted(ct, t, side="right")]

        c = X[contrib] * ratio[contrib][:, None]
        Yk = Y[contrib]
        jump = np.where(cens & at_risk, 1.0 / n_at_risk(Y).astype(float), 0.0)
        M = jump[:, None] * (Y[:, None] <= Yk[None, :]) - H_at(np.minimum(Y[:, None], Yk[None, :]))
        np.add.at(eta, dataset.cluster, M @ c)
    return psi, eta


def variance_cfs(
    dataset: ClusteredDataset,
    spec: QrlSpec,
    alpha_hat,
    curve: KmCurve | None = None,
    epsilon: float = EPSILON,
) -> CovarianceEstimate:
    """Closed-form sandwich estimate.

    The density at zero of the error is estimated per row from fits at
    ``tau +/- h`` (same censoring curve), giving the slope matrix
    ``N^-1 sum G(t0) 1{Y >= t0} f_ij X X'``. The middle matrix is
    ``N^-1 sum_i (psi_i + eta_i)(psi_i + eta_i)'``.
    """
    if curve is None:
        curve = fit_censoring_survival(dataset)
    N = dataset.N
    h = bandwidth_hall(spec.tau, N)
    try:
        hi = fit_qrl(dataset, QrlSpec(spec.tau + h, spec.t0), curve).alpha_hat
        lo = fit_qrl(dataset, QrlSpec(spec.tau - h, spec.t0), curve).alpha_hat
    except QrlError as exc:
        raise VarianceError(f"CFS: fits at tau +/- h failed: {exc}") from exc
    at_risk = dataset.time >= spec.t0
    f = density_quotient(hi, lo, dataset.X, h, epsilon)
    f = np.where(at_risk, f, 0.0)
    if not np.any(f > 0):
        raise VarianceError("CFS: density estimation failed (all quotients are zero on the risk set)")
    g0 = survival_at(curve, spec.t0)
    Xw = dataset.X * (g0 * f)[:, None]
    slope = Xw.T @ dataset.X / N
    eig = np.linalg.eigvalsh(slope)
    if eig[0] <= 0 or eig[-1] / eig[0] > _COND_MAX:
        raise VarianceError(f"CFS: slope matrix is singular (smallest eigenvalue {eig[0]:.3g})")
    psi, eta = cfs_components(dataset, spec, alpha_hat, curve)
    omega = psi + eta
    middle = omega.T @ omega / N
    inv = np.linalg.inv(slope)
    V = inv @ middle @ inv
    return CovarianceEstimate(V / N, "CFS", 0, 0, h, {"min_density": float(f[at_risk].min())})


def _inv_sqrt(S):
    vals, vecs = np.linalg.eigh(0.5 * (S + S.T))
    vals = np.maximum(vals, _EIG_FLOOR)
    return (vecs / np.sqrt(vals)) @ vecs.T


def _check_cond(S, what):
    vals = np.linalg.eigvalsh(0.5 * (S + S.T))
    if vals[-1] <= 0 or vals[0] <= vals[-1] / _COND_MAX:
        raise VarianceError(
            f"RBS: {what} is singular (eigenvalues {vals[0]:.3g} .. {vals[-1]:.3g}, condition limit {_COND_MAX:g})"
        )


def variance_rbs(
    dataset: ClusteredDataset,
    spec: QrlSpec,
    alpha_hat,
    B: int = DEFAULT_B,
    seed=0,
    multiplier_sampler: MultiplierSampler | None = None,
) -> CovarianceEstimate:
    """Resampling-based sandwich estimate.

    1. ``Sigma*``: sample covariance of ``sqrt(N) S*_N(alpha_hat)`` over ``B``
       cluster-multiplier draws (perturbed score and censoring curve).
    2. ``Z_k ~ N(0, Sigma*^-1)`` for ``k = 1..B``.
    3. ``V``: inverse of the sample covariance of
       ``sqrt(N) S_N(alpha_hat + Z_k / sqrt(N))``; returns ``V / N``.
    """
    p = dataset.p
    if B < p + 1:
        raise ValueError(f"B must be at least p + 1 = {p + 1}")
    seed = _seed_of(seed)
    sampler = multiplier_sampler or unit_exponential
    alpha_hat = np.asarray(alpha_hat, dtype=float)
    N = dataset.N
    rootN = math.sqrt(N)
    layout = KmLayout(dataset.time, dataset.status)

    scores = np.empty((B, p))
    for b in range(B):
        g = np.asarray(sampler(rng_mod.stream(seed, rng_mod.STREAM_RBS_SCORE, b), dataset.n), dtype=float)
        weights = g[dataset.cluster]
        scores[b] = rootN * evaluate_score(dataset, alpha_hat, spec, layout.curve(weights), obs_weights=weights)
    sigma_star = np.atleast_2d(np.cov(scores, rowvar=False, ddof=1))
    _check_cond(sigma_star, "resampled score covariance")
    root = _inv_sqrt(sigma_star)

    curve = layout.curve()
    slopes = np.empty((B, p))
    for b in range(B):
        Z = root @ rng_mod.stream(seed, rng_mod.STREAM_RBS_NORMAL, b).standard_normal(p)
        slopes[b] = rootN * evaluate_score(dataset, alpha_hat + Z / rootN, spec, curve)
    inner = np.atleast_2d(np.cov(slopes, rowvar=False, ddof=1))
    _check_cond(inner, "perturbed-score covariance")
    V = np.linalg.inv(inner)
    return CovarianceEstimate(V / N, "RBS", B, 0)


METHODS = ("FR", "IFR", "CFS", "RBS")


def estimate_variance(method: str, dataset, spec, alpha_hat, B=DEFAULT_B, seed=0, curve=None) -> CovarianceEstimate:
    """Dispatch to one of the four estimators by name (case-insensitive)."""
    m = method.upper()
    if m == "FR":
        return variance_fr(dataset, spec, alpha_hat, B, seed)
    if m == "IFR":
        return variance_ifr(dataset, spec, alpha_hat, B, seed)
    if m == "RBS":
        return variance_rbs(dataset, spec, alpha_hat, B, seed)
    if m == "CFS":
        return variance_cfs(dataset, spec, alpha_hat, curve)
    raise ValueError(f"unknown variance method {method!r}; choose from {', '.join(METHODS)}")
