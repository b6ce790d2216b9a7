"""Data-generating scenarios for clustered failure times with known QRL truth.

Eight designs are provided:

1. AFT model ``log T = b0 + b1 x + e`` with individual-level ``x ~ U(0,1)``,
   ``exp(e) ~ Exp(rate lam)`` and Clayton-dependent errors.
2. As 1 with a cluster-level covariate.
3. Log-logistic residual life past ``t_m``: ``log(T - t_m) = b0 + b1 x + s e``.
4. Heteroscedastic AFT ``log T = b0 + b1 x + (1 - a x) e``, ``x ~ Bernoulli``.
5. As 2 with a Frank copula.
6. As 2 with ``exp(e) ~ Exp(1)`` and a Gaussian copula with AR(1)
   correlation.
7. Normal errors with covariance ``0.64 * AR(1)`` and a binary covariate.
8. Four coefficients mixing cluster- and individual-level covariates.

Censoring is ``Uniform(0, censor_upper)`` independently of everything else.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import special

from ..data import ClusteredDataset
from .copulas import ar1_correlation, sample_copula

__all__ = ["ScenarioSpec", "SimulatedData", "scenario", "generate_scenario", "true_coefficients"]


_DEFAULTS = {
    1: dict(copula="clayton", kendall=0.5, lam=0.69, beta=(1.0, 1.0)),
    2: dict(copula="clayton", kendall=0.5, lam=0.69, beta=(1.0, 1.0)),
    3: dict(copula="clayton", kendall=0.5, beta=(1.0, 0.0), sigma=0.5, t_m=1.0),
    4: dict(copula="clayton", kendall=0.5, lam=2.0, beta=(1.0, 2.0), a=0.1),
    5: dict(copula="frank", kendall=0.5, lam=0.69, beta=(1.0, 1.0)),
    6: dict(copula="gaussian", rho=0.7, lam=1.0, beta=(1.0, 1.0)),
    7: dict(copula="gaussian", rho=0.7, beta=(0.5, 1.0), sigma=0.8),
    8: dict(copula="clayton", kendall=0.5, lam=0.69, beta=(0.6, 0.6, 0.8, 0.4)),
}


@dataclass(frozen=True)
class ScenarioSpec:
    """One simulation design.

    ``kendall`` parameterises Clayton/Frank dependence; ``rho`` is the AR(1)
    base correlation for the Gaussian copula (scenarios 6-7).
    """

    id: int
    n: int = 200
    m: int = 3
    taus: tuple[float, ...] = (0.5,)
    t0s: tuple[float, ...] = (0.0,)
    copula: str = "clayton"
    kendall: float = 0.5
    rho: float = 0.7
    lam: float = 0.69
    beta: tuple[float, ...] = (1.0, 1.0)
    sigma: float = 0.5
    t_m: float = 1.0
    a: float = 0.1
    censor_upper: float = 20.0

    def __post_init__(self):
        if self.id not in _DEFAULTS:
            raise ValueError(f"scenario id must be 1-8, got {self.id}")
        if self.n < 1 or self.m < 1:
            raise ValueError("n and m must be positive")
        if any(not 0 < t < 1 for t in self.taus):
            raise ValueError("every tau must lie in (0, 1)")
        if any(t < 0 for t in self.t0s):
            raise ValueError("t0 values must be nonnegative")
        if self.lam <= 0 or self.sigma <= 0 or not self.censor_upper > 0:
            raise ValueError("lam, sigma and censor_upper must be positive")
        want_p = 4 if self.id == 8 else 2
        if len(self.beta) != want_p:
            raise ValueError(f"scenario {self.id} needs {want_p} beta values")
        if self.id == 4 and not 0 <= self.a < 1:
            raise ValueError("scenario 4 needs 0 <= a < 1")
        if self.copula in ("clayton",) and not 0 <= self.kendall < 1:
            raise ValueError("Clayton Kendall tau must lie in [0, 1)")
        if self.copula == "gaussian" and not -1 < self.rho < 1:
            raise ValueError("AR(1) correlation must lie in (-1, 1)")

    @property
    def p(self) -> int:
        return len(self.beta)


def scenario(id: int, **overrides) -> ScenarioSpec:
    """Scenario ``id`` with its default parameters, then ``overrides``."""
    if id not in _DEFAULTS:
        raise ValueError(f"scenario id must be 1-8, got {id}")
    base = dict(_DEFAULTS[id])
    base.update(overrides)
    if "beta" in base:
        base["beta"] = tuple(float(b) for b in base["beta"])
    for key in ("taus", "t0s"):
        if key in base:
            base[key] = tuple(float(v) for v in base[key])
    return ScenarioSpec(id=id, **base)


@dataclass(frozen=True, eq=False)
class SimulatedData:
    dataset: ClusteredDataset
    spec: ScenarioSpec
    failure_time: np.ndarray
    censor_time: np.ndarray
    truth: dict = field(default_factory=dict)

    @property
    def censoring_rate(self) -> float:
        return float(1.0 - self.dataset.status.mean())


def _uniforms(spec, rng):
    if spec.copula == "gaussian":
        dep = ar1_correlation(spec.m, spec.rho)
    else:
        dep = spec.kendall
    return sample_copula(spec.copula, dep, spec.m, spec.n, rng)


def _exp_log(u, lam):
    """``log E`` for ``E ~ Exp(rate lam)`` from uniforms by inversion."""
    return np.log(-np.log1p(-u) / lam)


def generate_scenario(spec: ScenarioSpec, rng: np.random.Generator) -> SimulatedData:
    """Simulate one dataset from ``spec``.

    The returned record carries the true coefficients for every
    ``(tau, t0)`` in ``spec`` under ``truth[(tau, t0)]``.
    """
    n, m = spec.n, spec.m
    U = _uniforms(spec, rng)
    b = np.asarray(spec.beta)
    if spec.id == 1:
        x = rng.random((n, m))
        logT = b[0] + b[1] * x + _exp_log(U, spec.lam)
        Z = x.reshape(-1, 1)
    elif spec.id in (2, 5, 6):
        x = np.repeat(rng.random((n, 1)), m, axis=1)
        logT = b[0] + b[1] * x + _exp_log(U, spec.lam)
        Z = x.reshape(-1, 1)
    elif spec.id == 3:
        x = np.repeat(rng.random((n, 1)), m, axis=1)
        eps = special.logit(U)
        T = spec.t_m + np.exp(b[0] + b[1] * x + spec.sigma * eps)
        logT = np.log(T)
        Z = x.reshape(-1, 1)
    elif spec.id == 4:
        x = np.repeat(rng.binomial(1, 0.5, (n, 1)).astype(float), m, axis=1)
        logT = b[0] + b[1] * x + (1.0 - spec.a * x) * _exp_log(U, spec.lam)
        Z = x.reshape(-1, 1)
    elif spec.id == 7:
        x = np.repeat(rng.binomial(1, 0.5, (n, 1)).astype(float), m, axis=1)
        eps = spec.sigma * special.ndtri(U)
        logT = b[0] + b[1] * x + eps
        Z = x.reshape(-1, 1)
    else:
        x1 = np.repeat(rng.binomial(1, 0.5, (n, 1)).astype(float), m, axis=1)
        x2 = np.repeat(rng.random((n, 1)), m, axis=1)
        x3 = rng.standard_normal((n, m))
        logT = b[0] + b[1] * x1 + b[2] * x2 + b[3] * x3 + _exp_log(U, spec.lam)
        Z = np.column_stack([x1.ravel(), x2.ravel(), x3.ravel()])

    T = np.exp(logT).ravel() if spec.id != 3 else T.ravel()
    C = rng.uniform(0.0, spec.censor_upper, size=n * m)
    Y = np.minimum(T, C)
    status = (T <= C).astype(int)
    cluster = np.repeat(np.arange(n), m)
    names = ("x1", "x2", "x3") if spec.id == 8 else ("x",)
    ds = ClusteredDataset(tuple(str(i) for i in range(n)), cluster, Y, status, np.column_stack([np.ones(n * m), Z]), names)
    truth = {(tau, t0): true_coefficients(spec, tau, t0) for t0 in spec.t0s for tau in spec.taus}
    return SimulatedData(ds, spec, T, C, truth)


def _q(tau, lam):
    """``-log(1 - tau) / lam``: tau-quantile of Exp(rate lam)."""
    return -math.log1p(-tau) / lam


def true_coefficients(spec: ScenarioSpec, tau: float, t0: float) -> np.ndarray:
    """Closed-form QRL coefficients of ``spec`` at ``(tau, t0)``."""
    if not 0 < tau < 1 or t0 < 0:
        raise ValueError("need 0 < tau < 1 and t0 >= 0")
    b = spec.beta
    sid = spec.id
    if sid in (1, 2, 5, 6):
        return np.array([math.log(_q(tau, spec.lam)) + b[0], b[1]])
    if sid == 8:
        return np.array([math.log(_q(tau, spec.lam)) + b[0], b[1], b[2], b[3]])
    if sid == 3:
        if b[1] != 0:
            raise ValueError("scenario 3 truth is only linear in x when beta1 = 0")
        s, tm = spec.sigma, spec.t_m
        if t0 <= tm:
            a0 = math.log(math.exp(s * math.log(tau / (1 - tau)) + b[0]) - t0 + tm)
        else:
            inner = (tau + math.exp(-b[0] / s) * (t0 - tm) ** (1 / s)) / (1 - tau)
            a0 = math.log(inner**s * math.exp(b[0]) - t0 + tm)
        return np.array([a0, 0.0])
    if sid == 4:
        lam, a = spec.lam, spec.a
        q = _q(tau, lam)
        a0 = math.log(q) + b[0]
        if t0 == 0:
            a1 = -a * math.log(q) + b[1]
        else:
            bracket = 1.0 + q * t0 ** (-1.0 / (1.0 - a)) * math.exp((b[0] + b[1]) / (1.0 - a))
            a1 = math.log((t0 * bracket ** (1.0 - a) - t0) / (q * math.exp(b[0])))
        return np.array([a0, a1])
    # scenario 7: normal errors with standard deviation sigma (0.8)
    sd = spec.sigma

    def Phi(v):
        return special.ndtr(v / sd)

    def Phi_inv(pr):
        return sd * special.ndtri(pr)

    if t0 == 0:
        return np.array([b[0] + Phi_inv(tau), b[1]])
    g0 = -t0 + math.exp(b[0] + Phi_inv((1 - tau) * Phi(math.log(t0) - b[0]) + tau))
    g1 = -t0 + math.exp(b[0] + b[1] + Phi_inv((1 - tau) * Phi(math.log(t0) - b[0] - b[1]) + tau))
    return np.array([math.log(g0), math.log(g1 / g0)])
