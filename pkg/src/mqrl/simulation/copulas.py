"""Samplers for exchangeable Archimedean and Gaussian copulas."""

from __future__ import annotations

import numpy as np
from scipy import integrate, special

__all__ = [
    "clayton_theta",
    "frank_theta",
    "frank_kendall",
    "ar1_correlation",
    "sample_copula",
    "kendall_tau",
]


def clayton_theta(kendall: float) -> float:
    """Clayton parameter with Kendall's tau ``kendall``: ``2 tau / (1 - tau)``."""
    if not 0.0 <= kendall < 1.0:
        raise ValueError(f"Clayton needs Kendall tau in [0, 1), got {kendall}")
    return 2.0 * kendall / (1.0 - kendall)


def _debye1(theta):
    if theta == 0:
        return 1.0
    val, _ = integrate.quad(lambda t: t / np.expm1(t) if t != 0 else 1.0, 0.0, theta, epsabs=1e-14, epsrel=1e-13)
    return val / theta


def frank_kendall(theta: float) -> float:
    """Kendall's tau of the Frank copula, ``1 - 4/theta (1 - D1(theta))``."""
    if theta == 0:
        return 0.0
    return 1.0 - 4.0 / theta * (1.0 - _debye1(theta))


def frank_theta(kendall: float, tol: float = 1e-10) -> float:
    """Invert :func:`frank_kendall` by bisection."""
    if not -1.0 < kendall < 1.0:
        raise ValueError(f"Frank needs Kendall tau in (-1, 1), got {kendall}")
    if kendall == 0:
        return 0.0
    target = abs(kendall)
    lo, hi = 0.0, 1.0
    while frank_kendall(hi) < target:
        hi *= 2.0
        if hi > 1e6:
            raise ValueError(f"Frank theta solve did not bracket Kendall tau {kendall}")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if frank_kendall(mid) < target:
            lo = mid
        else:
            hi = mid
        if hi - lo < tol:
            break
    else:
        raise ValueError("Frank theta bisection did not converge")
    theta = 0.5 * (lo + hi)
    return theta if kendall > 0 else -theta


def ar1_correlation(dim: int, rho: float) -> np.ndarray:
    idx = np.arange(dim)
    return rho ** np.abs(idx[:, None] - idx[None, :])


def sample_copula(family: str, dependence, dim: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``count`` rows from a ``dim``-variate copula.

    Parameters
    ----------
    family : {"clayton", "frank", "gaussian", "independence"}
    dependence : float or array
        Kendall's tau for Clayton and Frank; a correlation matrix (or a
        scalar exchangeable correlation) for the Gaussian family.

    Notes
    -----
    Clayton uses the gamma-frailty construction. Frank with positive
    dependence uses the logarithmic-series frailty in any dimension; negative
    dependence is only a valid copula for ``dim == 2`` and is sampled by
    conditional inversion.
    """
    family = family.lower()
    if family == "independence":
        return rng.random((count, dim))
    if family == "gaussian":
        R = np.asarray(dependence, dtype=float)
        if R.ndim == 0:
            R = np.full((dim, dim), float(R))
            np.fill_diagonal(R, 1.0)
        if R.shape != (dim, dim) or not np.allclose(R, R.T) or not np.allclose(np.diag(R), 1.0):
            raise ValueError("Gaussian copula needs a symmetric correlation matrix of size dim")
        try:
            L = np.linalg.cholesky(R)
        except np.linalg.LinAlgError:
            raise ValueError("correlation matrix is not positive definite") from None
        Z = rng.standard_normal((count, dim)) @ L.T
        return special.ndtr(Z)

    kendall = float(dependence)
    if family == "clayton":
        theta = clayton_theta(kendall)
        if theta == 0:
            return rng.random((count, dim))
        V = rng.gamma(1.0 / theta, 1.0, size=(count, 1))
        E = rng.standard_exponential((count, dim))
        return (1.0 + E / V) ** (-1.0 / theta)
    if family == "frank":
        theta = frank_theta(kendall)
        if theta == 0:
            return rng.random((count, dim))
        if theta > 0:
            p = -np.expm1(-theta)
            V = rng.logseries(p, size=(count, 1)).astype(float)
            E = rng.standard_exponential((count, dim))
            return -np.log1p(-p * np.exp(-E / V)) / theta
        if dim != 2:
            raise ValueError("negative Frank dependence is only defined for dim == 2")
        U = rng.random(count)
        W = rng.random(count)
        # conditional inverse of C(v | u) = w
        a = np.exp(-theta * U)
        V = -np.log1p(W * np.expm1(-theta) / (W + (1.0 - W) * a)) / theta
        return np.column_stack([U, V])
    raise ValueError(f"unknown copula family {family!r}")


def kendall_tau(u, v) -> float:
    """Sample Kendall's tau (tau-b) of two columns."""
    from scipy.stats import kendalltau

    return float(kendalltau(u, v).statistic)
