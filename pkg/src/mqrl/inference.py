"""Wald tests and confidence intervals from a coefficient covariance."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import special

__all__ = [
    "WaldResult",
    "chi_square_sf",
    "normal_quantile",
    "wald_test",
    "coefficient_tests",
    "coefficient_cis",
    "significance_stars",
]


def _matrix(cov) -> np.ndarray:
    # accepts a CovarianceEstimate or a plain array
    return np.asarray(getattr(cov, "matrix", cov), dtype=float)


def chi_square_sf(x: float, df: int) -> float:
    """Upper tail of the chi-square distribution, ``Q(df/2, x/2)``."""
    if df < 1:
        raise ValueError("df must be a positive integer")
    if x <= 0:
        return 1.0
    return float(special.gammaincc(df / 2.0, x / 2.0))


def normal_quantile(p: float) -> float:
    if not 0.0 < p < 1.0:
        raise ValueError("probability must lie in (0, 1)")
    return float(special.ndtri(p))


def significance_stars(p_value: float) -> str:
    """``**`` below 0.05, ``*`` below 0.1, otherwise empty."""
    if p_value < 0.05:
        return "**"
    if p_value < 0.1:
        return "*"
    return ""


@dataclass(frozen=True)
class WaldResult:
    statistic: float
    df: int
    p_value: float
    tested_indices: tuple[int, ...] = ()

    @property
    def stars(self) -> str:
        return significance_stars(self.p_value)


def wald_test(alpha_hat, cov, indices: Sequence[int], null=None) -> WaldResult:
    """Wald test of ``alpha[indices] == null`` (zero by default).

    ``W = d' (cov[indices, indices])^-1 d`` with ``d = alpha_hat[indices] -
    null``, referred to chi-square with ``len(indices)`` degrees of freedom.
    """
    idx = list(indices)
    if not idx:
        raise ValueError("need at least one coefficient index")
    a = np.asarray(alpha_hat, dtype=float)
    C = np.atleast_2d(_matrix(cov))
    d = a[idx] - (np.zeros(len(idx)) if null is None else np.asarray(null, dtype=float))
    sub = C[np.ix_(idx, idx)]
    try:
        W = float(d @ np.linalg.solve(sub, d))
    except np.linalg.LinAlgError:
        raise ValueError("covariance sub-matrix is singular") from None
    return WaldResult(W, len(idx), chi_square_sf(W, len(idx)), tuple(idx))


def coefficient_tests(alpha_hat, cov) -> list[WaldResult]:
    """One single-coefficient Wald test per coefficient.

    A non-positive variance gives ``nan`` statistic and p-value rather than
    an error, so the rest of a report can still be produced.
    """
    a = np.asarray(alpha_hat, dtype=float)
    C = np.atleast_2d(_matrix(cov))
    out = []
    for j in range(a.shape[0]):
        v = C[j, j]
        if not v > 0:
            out.append(WaldResult(float("nan"), 1, float("nan"), (j,)))
            continue
        W = a[j] ** 2 / v
        out.append(WaldResult(float(W), 1, chi_square_sf(W, 1), (j,)))
    return out


def coefficient_cis(alpha_hat, cov, level: float = 0.95) -> np.ndarray:
    """Normal-theory intervals ``alpha_hat +/- z se``, shape (p, 2).

    A negative variance is not clamped: its row comes back as ``nan`` and a
    ``RuntimeWarning`` names the offending coefficients.
    """
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    a = np.asarray(alpha_hat, dtype=float)
    d = np.diag(np.atleast_2d(_matrix(cov)))
    if np.any(d < 0):
        warnings.warn(f"negative variance for coefficient(s) {np.flatnonzero(d < 0).tolist()}", RuntimeWarning, stacklevel=2)
    se = np.sqrt(np.where(d >= 0, d, np.nan))
    z = normal_quantile(0.5 + level / 2.0)
    return np.column_stack([a - z * se, a + z * se])
