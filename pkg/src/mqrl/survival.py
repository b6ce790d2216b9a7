"""Product-limit estimate of the censoring survival function.

The censoring distribution ``G`` is estimated from ``{Y, 1 - status}``: a
censored row is an "event" for ``G`` and an observed failure is censoring.
Optional nonnegative row weights give the multiplier-perturbed curve used by
the resampling variance estimators.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .data import ClusteredDataset

__all__ = [
    "KmCurve",
    "KmLayout",
    "fit_censoring_survival",
    "survival_at",
    "ipcw_ratio",
    "G_FLOOR",
    "WEIGHT_CAP",
]

log = logging.getLogger(__name__)

G_FLOOR = 1e-10
WEIGHT_CAP = 1e10


@dataclass(frozen=True, eq=False)
class KmCurve:
    """Right-continuous step function; equals 1 before ``jump_times[0]``."""

    jump_times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        for name in ("jump_times", "values"):
            a = np.array(getattr(self, name), dtype=float, copy=True)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if self.jump_times.shape != self.values.shape:
            raise ValueError("jump_times and values must have the same length")

    def __call__(self, t):
        return survival_at(self, t)


class KmLayout:
    """Sort order and tie structure of one sample, reusable across weightings.

    Building the curve for a new set of row weights then costs two bincounts
    and a cumulative product, which matters when hundreds of perturbed curves
    are needed for the same data.
    """

    def __init__(self, time, status):
        time = np.asarray(time, dtype=float)
        censored = np.asarray(status) == 0
        self.unique_times, self.inverse = np.unique(time, return_inverse=True)
        self.censored = censored
        has_cens = np.bincount(self.inverse, weights=censored.astype(float), minlength=len(self.unique_times)) > 0
        self.jump_idx = np.flatnonzero(has_cens)

    def curve(self, weights=None) -> KmCurve:
        nu = len(self.unique_times)
        if weights is None:
            weights = np.ones(self.inverse.shape[0])
        w = np.asarray(weights, dtype=float)
        total = np.bincount(self.inverse, weights=w, minlength=nu)
        dN = np.bincount(self.inverse, weights=w * self.censored, minlength=nu)
        # at risk at u: weight of rows with Y >= u, so tied failures stay in
        at_risk = np.cumsum(total[::-1])[::-1]
        j = self.jump_idx
        with np.errstate(invalid="ignore", divide="ignore"):
            hazard = np.where(at_risk[j] > 0, dN[j] / at_risk[j], 0.0)
        keep = dN[j] > 0
        values = np.cumprod(1.0 - hazard[keep])
        return KmCurve(self.unique_times[j][keep], np.clip(values, 0.0, 1.0))


def fit_censoring_survival(dataset: ClusteredDataset, multipliers=None) -> KmCurve:
    """Kaplan-Meier estimate of the censoring survival function.

    Parameters
    ----------
    dataset : ClusteredDataset
    multipliers : array_like, shape (n,), optional
        Positive per-cluster weights. Each row's contribution to the counting
        and at-risk processes is scaled by its cluster's weight.

    Examples
    --------
    >>> from mqrl.data import ClusteredDataset
    >>> d = ClusteredDataset.from_arrays(range(5), [1, 2, 3, 4, 5], [1, 0, 1, 0, 1])
    >>> c = fit_censoring_survival(d)
    >>> c.jump_times.tolist(), c.values.tolist()
    ([2.0, 4.0], [0.75, 0.375])
    """
    weights = None
    if multipliers is not None:
        m = np.asarray(multipliers, dtype=float)
        if m.shape != (dataset.n,):
            raise ValueError(f"need one multiplier per cluster ({dataset.n}), got shape {m.shape}")
        if np.any(~(m > 0)):
            raise ValueError("multipliers must be strictly positive")
        weights = m[dataset.cluster]
    return KmLayout(dataset.time, dataset.status).curve(weights)


def survival_at(curve: KmCurve, t):
    """Evaluate ``curve`` at ``t`` (scalar or array).

    A jump exactly at ``t`` is included. Past the last jump the final plateau
    is returned.
    """
    t = np.asarray(t, dtype=float)
    idx = np.searchsorted(curve.jump_times, t, side="right") - 1
    out = np.where(idx >= 0, curve.values[np.maximum(idx, 0)] if curve.values.size else 1.0, 1.0)
    return float(out) if out.ndim == 0 else out


def ipcw_ratio(curve: KmCurve, t0: float, y) -> np.ndarray:
    """Weights ``G(t0) / G(y)`` with the package's numerical guards.

    ``G(y)`` is floored at :data:`G_FLOOR`; rows where ``G(y)`` is exactly zero
    get weight 0; weights above :data:`WEIGHT_CAP` are clamped with a warning.
    """
    g0 = survival_at(curve, t0)
    gy = np.atleast_1d(survival_at(curve, np.asarray(y, dtype=float)))
    ratio = np.where(gy > 0, g0 / np.maximum(gy, G_FLOOR), 0.0)
    if np.any(ratio > WEIGHT_CAP):
        msg = f"{int(np.sum(ratio > WEIGHT_CAP))} IPCW weights exceed {WEIGHT_CAP:g}; clamped"
        log.warning(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        ratio = np.minimum(ratio, WEIGHT_CAP)
    return ratio
