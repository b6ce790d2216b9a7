"""Weighted linear quantile regression.

Minimises ``sum_k w_k * rho_tau(y_k - x_k @ b)`` where
``rho_tau(u) = u * (tau - 1{u < 0})``.

The default backend is a Frisch-Newton primal-dual interior-point method with
Mehrotra predictor-corrector steps, run on the bounded dual

    max  y'a   s.t.  X'a = (1 - tau) X'1,  0 <= a <= 1

after absorbing the nonnegative weights into the rows (``rho`` is positively
homogeneous). The interior iterate is then snapped to a nearby basic solution
that interpolates ``p`` rows when that is at least as good. Small problems
that do not converge fall back to the HiGHS dual simplex.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.optimize import linprog

from .errors import SolverError

__all__ = [
    "WqrProblem",
    "WqrSolution",
    "check_loss",
    "objective",
    "solve_weighted_qr",
]

log = logging.getLogger(__name__)

MAX_ITER = 200
GAP_TOL = 1e-8
SIMPLEX_FALLBACK_ROWS = 500
_STEP = 0.99995


def check_loss(u, tau):
    u = np.asarray(u, dtype=float)
    return u * (tau - (u < 0))


def objective(coef, y, X, w, tau) -> float:
    """Weighted check-loss of ``coef``."""
    r = np.asarray(y, dtype=float) - np.asarray(X, dtype=float) @ np.asarray(coef, dtype=float)
    return float(np.dot(w, check_loss(r, tau)))


@dataclass(frozen=True, eq=False)
class WqrProblem:
    responses: np.ndarray
    design: np.ndarray
    weights: np.ndarray
    tau: float

    def __post_init__(self):
        y = np.asarray(self.responses, dtype=float).ravel()
        X = np.asarray(self.design, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        w = np.asarray(self.weights, dtype=float).ravel()
        if not (X.shape[0] == y.shape[0] == w.shape[0]):
            raise ValueError("responses, design and weights must have the same number of rows")
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"tau must lie in (0, 1), got {self.tau}")
        if np.any(~(w >= 0)) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite and nonnegative")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(X))):
            raise ValueError("responses and design must be finite")
        object.__setattr__(self, "responses", y)
        object.__setattr__(self, "design", X)
        object.__setattr__(self, "weights", w)

    @property
    def p(self) -> int:
        return int(self.design.shape[1])

    def objective(self, coef) -> float:
        return objective(coef, self.responses, self.design, self.weights, self.tau)


@dataclass(frozen=True, eq=False)
class WqrSolution:
    coef: np.ndarray
    objective: float
    iterations: int
    gap: float
    method: str
    basis: tuple = field(default=())


@njit(cache=True)
def _step_bound(v, dv):
    f = 1e20
    for k in range(v.shape[0]):
        if dv[k] < 0.0:
            t = -v[k] / dv[k]
            if t < f:
                f = t
    return f


@njit(cache=True)
def _fnb_kernel(X, y, tau, yd, max_iter, tol):
    """Frisch-Newton iterations on the bounded dual.

    ``yd`` is the starting dual vector (minus a least-squares fit). Returns
    ``(coef, iterations, gap, converged)``.
    """
    n, p = X.shape
    x = np.full(n, 1.0 - tau)
    s = 1.0 - x
    b = (1.0 - tau) * X.sum(axis=0)
    yd = yd.copy()
    z = np.empty(n)
    w = np.empty(n)
    r = np.empty(n)
    q = np.empty(n)
    dx = np.empty(n)
    ds = np.empty(n)
    dz = np.empty(n)
    dw = np.empty(n)
    xi = np.empty(n)
    AQA = np.empty((p, p))
    rhs = np.empty(p)

    cx = 0.0
    wsum = 0.0
    obj = 0.0
    for k in range(n):
        fit = 0.0
        for j in range(p):
            fit += X[k, j] * yd[j]
        rk = -y[k] - fit
        if rk == 0.0:
            rk = 0.001
        z[k] = rk if rk > 0.0 else 0.0
        w[k] = z[k] - rk
        cx -= y[k] * x[k]
        wsum += w[k]
        u = y[k] + fit
        obj += u * (tau - (1.0 if u < 0.0 else 0.0))
    gap = cx - np.dot(yd, b) + wsum

    it = 0
    while it < max_iter:
        if gap <= tol * (1.0 + abs(obj)):
            return -yd, it, gap, True
        it += 1
        AQA[:, :] = 0.0
        rhs[:] = 0.0
        for k in range(n):
            qk = 1.0 / (z[k] / x[k] + w[k] / s[k])
            q[k] = qk
            r[k] = z[k] - w[k]
            for i in range(p):
                xi_ = X[k, i] * qk
                rhs[i] += xi_ * r[k]
                for j in range(i, p):
                    AQA[i, j] += xi_ * X[k, j]
        for i in range(p):
            for j in range(i):
                AQA[i, j] = AQA[j, i]
        dy = np.linalg.solve(AQA, rhs)
        for k in range(n):
            t = 0.0
            for j in range(p):
                t += X[k, j] * dy[j]
            dx[k] = q[k] * (t - r[k])
            ds[k] = -dx[k]
            dz[k] = -z[k] * (dx[k] / x[k] + 1.0)
            dw[k] = -w[k] * (ds[k] / s[k] + 1.0)
        fp = min(_STEP * min(_step_bound(x, dx), _step_bound(s, ds)), 1.0)
        fd = min(_STEP * min(_step_bound(w, dw), _step_bound(z, dz)), 1.0)
        if min(fp, fd) < 1.0:
            mu = 0.0
            g = 0.0
            for k in range(n):
                mu += z[k] * x[k] + w[k] * s[k]
                g += (z[k] + fd * dz[k]) * (x[k] + fp * dx[k]) + (w[k] + fd * dw[k]) * (s[k] + fp * ds[k])
            mu = mu * (g / mu) ** 3 / (2.0 * n)
            for k in range(n):
                dxdz = dx[k] * dz[k]
                dsdw = ds[k] * dw[k]
                xi[k] = mu * (1.0 / x[k] - 1.0 / s[k])
                c = q[k] * (dxdz - dsdw - xi[k])
                for i in range(p):
                    rhs[i] += X[k, i] * c
            dy = np.linalg.solve(AQA, rhs)
            for k in range(n):
                t = 0.0
                for j in range(p):
                    t += X[k, j] * dy[j]
                dxdz = dx[k] * dz[k]
                dsdw = ds[k] * dw[k]
                xinv = 1.0 / x[k]
                sinv = 1.0 / s[k]
                dxk = q[k] * (t + xi[k] - r[k] - dxdz + dsdw)
                dx[k] = dxk
                ds[k] = -dxk
                dz[k] = mu * xinv - z[k] - xinv * z[k] * dxk - dxdz
                dw[k] = mu * sinv - w[k] - sinv * w[k] * (-dxk) - dsdw
            fp = min(_STEP * min(_step_bound(x, dx), _step_bound(s, ds)), 1.0)
            fd = min(_STEP * min(_step_bound(w, dw), _step_bound(z, dz)), 1.0)
        for j in range(p):
            yd[j] += fd * dy[j]
        cx = 0.0
        wsum = 0.0
        obj = 0.0
        for k in range(n):
            x[k] += fp * dx[k]
            s[k] += fp * ds[k]
            w[k] += fd * dw[k]
            z[k] += fd * dz[k]
            cx -= y[k] * x[k]
            wsum += w[k]
            u = y[k]
            for j in range(p):
                u += X[k, j] * yd[j]
            obj += u * (tau - (1.0 if u < 0.0 else 0.0))
        gap = cx - np.dot(yd, b) + wsum
    return -yd, it, gap, gap <= tol * (1.0 + abs(obj))


def _fnb(X, y, tau, max_iter, tol):
    yd = np.linalg.lstsq(X, -y, rcond=None)[0]
    coef, it, gap, ok = _fnb_kernel(
        np.ascontiguousarray(X), np.ascontiguousarray(y), float(tau), yd, int(max_iter), float(tol)
    )
    return coef, int(it), float(gap), bool(ok)


def _simplex(X, y, tau):
    n, p = X.shape
    cost = np.concatenate([np.zeros(p), np.full(n, tau), np.full(n, 1.0 - tau)])
    A_eq = np.hstack([X, np.eye(n), -np.eye(n)])
    bounds = [(None, None)] * p + [(0, None)] * (2 * n)
    res = linprog(cost, A_eq=A_eq, b_eq=y, bounds=bounds, method="highs-ds")
    if res.status != 0:
        raise SolverError(f"simplex fallback failed: {res.message}")
    return res.x[:p]


def _snap_to_vertex(X, y, tau, coef, obj, extra=3):
    """Try basic solutions through the rows with the smallest residuals.

    Returns ``(coef, obj, basis)`` for the best basic candidate if it is no
    worse than ``obj``; otherwise the inputs with an empty basis. Among
    equally good candidates the lexicographically smallest coefficient vector
    wins, which gives the lower sample quantile in the intercept-only case.
    """
    n, p = X.shape
    k = min(n, p + extra)
    resid = np.abs(y - X @ coef)
    near = np.argsort(resid, kind="stable")[:k]
    best = None
    tie = 1e-11 * (1.0 + abs(obj))
    for rows in itertools.combinations(sorted(near), p):
        rows = list(rows)
        Xs = X[rows]
        if abs(np.linalg.det(Xs)) < 1e-12 * max(1.0, np.abs(Xs).max()) ** p:
            continue
        try:
            cand = np.linalg.solve(Xs, y[rows])
        except np.linalg.LinAlgError:
            continue
        val = float(np.sum(check_loss(y - X @ cand, tau)))
        if best is None or val < best[1] - tie or (
            abs(val - best[1]) <= tie and tuple(cand) < tuple(best[0])
        ):
            best = (cand, val, tuple(rows))
    if best is not None and best[1] <= obj + 1e-9 * (1.0 + abs(obj)):
        return best
    return coef, obj, ()


def solve_weighted_qr(problem: WqrProblem, max_iter: int = MAX_ITER, tol: float = GAP_TOL) -> WqrSolution:
    """Minimise the weighted check loss of ``problem``.

    Raises
    ------
    SolverError
        If fewer than ``p`` rows carry positive weight, the design restricted
        to those rows is rank deficient, or the interior-point method does not
        reach the duality-gap tolerance within ``max_iter`` iterations on a
        problem too large for the simplex fallback.

    Examples
    --------
    >>> sol = solve_weighted_qr(WqrProblem([1, 2, 3, 4, 5], np.ones((5, 1)), np.ones(5), 0.5))
    >>> float(sol.coef[0])
    3.0
    """
    pos = np.flatnonzero(problem.weights > 0)
    p = problem.p
    if pos.size < p:
        raise SolverError(f"only {pos.size} rows have positive weight; need at least {p}")
    w = problem.weights[pos]
    X = problem.design[pos] * w[:, None]
    y = problem.responses[pos] * w
    sv = np.linalg.svd(problem.design[pos], compute_uv=False)
    if sv[-1] <= sv[0] * max(pos.size, p) * np.finfo(float).eps * 10:
        raise SolverError("design is rank deficient on the positively weighted rows")

    coef, it, gap, ok = _fnb(X, y, problem.tau, max_iter, tol)
    method = "interior-point"
    if not ok:
        if pos.size < SIMPLEX_FALLBACK_ROWS:
            log.info("interior point stalled (gap %.3g after %d its); using simplex", gap, it)
            coef = _simplex(X, y, problem.tau)
            method = "simplex"
        else:
            raise SolverError(
                f"interior point did not converge in {it} iterations (gap {gap:.3g})",
                last_iterate=coef,
                gap=gap,
            )
    obj = float(np.sum(check_loss(y - X @ coef, problem.tau)))
    coef, obj, basis = _snap_to_vertex(X, y, problem.tau, coef, obj)
    basis = tuple(int(pos[i]) for i in basis)
    return WqrSolution(np.asarray(coef, dtype=float), obj, it, gap, method, basis)
