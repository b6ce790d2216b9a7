"""Independent reference computations used by the test suite.

Everything here is written as plainly as possible (loops, enumeration,
arbitrary precision) and shares no code with the package.
"""

import itertools
import math

import mpmath
import numpy as np


def check_objective(coef, y, X, w, tau):
    r = y - X @ coef
    return float(np.sum(w * r * (tau - (r < 0))))


def brute_force_wqr(y, X, w, tau):
    """Minimum weighted check loss over every basic solution.

    A weighted quantile regression LP always has an optimal vertex where p
    rows are fitted exactly, so enumerating all p-subsets finds the optimum.
    """
    keep = w > 0
    y, X, w = y[keep], X[keep], w[keep]
    p = X.shape[1]
    best, best_coef = math.inf, None
    for rows in itertools.combinations(range(len(y)), p):
        A = X[list(rows)]
        if abs(np.linalg.det(A)) < 1e-12:
            continue
        coef = np.linalg.solve(A, y[list(rows)])
        obj = check_objective(coef, y, X, w, tau)
        if obj < best:
            best, best_coef = obj, coef
    return best, best_coef


def product_limit(time, status, weights=None):
    """Censoring survival curve by the textbook loop.

    Returns (jump_times, values) where jumps happen at censored times.
    """
    time = list(map(float, time))
    status = list(map(int, status))
    weights = [1.0] * len(time) if weights is None else list(map(float, weights))
    times, values = [], []
    surv = 1.0
    for t in sorted(set(time)):
        at_risk = sum(w for ti, w in zip(time, weights) if ti >= t)
        cens = sum(w for ti, d, w in zip(time, status, weights) if ti == t and d == 0)
        if cens > 0:
            surv *= 1.0 - cens / at_risk
            times.append(t)
            values.append(surv)
    return times, values


def step_eval(times, values, t):
    out = 1.0
    for tj, v in zip(times, values):
        if tj <= t:
            out = v
    return out


def score_by_loop(time, status, X, alpha, tau, t0, G):
    """Estimating function evaluated row by row; ``G`` is a callable."""
    N, p = X.shape
    S = np.zeros(p)
    for i in range(N):
        if time[i] < t0:
            continue
        ind = 1.0 if time[i] <= t0 + math.exp(X[i] @ alpha) else 0.0
        w = G(t0) / G(time[i]) if status[i] == 1 else 0.0
        S += X[i] * (w * ind - tau)
    return S / N


def eta_by_loop(cluster, time, status, X, alpha, t0, G):
    """Censoring-martingale correction by direct triple summation.

    For every cluster i:
        eta_i = sum_{l in i} sum_{kj} c_kj [ (1 - d_l) 1{t0 <= Y_l <= Y_kj} / R(Y_l)
                 - sum_{uv censored, t0 <= Y_uv <= min(Y_l, Y_kj)} 1 / R(Y_uv)^2 ]
    with c_kj = X_kj d_kj 1{t0 <= Y_kj <= t0 + exp(X_kj alpha)} G(t0)/G(Y_kj)
    and R(t) = #{Y >= t}.
    """
    N, p = X.shape
    R = lambda t: sum(1 for y in time if y >= t)  # noqa: E731
    n = max(cluster) + 1
    eta = np.zeros((n, p))
    for l in range(N):
        for k in range(N):
            if status[k] != 1 or not (t0 <= time[k] <= t0 + math.exp(X[k] @ alpha)):
                continue
            c = X[k] * G(t0) / G(time[k])
            first = (1 - status[l]) * (1.0 if t0 <= time[l] <= time[k] else 0.0) / R(time[l])
            upper = min(time[l], time[k])
            second = sum(1.0 / R(time[u]) ** 2 for u in range(N) if status[u] == 0 and t0 <= time[u] <= upper)
            eta[cluster[l]] += c * (first - second)
    return eta


def chi2_sf(x, df):
    return float(mpmath.gammainc(mpmath.mpf(df) / 2, mpmath.mpf(x) / 2, mpmath.inf, regularized=True))


def normal_ppf(p):
    return float(mpmath.sqrt(2) * mpmath.erfinv(2 * mpmath.mpf(p) - 1))
