import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mqrl.errors import SolverError
from mqrl.solver import WqrProblem, check_loss, solve_weighted_qr

from oracles import brute_force_wqr, check_objective


def random_problem(rng, M, p, tau):
    X = np.column_stack([np.ones(M), rng.normal(size=(M, p - 1))]) if p > 1 else np.ones((M, 1))
    y = X @ rng.normal(size=p) + rng.standard_t(3, size=M)
    w = rng.exponential(size=M) * (rng.random(M) > 0.15)
    return y, X, w


class TestAgainstEnumeration:
    @pytest.mark.parametrize("seed", range(40))
    def test_small_problems(self, seed):
        rng = np.random.default_rng(seed)
        M, p = int(rng.integers(3, 13)), int(rng.integers(1, 3))
        tau = float(rng.uniform(0.05, 0.95))
        y, X, w = random_problem(rng, M, p, tau)
        if (w > 0).sum() < p:
            w[:p] = 1.0
        best, _ = brute_force_wqr(y, X, w, tau)
        sol = solve_weighted_qr(WqrProblem(y, X, w, tau))
        assert check_objective(sol.coef, y, X, w, tau) <= best + 1e-6
        assert sol.objective == pytest.approx(best, abs=1e-6)

    def test_integer_ties(self):
        # many exact ties among residuals
        rng = np.random.default_rng(3)
        for _ in range(30):
            M = 10
            X = np.column_stack([np.ones(M), rng.integers(0, 3, M)])
            y = rng.integers(0, 4, M).astype(float)
            w = np.ones(M)
            best, _ = brute_force_wqr(y, X, w, 0.5)
            sol = solve_weighted_qr(WqrProblem(y, X, w, 0.5))
            assert check_objective(sol.coef, y, X, w, 0.5) <= best + 1e-6


class TestConventions:
    def test_lower_sample_quantile(self):
        sol = solve_weighted_qr(WqrProblem([4.0, 1.0, 3.0, 2.0], np.ones((4, 1)), np.ones(4), 0.5))
        assert sol.coef[0] == 2.0

    def test_odd_median(self):
        sol = solve_weighted_qr(WqrProblem([5.0, 1.0, 3.0], np.ones((3, 1)), np.ones(3), 0.5))
        assert sol.coef[0] == 3.0

    def test_zero_weight_rows_ignored(self):
        a = solve_weighted_qr(WqrProblem([1.0, 2.0, 3.0, 1000.0], np.ones((4, 1)), [1, 1, 1, 0], 0.5))
        assert a.coef[0] == 2.0

    def test_weights_equal_replication(self):
        y = np.array([1.0, 2.0, 5.0])
        a = solve_weighted_qr(WqrProblem(y, np.ones((3, 1)), [1.0, 1.0, 3.0], 0.5))
        b = solve_weighted_qr(WqrProblem([1.0, 2.0, 5.0, 5.0, 5.0], np.ones((5, 1)), np.ones(5), 0.5))
        assert a.coef[0] == b.coef[0] == 5.0

    def test_check_loss(self):
        np.testing.assert_allclose(check_loss([-2.0, 0.0, 3.0], 0.25), [1.5, 0.0, 0.75])


class TestErrors:
    def test_rank_deficient(self):
        X = np.column_stack([np.ones(5), np.ones(5)])
        with pytest.raises(SolverError, match="rank"):
            solve_weighted_qr(WqrProblem(np.arange(5.0), X, np.ones(5), 0.5))

    def test_too_few_weighted_rows(self):
        X = np.column_stack([np.ones(3), np.arange(3.0)])
        with pytest.raises(SolverError):
            solve_weighted_qr(WqrProblem(np.arange(3.0), X, [1, 0, 0], 0.5))

    @pytest.mark.parametrize("bad", [dict(tau=0.0), dict(tau=1.0), dict(w=[-1, 1, 1])])
    def test_problem_validation(self, bad):
        with pytest.raises(ValueError):
            WqrProblem([1, 2, 3], np.ones((3, 1)), bad.get("w", [1, 1, 1]), bad.get("tau", 0.5))

    def test_not_converged_large_problem_reports_iterate(self):
        rng = np.random.default_rng(0)
        y, X, w = random_problem(rng, 800, 2, 0.5)
        with pytest.raises(SolverError) as err:
            solve_weighted_qr(WqrProblem(y, X, w + 0.1, 0.5), max_iter=1)
        assert err.value.last_iterate is not None


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.05, 0.95))
def test_equivariance(seed, tau):
    # shifting y by X b shifts the solution by b
    rng = np.random.default_rng(seed)
    y, X, w = random_problem(rng, 30, 2, tau)
    w = w + 0.05
    b = np.array([0.7, -1.3])
    a = solve_weighted_qr(WqrProblem(y, X, w, tau))
    c = solve_weighted_qr(WqrProblem(y + X @ b, X, w, tau))
    assert check_objective(c.coef, y + X @ b, X, w, tau) == pytest.approx(
        check_objective(a.coef + b, y + X @ b, X, w, tau), abs=1e-7
    )
