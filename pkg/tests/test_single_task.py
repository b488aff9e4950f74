"""Tests for the per-task estimators against independent oracles."""

import numpy as np
import pytest

from mtlcvx.data import TaskDataset
from mtlcvx.errors import ConfigInvalidError, SeparationError, SingularSystemError
from mtlcvx.single_task import (
    default_lasso_grid,
    fit_lasso,
    fit_logistic_ridge,
    fit_ols,
    fit_ridge,
    lasso_lambda_max,
    lasso_path,
    select_lasso,
    select_lasso_cv,
    select_ridge,
    soft_threshold,
)

from oracles import (
    fista_lasso,
    lasso_kkt_violation,
    lasso_objective,
    logistic_ridge_gd,
    ridge_augmented_lstsq,
)


def linear_task(seed=0, n=60, p=8, sparsity=3, noise=0.5, task_id="t"):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p))
    w = np.zeros(p)
    w[:sparsity] = rng.normal(scale=2.0, size=sparsity)
    y = X @ w + noise * rng.normal(size=n)
    return TaskDataset(task_id, y - y.mean(), X, "linear"), w


class TestSoftThreshold:
    def test_values(self):
        # Hand-checked: piecewise definition.
        assert soft_threshold(3.0, 1.0) == 2.0
        assert soft_threshold(-3.0, 1.0) == -2.0
        assert soft_threshold(0.5, 1.0) == 0.0
        assert soft_threshold(-0.5, 1.0) == 0.0
        assert soft_threshold(1.0, 1.0) == 0.0


class TestLasso:
    def test_orthonormal_design_closed_form(self):
        # Reference: with X'X/n = I the solution is soft_threshold(X'y/n, lam).
        rng = np.random.default_rng(1)
        n, p = 40, 5
        Q, _ = np.linalg.qr(rng.normal(size=(n, p)))
        X = Q * np.sqrt(n)
        y = rng.normal(size=n)
        task = TaskDataset("o", y, X)
        lam = 0.3 * lasso_lambda_max(task)
        fit = fit_lasso(task, lam)
        b = X.T @ y / n
        expected = np.sign(b) * np.maximum(np.abs(b) - lam, 0.0)
        assert np.allclose(fit.coef, expected, atol=1e-10)

    def test_kkt_conditions_hold(self):
        task, _ = linear_task(seed=2)
        lam = 0.2 * lasso_lambda_max(task)
        fit = fit_lasso(task, lam)
        assert lasso_kkt_violation(task.X, task.y, fit.coef, lam) < 1e-7

    def test_matches_proximal_gradient_oracle(self):
        task, _ = linear_task(seed=3, n=50, p=10)
        lam = 0.1 * lasso_lambda_max(task)
        fit = fit_lasso(task, lam)
        ref = fista_lasso(task.X, task.y, lam)
        assert lasso_objective(task.X, task.y, fit.coef, lam) <= (
            lasso_objective(task.X, task.y, ref, lam) + 1e-10
        )
        assert np.allclose(fit.coef, ref, atol=1e-6)

    def test_lambda_max_gives_zero(self):
        task, _ = linear_task(seed=4)
        fit = fit_lasso(task, lasso_lambda_max(task) * (1 + 1e-12))
        assert np.allclose(fit.coef, 0.0)

    def test_path_monotone_grid_and_warm_start(self):
        task, _ = linear_task(seed=5)
        lambdas, path = lasso_path(task)
        assert len(lambdas) == 50
        assert (np.diff(lambdas) < 0).all()
        assert lambdas[0] == pytest.approx(lasso_lambda_max(task))
        assert lambdas[-1] == pytest.approx(1e-4 * lambdas[0])
        assert np.allclose(path[0], 0.0)
        # Each path point satisfies its own KKT system.
        for lam, w in zip(lambdas[::7], path[::7]):
            assert lasso_kkt_violation(task.X, task.y, w, lam) < 1e-6

    def test_selection_prefers_low_validation_error(self):
        task, w_true = linear_task(seed=6, n=80)
        rng = np.random.default_rng(7)
        Xv = rng.normal(size=(40, task.n_features))
        yv = Xv @ w_true + 0.5 * rng.normal(size=40)
        val = TaskDataset("t", yv - yv.mean(), Xv)
        fit = select_lasso(task, val)
        lambdas, path = lasso_path(task)
        errs = np.mean((val.y[None, :] - path @ val.X.T) ** 2, axis=1)
        assert float(np.mean((val.y - fit.predict(val.X)) ** 2)) == pytest.approx(
            float(errs.min())
        )

    def test_negative_penalty_rejected(self):
        task, _ = linear_task()
        with pytest.raises(ConfigInvalidError):
            fit_lasso(task, -1.0)

    def test_grid_shape(self):
        task, _ = linear_task(seed=9)
        grid = default_lasso_grid(task, n_lambdas=20, eps=1e-3)
        assert len(grid) == 20
        assert grid[0] / grid[-1] == pytest.approx(1e3)

    def test_grid_floor_widens_when_underdetermined(self):
        # With p > n the tail of the path is not unique, so the default
        # floor rises from 1e-4 to 1e-2 of lambda_max.
        task, _ = linear_task(seed=10, n=15, p=40)
        grid = default_lasso_grid(task)
        assert grid[0] / grid[-1] == pytest.approx(1e2)


class TestLassoCv:
    def test_recovers_sparse_signal(self):
        task, w_true = linear_task(seed=11, n=100)
        fit = select_lasso_cv(task, seed=3)
        assert fit.method == "lasso"
        assert np.linalg.norm(fit.coef - w_true) < 0.5

    def test_reproducible_given_seed(self):
        task, _ = linear_task(seed=12, n=40)
        a = select_lasso_cv(task, seed=9)
        b = select_lasso_cv(task, seed=9)
        assert a.lam == b.lam
        assert np.array_equal(a.coef, b.coef)

    def test_one_se_rule_is_sparser(self):
        # Hand-checked: the 1se penalty is by construction >= the minimizer.
        task, _ = linear_task(seed=13, n=30, p=20, sparsity=2, noise=1.0)
        lo = select_lasso_cv(task, seed=4, rule="min")
        hi = select_lasso_cv(task, seed=4, rule="1se")
        assert hi.lam >= lo.lam
        assert np.count_nonzero(hi.coef) <= np.count_nonzero(lo.coef)

    def test_refit_satisfies_kkt_at_chosen_penalty(self):
        task, _ = linear_task(seed=14, n=25, p=50)
        fit = select_lasso_cv(task, seed=5)
        assert lasso_kkt_violation(task.X, task.y, fit.coef, fit.lam) < 1e-6

    def test_bad_rule_and_fold_count_rejected(self):
        task, _ = linear_task(seed=15)
        with pytest.raises(ConfigInvalidError):
            select_lasso_cv(task, rule="median")
        single = TaskDataset("s", np.array([1.0]), np.array([[2.0]]))
        with pytest.raises(ConfigInvalidError):
            select_lasso_cv(single)


class TestRidge:
    def test_matches_augmented_lstsq(self):
        task, _ = linear_task(seed=10, n=30, p=12)
        for lam in (0.01, 0.5, 5.0):
            fit = fit_ridge(task, lam)
            ref = ridge_augmented_lstsq(task.X, task.y, lam)
            assert np.allclose(fit.coef, ref, atol=1e-8)

    def test_underdetermined_ok_with_penalty(self):
        rng = np.random.default_rng(11)
        X = rng.normal(size=(5, 20))
        y = rng.normal(size=5)
        fit = fit_ridge(TaskDataset("u", y, X), 1.0)
        assert np.isfinite(fit.coef).all()

    def test_selection_returns_grid_minimizer(self):
        task, w_true = linear_task(seed=12)
        rng = np.random.default_rng(13)
        Xv = rng.normal(size=(30, task.n_features))
        yv = Xv @ w_true
        val = TaskDataset("t", yv - yv.mean(), Xv)
        grid = np.geomspace(1e-3, 10, 8)
        fit = select_ridge(task, val, grid)
        errs = [
            float(np.mean((val.y - fit_ridge(task, float(l)).predict(val.X)) ** 2))
            for l in grid
        ]
        chosen = float(np.mean((val.y - fit.predict(val.X)) ** 2))
        assert chosen == pytest.approx(min(errs))


class TestOls:
    def test_recovers_noiseless_coefficients(self):
        rng = np.random.default_rng(14)
        X = rng.normal(size=(40, 6))
        w = rng.normal(size=6)
        fit = fit_ols(TaskDataset("t", X @ w, X))
        assert np.allclose(fit.coef, w, atol=1e-10)

    def test_rank_deficient_raises(self):
        rng = np.random.default_rng(15)
        X = rng.normal(size=(10, 3))
        X = np.hstack([X, X[:, :1]])  # duplicated column
        with pytest.raises(SingularSystemError):
            fit_ols(TaskDataset("t", rng.normal(size=10), X))


class TestLogisticRidge:
    def make_binary(self, seed=0, n=120, p=4, lam=0.1):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(n, p))
        w = rng.normal(size=p)
        prob = 1.0 / (1.0 + np.exp(-(0.3 + X @ w)))
        y = (rng.random(n) < prob).astype(float)
        return TaskDataset("b", y, X, "logistic")

    def test_stationarity_at_solution(self):
        task = self.make_binary(seed=16)
        fit = fit_logistic_ridge(task, 0.1, intercept_ridge=0.05)
        n = task.n_samples
        pi = fit.predict_proba(task.X)
        grad_w = -task.X.T @ (task.y - pi) / n + 0.1 * fit.coef
        grad_0 = -np.sum(task.y - pi) / n + 0.05 * fit.intercept
        assert np.abs(grad_w).max() < 1e-8
        assert abs(grad_0) < 1e-8

    def test_matches_gradient_descent_oracle(self):
        task = self.make_binary(seed=17, n=80, p=3)
        fit = fit_logistic_ridge(task, 0.2, intercept_ridge=0.1)
        icpt, coef = logistic_ridge_gd(task.X, task.y, 0.2, 0.1, iters=150_000)
        assert np.allclose(fit.coef, coef, atol=1e-6)
        assert fit.intercept == pytest.approx(icpt, abs=1e-6)

    def test_unpenalized_intercept_matches_base_rate_when_no_signal(self):
        # Reference: with X = 0 the optimum satisfies sigmoid(w0) = mean(y).
        y = np.array([1.0] * 3 + [0.0] * 7)
        task = TaskDataset("t", y, np.zeros((10, 2)), "logistic")
        fit = fit_logistic_ridge(task, 1.0, intercept_ridge=0.0)
        assert fit.intercept == pytest.approx(np.log(0.3 / 0.7), abs=1e-7)
        assert np.allclose(fit.coef, 0.0)

    def test_separable_unpenalized_raises(self):
        X = np.concatenate([np.ones(10), -np.ones(10)]).reshape(-1, 1)
        y = np.concatenate([np.ones(10), np.zeros(10)])
        task = TaskDataset("s", y, X, "logistic")
        with pytest.raises(SeparationError):
            fit_logistic_ridge(task, 0.0, max_iter=500)

    def test_separable_penalized_is_fine(self):
        X = np.concatenate([np.ones(10), -np.ones(10)]).reshape(-1, 1)
        y = np.concatenate([np.ones(10), np.zeros(10)])
        task = TaskDataset("s", y, X, "logistic")
        fit = fit_logistic_ridge(task, 0.5)
        assert np.isfinite(fit.coef).all()
        assert fit.converged
