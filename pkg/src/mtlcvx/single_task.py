"""Single-task estimators: lasso, ridge, OLS and ridge-penalized logistic.

These serve three roles: stand-alone baselines fit independently per task,
initializers for the joint multi-task fits, and inputs to k-NN graph
construction. Linear losses are scaled as (1/(2n))||y - Xw||^2 and assume
centered responses (no intercept); the logistic model carries an intercept.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

try:  # compiled kernel for the coordinate-descent hot loop
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap


from .data import TaskDataset
from .errors import (
    ConfigInvalidError,
    HessianSingularError,
    NonConvergenceError,
    SeparationError,
    SingularSystemError,
)


@dataclass(frozen=True)
class SingleTaskFit:
    """Result of one per-task estimation."""

    coef: np.ndarray
    intercept: float
    lam: float
    method: str
    n_iter: int
    converged: bool

    def __post_init__(self):
        coef = np.array(self.coef, dtype=float)
        coef.setflags(write=False)
        object.__setattr__(self, "coef", coef)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.intercept + np.asarray(X) @ self.coef

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return _sigmoid(self.predict(X))


def _sigmoid(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def soft_threshold(z: float, lam: float) -> float:
    """Scalar soft-thresholding operator."""
    if z > lam:
        return z - lam
    if z < -lam:
        return z + lam
    return 0.0


def lasso_lambda_max(task: TaskDataset) -> float:
    """Smallest penalty at which the all-zero vector is optimal."""
    return float(np.max(np.abs(task.X.T @ task.y)) / task.n_samples)


def default_lasso_grid(
    task: TaskDataset, n_lambdas: int = 50, eps: float | None = None
) -> np.ndarray:
    """Descending log-spaced grid from lambda_max to eps * lambda_max.

    When eps is omitted it defaults to 1e-2 if the task has more features
    than samples (where tiny penalties leave the problem underdetermined)
    and 1e-4 otherwise, matching the usual lasso-path convention.
    """
    lmax = lasso_lambda_max(task)
    if lmax <= 0:
        lmax = 1.0
    if eps is None:
        eps = 1e-2 if task.n_features > task.n_samples else 1e-4
    return np.geomspace(lmax, eps * lmax, n_lambdas)


@njit(cache=True)
def _cd_sweeps(G, b, lam, w, s, diag, thresh, max_iter):
    """Coordinate-descent sweeps on the Gram system (compiled when possible).

    Full passes alternate with cycles over the currently nonzero
    coefficients; s tracks G @ w throughout. Convergence is declared when
    the stationarity (subgradient) conditions hold within thresh, which
    stays meaningful even when the solution itself is not unique (p > n).
    """
    p = b.shape[0]
    n_iter = 0
    while n_iter < max_iter:
        n_iter += 1
        for j in range(p):
            dj = diag[j]
            if dj <= 0.0:
                continue
            z = b[j] - s[j] + dj * w[j]
            if z > lam:
                w_new = (z - lam) / dj
            elif z < -lam:
                w_new = (z + lam) / dj
            else:
                w_new = 0.0
            step = w_new - w[j]
            if step != 0.0:
                for i in range(p):
                    s[i] += G[i, j] * step
                w[j] = w_new
        viol = 0.0
        for j in range(p):
            g = b[j] - s[j]
            if w[j] > 0.0:
                v = abs(g - lam)
            elif w[j] < 0.0:
                v = abs(g + lam)
            else:
                v = abs(g) - lam
                if v < 0.0:
                    v = 0.0
            if v > viol:
                viol = v
        if viol <= thresh:
            return n_iter, True
        while n_iter < max_iter:
            n_iter += 1
            for j in range(p):
                if w[j] == 0.0:
                    continue
                dj = diag[j]
                if dj <= 0.0:
                    continue
                z = b[j] - s[j] + dj * w[j]
                if z > lam:
                    w_new = (z - lam) / dj
                elif z < -lam:
                    w_new = (z + lam) / dj
                else:
                    w_new = 0.0
                step = w_new - w[j]
                if step != 0.0:
                    for i in range(p):
                        s[i] += G[i, j] * step
                    w[j] = w_new
            viol = 0.0
            for j in range(p):
                if w[j] == 0.0:
                    continue
                g = b[j] - s[j]
                v = abs(g - lam) if w[j] > 0.0 else abs(g + lam)
                if v > viol:
                    viol = v
            if viol <= thresh:
                break
    return n_iter, False


def _lasso_cd(G, b, lam, w, tol, max_iter):
    """Cyclic coordinate descent on (1/(2n))||y-Xw||^2 + lam*||w||_1.

    Works on the Gram matrix G = X'X/n and correlation b = X'y/n (covariance
    updating), maintaining s = G @ w. Stops when the stationarity conditions
    hold within tol * max(1, ||b||_inf): |b_j - (Gw)_j| <= lam + slack for
    zero coordinates and = lam (within slack) with matching sign otherwise.
    """
    G = np.ascontiguousarray(G)
    diag = np.ascontiguousarray(np.diag(G))
    w[diag <= 0.0] = 0.0  # dead columns carry no signal and stay at zero
    s = np.ascontiguousarray(G @ w)
    thresh = tol * max(1.0, float(np.max(np.abs(b))))
    n_iter, ok = _cd_sweeps(G, b, lam, w, s, diag, thresh, max_iter)
    return w, n_iter, ok


def fit_lasso(
    task: TaskDataset,
    lam: float,
    warm_start: np.ndarray | None = None,
    tol: float = 1e-7,
    max_iter: int = 100_000,
) -> SingleTaskFit:
    """Lasso at a single penalty value."""
    if lam < 0:
        raise ConfigInvalidError("lasso penalty must be >= 0")
    n = task.n_samples
    G = task.X.T @ task.X / n
    b = task.X.T @ task.y / n
    w = np.zeros(task.n_features) if warm_start is None else np.array(warm_start, dtype=float)
    w, n_iter, ok = _lasso_cd(G, b, lam, w, tol, max_iter)
    if not ok:
        raise NonConvergenceError(
            f"lasso did not converge within {max_iter} sweeps", iterations=n_iter
        )
    return SingleTaskFit(w, 0.0, lam, "lasso", n_iter, ok)


def lasso_path(
    task: TaskDataset,
    lambdas: np.ndarray | None = None,
    tol: float = 1e-7,
    max_iter: int = 100_000,
) -> tuple[np.ndarray, np.ndarray]:
    """Warm-started solution path over a descending penalty grid.

    Returns (lambdas, path) with path[i] the coefficient vector at lambdas[i].
    """
    if lambdas is None:
        lambdas = default_lasso_grid(task)
    lambdas = np.asarray(lambdas, dtype=float)
    if (np.diff(lambdas) > 0).any():
        lambdas = np.sort(lambdas)[::-1]
    n = task.n_samples
    G = task.X.T @ task.X / n
    b = task.X.T @ task.y / n
    w = np.zeros(task.n_features)
    path = np.empty((len(lambdas), task.n_features))
    for i, lam in enumerate(lambdas):
        w, n_iter, ok = _lasso_cd(G, b, lam, w, tol, max_iter)
        if not ok:
            raise NonConvergenceError(
                f"lasso path stalled at penalty {lam:g}", iterations=n_iter
            )
        path[i] = w
    return lambdas, path


def select_lasso(
    train: TaskDataset,
    validation: TaskDataset,
    lambdas: np.ndarray | None = None,
    tol: float = 1e-7,
    max_iter: int = 100_000,
) -> SingleTaskFit:
    """Pick the path point with the smallest validation mean squared error.

    Ties go to the larger (sparser) penalty.
    """
    lambdas, path = lasso_path(train, lambdas, tol, max_iter)
    errs = np.mean((validation.y[None, :] - path @ validation.X.T) ** 2, axis=1)
    best = int(np.argmin(errs))  # grid is descending, so argmin favors larger lam
    return SingleTaskFit(path[best], 0.0, float(lambdas[best]), "lasso", 0, True)


def select_lasso_cv(
    task: TaskDataset,
    n_folds: int = 10,
    lambdas: np.ndarray | None = None,
    rule: str = "min",
    seed: int = 0,
    tol: float = 1e-7,
    max_iter: int = 100_000,
    fold_tol: float = 1e-5,
) -> SingleTaskFit:
    """Pick the lasso penalty by K-fold cross-validation on the task itself.

    The penalty sequence comes from the full task; each fold's path is fit on
    the remaining samples and scored on the held-out fold. rule="min" takes
    the penalty with the smallest pooled held-out squared error; rule="1se"
    takes the largest penalty whose fold-mean error is within one standard
    error of that minimum. The returned coefficients come from a full-data
    path fit at tol; fold paths are throwaway fits scored on held-out squared
    error and use the looser fold_tol. Fold assignment is a seeded
    permutation, so repeated calls are reproducible.
    """
    if rule not in ("min", "1se"):
        raise ConfigInvalidError(f"unknown cross-validation rule {rule!r}")
    n = task.n_samples
    n_folds = min(int(n_folds), n)
    if n_folds < 2:
        raise ConfigInvalidError("cross-validation needs at least 2 folds")
    if lambdas is None:
        lambdas = default_lasso_grid(task)
    lambdas = np.asarray(lambdas, dtype=float)
    if (np.diff(lambdas) > 0).any():
        lambdas = np.sort(lambdas)[::-1]
    lambdas, full_path = lasso_path(task, lambdas, tol, max_iter)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed)]))
    fold_of = rng.permutation(n) % n_folds
    sq_sums = np.zeros(len(lambdas))
    fold_means = np.empty((n_folds, len(lambdas)))
    for k in range(n_folds):
        held = fold_of == k
        tr = task.take(np.flatnonzero(~held))
        te = task.take(np.flatnonzero(held))
        _, path = lasso_path(tr, lambdas, fold_tol, max_iter)
        resid = te.y[None, :] - path @ te.X.T
        sq = np.sum(resid**2, axis=1)
        sq_sums += sq
        fold_means[k] = sq / te.n_samples
    mean_err = sq_sums / n
    best = int(np.argmin(mean_err))  # descending grid: ties favor larger lam
    if rule == "1se":
        curve = fold_means.mean(axis=0)
        se = fold_means[:, best].std(ddof=1) / np.sqrt(n_folds)
        best = int(np.argmax(curve <= curve[best] + se))
    return SingleTaskFit(full_path[best], 0.0, float(lambdas[best]), "lasso", 0, True)


def fit_ridge(task: TaskDataset, lam: float) -> SingleTaskFit:
    """Closed-form ridge: (X'X/n + lam I)^{-1} X'y/n."""
    if lam < 0:
        raise ConfigInvalidError("ridge penalty must be >= 0")
    n, p = task.X.shape
    A = task.X.T @ task.X / n + lam * np.eye(p)
    b = task.X.T @ task.y / n
    try:
        w = np.linalg.solve(A, b)
    except np.linalg.LinAlgError:
        raise SingularSystemError(
            f"task {task.task_id!r}: ridge system singular at penalty {lam:g}"
        ) from None
    return SingleTaskFit(w, 0.0, lam, "ridge", 1, True)


def select_ridge(
    train: TaskDataset, validation: TaskDataset, lambdas: np.ndarray
) -> SingleTaskFit:
    """Validation-selected ridge penalty; ties go to the larger penalty."""
    lambdas = np.sort(np.asarray(lambdas, dtype=float))[::-1]
    best_fit, best_err = None, np.inf
    for lam in lambdas:
        fit = fit_ridge(train, float(lam))
        err = float(np.mean((validation.y - fit.predict(validation.X)) ** 2))
        if err < best_err:
            best_fit, best_err = fit, err
    return best_fit


def fit_ols(task: TaskDataset) -> SingleTaskFit:
    """Ordinary least squares; requires a full-column-rank design."""
    n, p = task.X.shape
    if np.linalg.matrix_rank(task.X) < p:
        raise SingularSystemError(f"task {task.task_id!r}: design is rank-deficient")
    w, *_ = np.linalg.lstsq(task.X, task.y, rcond=None)
    return SingleTaskFit(w, 0.0, 0.0, "ols", 1, True)


def fit_logistic_ridge(
    task: TaskDataset,
    lam: float,
    intercept_ridge: float = 0.0,
    tol: float = 1e-8,
    max_iter: int = 100,
) -> SingleTaskFit:
    """Ridge-penalized logistic regression by damped Newton.

    Minimizes -(1/n) sum_i [y_i th_i - log(1+e^{th_i})] + (lam/2)||w||^2
    + (intercept_ridge/2) w0^2 with th_i = w0 + x_i'w. Step halving keeps the
    objective monotone; raises SeparationError if an unpenalized fit diverges.
    """
    if lam < 0 or intercept_ridge < 0:
        raise ConfigInvalidError("penalties must be >= 0")
    n, p = task.X.shape
    X1 = np.hstack([np.ones((n, 1)), task.X])
    theta = np.zeros(p + 1)  # [w0, w]
    reg = np.concatenate([[intercept_ridge], np.full(p, lam)])

    def mean_logloss(th):
        eta = X1 @ th
        return -float(np.sum(task.y * eta - np.logaddexp(0.0, eta)) / n)

    def objective(th):
        return mean_logloss(th) + 0.5 * float(reg @ th**2)

    def finish(th, it):
        # An attained unpenalized optimum keeps at least one sample at
        # log-loss >= log 2; losses this small mean the data are separated
        # and the fit is diverging rather than converging.
        if lam == 0.0 and intercept_ridge == 0.0 and mean_logloss(th) < np.log(2) / (2 * n):
            raise SeparationError(task.task_id)
        return SingleTaskFit(th[1:], float(th[0]), lam, "logistic_ridge", it, True)

    obj = objective(theta)
    for it in range(1, max_iter + 1):
        eta = X1 @ theta
        pi = _sigmoid(eta)
        grad = -X1.T @ (task.y - pi) / n + reg * theta
        gnorm = float(np.linalg.norm(grad, np.inf))
        if gnorm <= tol:
            return finish(theta, it)
        d = np.maximum(pi * (1.0 - pi), 1e-10)
        H = (X1.T * d) @ X1 / n + np.diag(reg)
        try:
            step = np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            raise HessianSingularError(
                f"task {task.task_id!r}: singular logistic Hessian"
            ) from None
        t = 1.0
        while t > 1e-12:
            cand = theta - t * step
            cand_obj = objective(cand)
            if cand_obj <= obj + 1e-14:
                theta, obj = cand, cand_obj
                break
            t /= 2.0
        else:
            # No descent possible: gradient tolerance effectively reached.
            return finish(theta, it)
        if lam == 0.0 and np.linalg.norm(theta[1:]) > 1e8:
            raise SeparationError(task.task_id)
    eta = X1 @ theta
    gnorm = float(np.linalg.norm(-X1.T @ (task.y - _sigmoid(eta)) / n + reg * theta, np.inf))
    if gnorm <= 1e-4:
        # Flat tail (e.g. near-separable data); accept the stationary point.
        return finish(theta, max_iter)
    raise NonConvergenceError(
        f"logistic ridge did not converge for task {task.task_id!r}",
        iterations=max_iter,
        state=theta,
        residuals=gnorm,
    )
