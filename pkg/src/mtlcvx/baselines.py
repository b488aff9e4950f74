"""Baselines: network-fused regression over the task graph, and per-task fits.

The network-fused baseline couples coefficient vectors directly,

    min_W  sum_m L_m(w_m, w0_m) + lam sum_{(m,l) in E} r_{m,l} ||w_m - w_l||_2,

without the centroid layer of the main model. It is solved by an
edge-splitting consensus method: each edge holds copies of its endpoints'
coefficients, coefficient updates are ridge-like solves (or damped Newton for
logistic tasks), copy updates have a closed form via block soft-thresholding,
and scaled dual variables absorb the constraint violations.

The per-task runners fit each task independently and are the reference
points the joint methods are compared against: the lasso runner picks its
penalty by cross-validation within each task's training samples, the ridge
runner on held-out validation data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .clustering import extract_clusters
from .data import TaskDataset
from .errors import ConfigInvalidError, DimensionMismatchError, NonConvergenceError
from .graph import WeightGraph
from .single_task import (
    SingleTaskFit,
    _sigmoid,
    fit_logistic_ridge,
    fit_ols,
    select_lasso_cv,
    select_ridge,
)


@dataclass(frozen=True)
class NetworkLassoState:
    """Fitted network-fused baseline."""

    W: np.ndarray
    intercepts: np.ndarray
    labels: np.ndarray
    task_ids: tuple
    loss_kind: str
    lam: float
    objective: float
    n_iter: int
    converged: bool
    primal_residual: float
    dual_residual: float

    def __post_init__(self):
        for name in ("W", "intercepts"):
            a = np.array(getattr(self, name), dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        lab = np.array(self.labels, dtype=int)
        lab.setflags(write=False)
        object.__setattr__(self, "labels", lab)
        object.__setattr__(self, "task_ids", tuple(self.task_ids))

    def predict(self, task_index: int, X: np.ndarray) -> np.ndarray:
        eta = self.intercepts[task_index] + np.asarray(X) @ self.W[task_index]
        return _sigmoid(eta) if self.loss_kind == "logistic" else eta


def network_objective(
    tasks: list[TaskDataset],
    W: np.ndarray,
    intercepts: np.ndarray,
    graph: WeightGraph,
    lam: float,
    intercept_ridge: float = 0.0,
) -> float:
    """Value of the network-fused objective."""
    from .core import task_loss

    total = sum(
        task_loss(t, W[m], float(intercepts[m]), intercept_ridge)
        for m, t in enumerate(tasks)
    )
    diffs = W[graph.edges[:, 0]] - W[graph.edges[:, 1]]
    return total + lam * float(graph.weights @ np.linalg.norm(diffs, axis=1))


def _logistic_prox_newton(task, w, w0, rho_deg, v, intercept_ridge, tol=1e-9, max_iter=50):
    """Minimize L_m(w, w0) + (rho_deg/2)||w||^2 - v'w by damped Newton.

    rho_deg is rho times the node degree; v collects rho * sum_e (z - s).
    """
    n, p = task.X.shape
    X, y = task.X, task.y

    def obj(w_, w0_):
        eta = w0_ + X @ w_
        ll = float(np.sum(y * eta - np.logaddexp(0.0, eta))) / n
        return (
            -ll
            + 0.5 * intercept_ridge * w0_ * w0_
            + 0.5 * rho_deg * float(w_ @ w_)
            - float(v @ w_)
        )

    cur = obj(w, w0)
    for _ in range(max_iter):
        eta = w0 + X @ w
        pi = _sigmoid(eta)
        resid = y - pi
        g_w = -X.T @ resid / n + rho_deg * w - v
        g_0 = -float(resid.sum()) / n + intercept_ridge * w0
        if max(float(np.abs(g_w).max()), abs(g_0)) <= tol:
            break
        d = np.maximum(pi * (1.0 - pi), 1e-10)
        H = np.empty((p + 1, p + 1))
        H[0, 0] = float(d.sum()) / n + intercept_ridge
        H[0, 1:] = H[1:, 0] = X.T @ d / n
        H[1:, 1:] = (X.T * d) @ X / n + rho_deg * np.eye(p)
        step = np.linalg.solve(H, np.concatenate([[g_0], g_w]))
        t = 1.0
        while t > 1e-12:
            cand0, cand = w0 - t * step[0], w - t * step[1:]
            cand_obj = obj(cand, cand0)
            if cand_obj <= cur + 1e-14:
                w0, w, cur = cand0, cand, cand_obj
                break
            t /= 2.0
        else:
            break
    return w, w0


def fit_mtlnl(
    tasks: list[TaskDataset],
    graph: WeightGraph,
    lam: float,
    rho: float = 1.0,
    intercept_ridge: float = 0.0,
    tol: float = 1e-6,
    max_iter: int = 2000,
    strict: bool = False,
) -> NetworkLassoState:
    """Fit the network-fused baseline by edge-splitting consensus.

    Each iteration: (1) per-task coefficient solve against the averaged edge
    copies, (2) closed-form copy update -- endpoint copies move to their
    mean plus the block soft-thresholding of half their difference at level
    lam*r/rho, (3) scaled dual ascent. Stops when both the primal residual
    (coefficient/copy gaps) and the dual residual (copy movement) fall below
    tol relative to the coefficient scale.
    """
    from .core import _check_tasks

    loss_kind, p = _check_tasks(tasks, graph)
    if lam < 0:
        raise ConfigInvalidError("fusion penalty must be >= 0")
    if rho <= 0:
        raise ConfigInvalidError("rho must be > 0")
    T = len(tasks)

    if lam == 0.0:
        W = np.empty((T, p))
        icpts = np.zeros(T)
        for m, t in enumerate(tasks):
            if loss_kind == "linear":
                W[m] = np.linalg.lstsq(t.X, t.y, rcond=None)[0]
            else:
                fit = fit_logistic_ridge(t, 0.0, intercept_ridge)
                W[m], icpts[m] = fit.coef, fit.intercept
        obj = network_objective(tasks, W, icpts, graph, 0.0, intercept_ridge)
        return NetworkLassoState(
            W, icpts, extract_clusters(W), tuple(t.task_id for t in tasks),
            loss_kind, 0.0, obj, 0, True, 0.0, 0.0,
        )

    E = graph.n_edges
    deg = graph.degrees()
    edges = graph.edges
    thresholds = lam * graph.weights / rho

    lin_factors = None
    lin_xty = None
    if loss_kind == "linear":
        lin_factors, lin_xty = [], []
        for m, t in enumerate(tasks):
            A = t.X.T @ t.X / t.n_samples + rho * deg[m] * np.eye(p)
            lin_factors.append(cho_factor(A))
            lin_xty.append(t.X.T @ t.y / t.n_samples)

    # Edge copies Z[:, 0] for the edge's first endpoint, Z[:, 1] for the
    # second; S holds the matching scaled duals.
    if loss_kind == "linear":
        W = np.stack([cho_solve(lin_factors[m], lin_xty[m]) for m in range(T)])
    else:
        W = np.zeros((T, p))
    icpts = np.zeros(T)
    Z = W[edges].copy()  # (E, 2, p)
    S = np.zeros_like(Z)

    converged = False
    pri = dual = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        # Coefficient update: gather rho * sum over incident edges of (z - s).
        V = np.zeros((T, p))
        np.add.at(V, edges[:, 0], rho * (Z[:, 0] - S[:, 0]))
        np.add.at(V, edges[:, 1], rho * (Z[:, 1] - S[:, 1]))
        if loss_kind == "linear":
            for m in range(T):
                W[m] = cho_solve(lin_factors[m], lin_xty[m] + V[m])
        else:
            for m, t in enumerate(tasks):
                W[m], icpts[m] = _logistic_prox_newton(
                    t, W[m], float(icpts[m]), rho * deg[m], V[m], intercept_ridge
                )

        # Copy update (closed form).
        a = W[edges[:, 0]] + S[:, 0]
        b = W[edges[:, 1]] + S[:, 1]
        mean = 0.5 * (a + b)
        half = 0.5 * (a - b)
        nrm = np.linalg.norm(half, axis=1)
        shrink = np.maximum(0.0, 1.0 - thresholds / np.maximum(nrm, 1e-300))
        d = half * shrink[:, None]
        Z_new = np.stack([mean + d, mean - d], axis=1)

        pri = float(
            np.sqrt(
                np.sum((W[edges[:, 0]] - Z_new[:, 0]) ** 2)
                + np.sum((W[edges[:, 1]] - Z_new[:, 1]) ** 2)
            )
        )
        dual = rho * float(np.linalg.norm(Z_new - Z))
        Z = Z_new
        S[:, 0] += W[edges[:, 0]] - Z[:, 0]
        S[:, 1] += W[edges[:, 1]] - Z[:, 1]

        scale = max(1.0, float(np.linalg.norm(W)))
        if pri <= tol * scale and dual <= tol * scale:
            converged = True
            break

    obj = network_objective(tasks, W, icpts, graph, lam, intercept_ridge)
    state = NetworkLassoState(
        W=W,
        intercepts=icpts,
        labels=extract_clusters(W),
        task_ids=tuple(t.task_id for t in tasks),
        loss_kind=loss_kind,
        lam=lam,
        objective=obj,
        n_iter=it,
        converged=converged,
        primal_residual=pri,
        dual_residual=dual,
    )
    if strict and not converged:
        raise NonConvergenceError(
            f"consensus solver did not reach tolerance {tol:g} in {max_iter} iterations",
            iterations=it,
            state=state,
            residuals=(pri, dual),
        )
    return state


def select_mtlnl(
    train: list[TaskDataset],
    validation: list[TaskDataset],
    graph: WeightGraph,
    lambdas: np.ndarray,
    **kwargs,
) -> NetworkLassoState:
    """Pick the fusion penalty with the lowest mean validation squared error.

    Ties go to the larger penalty (grid is scanned in descending order).
    """
    if len(train) != len(validation):
        raise DimensionMismatchError("train/validation task lists differ in length")
    lambdas = np.sort(np.asarray(lambdas, dtype=float))[::-1]
    best, best_err = None, np.inf
    for lam in lambdas:
        state = fit_mtlnl(train, graph, float(lam), **kwargs)
        err = mean_validation_error(state, validation)
        if err < best_err:
            best, best_err = state, err
    return best


def mean_validation_error(state, validation: list[TaskDataset]) -> float:
    """Mean over tasks of the validation mean squared prediction error.

    For logistic models the error is measured between probabilities and
    binary labels (Brier score), which is what the fusion penalty is tuned
    against.
    """
    errs = []
    for m, t in enumerate(validation):
        pred = state.predict(m, t.X)
        errs.append(float(np.mean((t.y - pred) ** 2)))
    return float(np.mean(errs))


def run_stll(
    train: list[TaskDataset],
    lambdas: np.ndarray | None = None,
    n_folds: int = 10,
    rule: str = "min",
    seed: int = 0,
) -> list[SingleTaskFit]:
    """Independent lasso per task, penalty chosen by cross-validation on that
    task's own training samples (held-out-error minimizer by default).

    Binary tasks are fit by squared loss on the 0/1 labels, which keeps the
    baseline a pure lasso; its linear scores are still usable for ranking
    metrics. Fold seeds derive from seed and the task position, so the run
    is reproducible. These fits also seed the task graph for the joint
    methods, where the "min" rule matters: the sparser "1se" rule shrinks
    coefficient distances enough to degrade neighbor identification.
    """
    fits = []
    for m, tr in enumerate(train):
        task_seed = int(np.random.SeedSequence([int(seed), m]).generate_state(1)[0])
        fits.append(select_lasso_cv(tr, n_folds, lambdas, rule, task_seed))
    return fits


def run_stlr(
    train: list[TaskDataset],
    validation: list[TaskDataset],
    lambdas: np.ndarray | None = None,
    intercept_ridge: float = 0.0,
) -> list[SingleTaskFit]:
    """Independent ridge per task (logistic ridge for binary tasks).

    Linear tasks select the penalty by validation mean squared error;
    logistic tasks by validation log-loss.
    """
    if len(train) != len(validation):
        raise DimensionMismatchError("train/validation task lists differ in length")
    if lambdas is None:
        lambdas = np.geomspace(1e-4, 1e2, 20)
    fits = []
    for tr, va in zip(train, validation):
        if tr.loss_kind == "linear":
            fits.append(select_ridge(tr, va, lambdas))
        else:
            best, best_loss = None, np.inf
            for lam in np.sort(np.asarray(lambdas, dtype=float))[::-1]:
                fit = fit_logistic_ridge(tr, float(lam), intercept_ridge)
                eta = fit.intercept + va.X @ fit.coef
                loss = float(np.mean(np.logaddexp(0.0, eta) - va.y * eta))
                if loss < best_loss:
                    best, best_loss = fit, loss
            fits.append(best)
    return fits


def run_stl_ols(tasks: list[TaskDataset]) -> list[SingleTaskFit]:
    """Independent unpenalized least squares per task."""
    return [fit_ols(t) for t in tasks]
