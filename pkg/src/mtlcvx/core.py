"""Joint multi-task estimation by block coordinate descent.

The model couples T per-task coefficient vectors w_m through task centroids
u_m living on a weighted similarity graph:

    min_{W, U}  sum_m L_m(w_m, w0_m)
              + (lam1/2) sum_m ||w_m - u_m||^2
              + lam2 sum_{(m,l) in E} r_{m,l} ||u_m - u_l||_2

with L_m the squared loss (1/(2n_m))||y_m - X_m w_m||^2 for real responses or
the (mean) logistic negative log-likelihood, optionally plus a small ridge on
the intercept. Alternating exact minimization over U (fused centroid
subproblem) and over each w_m (closed-form ridge-like solve, or damped
Newton steps for logistic tasks) decreases the objective monotonically.

The two-stage adaptive variant refits after reweighting graph edges inversely
to the first stage's centroid distances, which sharpens cluster recovery.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .clustering import CentroidState, extract_clusters, solve_centroids
from .data import TaskDataset
from .errors import (
    ConfigInvalidError,
    DimensionMismatchError,
    HessianSingularError,
    NonConvergenceError,
)
from .graph import WeightGraph, adaptive_weights
from .single_task import _sigmoid, fit_logistic_ridge, fit_ridge


@dataclass(frozen=True)
class FitConfig:
    """Hyper-parameters and tolerances for the joint fit.

    lam1 couples coefficients to centroids (must be positive: at lam1 = 0 the
    blocks decouple and the model degenerates to single-task fits). lam2
    scales the fusion penalty; 0 disables clustering.
    """

    lam1: float
    lam2: float
    rho: float = 1.0
    intercept_ridge: float = 0.0
    max_outer: int = 500
    tol: float = 1e-6
    centroid_tol: float = 1e-8
    centroid_max_outer: int = 500
    newton_tol: float = 1e-8
    newton_max: int = 50

    def __post_init__(self):
        if not (self.lam1 > 0):
            raise ConfigInvalidError(f"lam1 must be > 0, got {self.lam1}")
        if self.lam2 < 0:
            raise ConfigInvalidError(f"lam2 must be >= 0, got {self.lam2}")
        if self.rho <= 0:
            raise ConfigInvalidError(f"rho must be > 0, got {self.rho}")
        if self.intercept_ridge < 0:
            raise ConfigInvalidError("intercept_ridge must be >= 0")
        for name in ("max_outer", "centroid_max_outer", "newton_max"):
            if getattr(self, name) < 1:
                raise ConfigInvalidError(f"{name} must be >= 1")


@dataclass(frozen=True)
class ModelState:
    """Fitted coefficients, centroids and bookkeeping for one joint fit."""

    W: np.ndarray
    intercepts: np.ndarray
    U: np.ndarray
    labels: np.ndarray
    task_ids: tuple
    loss_kind: str
    config: FitConfig
    graph: WeightGraph
    objective: float
    trace: tuple
    n_iter: int
    converged: bool

    def __post_init__(self):
        for name in ("W", "intercepts", "U"):
            a = np.array(getattr(self, name), dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        lab = np.array(self.labels, dtype=int)
        lab.setflags(write=False)
        object.__setattr__(self, "labels", lab)
        object.__setattr__(self, "task_ids", tuple(self.task_ids))
        object.__setattr__(self, "trace", tuple(float(v) for v in self.trace))

    @property
    def n_tasks(self) -> int:
        return self.W.shape[0]

    @property
    def n_clusters(self) -> int:
        return int(self.labels.max()) + 1

    def predict(self, task_index: int, X: np.ndarray) -> np.ndarray:
        """Linear predictor for one task; probabilities for logistic tasks."""
        eta = self.intercepts[task_index] + np.asarray(X) @ self.W[task_index]
        return _sigmoid(eta) if self.loss_kind == "logistic" else eta


def task_loss(task: TaskDataset, w: np.ndarray, w0: float, intercept_ridge: float) -> float:
    """Per-task data-fit term of the joint objective."""
    if task.loss_kind == "linear":
        r = task.y - task.X @ w
        return 0.5 * float(r @ r) / task.n_samples
    eta = w0 + task.X @ w
    ll = float(np.sum(task.y * eta - np.logaddexp(0.0, eta))) / task.n_samples
    return -ll + 0.5 * intercept_ridge * w0 * w0


def mtl_objective(
    tasks: list[TaskDataset],
    W: np.ndarray,
    intercepts: np.ndarray,
    U: np.ndarray,
    graph: WeightGraph,
    config: FitConfig,
) -> float:
    """Full joint objective at (W, intercepts, U)."""
    total = sum(
        task_loss(t, W[m], float(intercepts[m]), config.intercept_ridge)
        for m, t in enumerate(tasks)
    )
    total += 0.5 * config.lam1 * float(np.sum((W - U) ** 2))
    diffs = U[graph.edges[:, 0]] - U[graph.edges[:, 1]]
    total += config.lam2 * float(graph.weights @ np.linalg.norm(diffs, axis=1))
    return total


def _check_tasks(tasks: list[TaskDataset], graph: WeightGraph) -> tuple[str, int]:
    if not tasks:
        raise ConfigInvalidError("need at least one task")
    kinds = {t.loss_kind for t in tasks}
    if len(kinds) != 1:
        raise ConfigInvalidError(f"tasks mix loss kinds {sorted(kinds)}")
    ps = {t.n_features for t in tasks}
    if len(ps) != 1:
        raise DimensionMismatchError(f"tasks disagree on feature count: {sorted(ps)}")
    if graph.n_nodes != len(tasks):
        raise DimensionMismatchError(
            f"graph has {graph.n_nodes} nodes but there are {len(tasks)} tasks"
        )
    return kinds.pop(), ps.pop()


def _default_init(tasks: list[TaskDataset], config: FitConfig) -> tuple[np.ndarray, np.ndarray]:
    """Per-task ridge fits (penalty 1) used when no initializer is supplied."""
    p = tasks[0].n_features
    W = np.empty((len(tasks), p))
    icpts = np.zeros(len(tasks))
    for m, t in enumerate(tasks):
        if t.loss_kind == "linear":
            W[m] = fit_ridge(t, 1.0).coef
        else:
            fit = fit_logistic_ridge(t, 1.0, config.intercept_ridge)
            W[m], icpts[m] = fit.coef, fit.intercept
    return W, icpts


class _LinearTaskSolver:
    """Closed-form coefficient update with a cached Cholesky factor.

    For fixed lam1 the system matrix X'X/n + lam1 I never changes, so it is
    factorized once and each block update is two triangular solves.
    """

    def __init__(self, task: TaskDataset, lam1: float):
        n = task.n_samples
        A = task.X.T @ task.X / n + lam1 * np.eye(task.n_features)
        self._factor = cho_factor(A)
        self._xty = task.X.T @ task.y / n
        self._lam1 = lam1

    def solve(self, u: np.ndarray) -> np.ndarray:
        return cho_solve(self._factor, self._xty + self._lam1 * u)


def _newton_logistic_step(
    task: TaskDataset,
    w: np.ndarray,
    w0: float,
    u: np.ndarray,
    config: FitConfig,
) -> tuple[np.ndarray, float]:
    """Damped Newton iterations for one logistic task's (w0, w) block.

    Alternates the scalar intercept update and the coefficient update, both
    derived from the current curvature pi*(1-pi); each proposed step is
    halved until the block objective does not increase, which keeps the
    outer descent monotone even far from the optimum.
    """
    n = task.n_samples
    X, y = task.X, task.y
    ir = config.intercept_ridge
    lam1 = config.lam1

    def block_obj(w_, w0_):
        return task_loss(task, w_, w0_, ir) + 0.5 * lam1 * float((w_ - u) @ (w_ - u))

    obj = block_obj(w, w0)
    for _ in range(config.newton_max):
        eta = w0 + X @ w
        pi = _sigmoid(eta)
        resid = y - pi
        grad_w = -X.T @ resid / n + lam1 * (w - u)
        grad_0 = -float(resid.sum()) / n + ir * w0
        if max(float(np.abs(grad_w).max()), abs(grad_0)) <= config.newton_tol:
            break
        d = np.maximum(pi * (1.0 - pi), 1e-10)

        # Intercept update from the scalar curvature.
        denom = float(d.sum()) / n + ir
        step0 = grad_0 / denom
        t = 1.0
        while t > 1e-12:
            cand0 = w0 - t * step0
            cand_obj = block_obj(w, cand0)
            if cand_obj <= obj + 1e-14:
                w0, obj = cand0, cand_obj
                break
            t /= 2.0

        # Coefficient update; curvature changes with w0, so recompute.
        eta = w0 + X @ w
        pi = _sigmoid(eta)
        resid = y - pi
        d = np.maximum(pi * (1.0 - pi), 1e-10)
        H = (X.T * d) @ X / n + lam1 * np.eye(task.n_features)
        g = -X.T @ resid / n + lam1 * (w - u)
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            raise HessianSingularError(
                f"task {task.task_id!r}: singular curvature in coefficient update"
            ) from None
        t = 1.0
        while t > 1e-12:
            cand = w - t * step
            cand_obj = block_obj(cand, w0)
            if cand_obj <= obj + 1e-14:
                w, obj = cand, cand_obj
                break
            t /= 2.0
        else:
            break  # no descent direction left at working precision
    return w, w0


def fit_mtlcvx(
    tasks: list[TaskDataset],
    graph: WeightGraph,
    config: FitConfig,
    init: tuple[np.ndarray, np.ndarray] | None = None,
    strict: bool = False,
) -> ModelState:
    """Block coordinate descent on the joint objective.

    Each round solves the fused centroid subproblem at the current W
    (warm-started from the previous round) and then minimizes every task
    block at the new centroids. Stops when the relative objective decrease
    falls below config.tol. The objective trace is recorded per round and is
    non-increasing up to 1e-10.

    init optionally supplies (W0, intercepts0); the default is per-task
    ridge fits. With strict=True, failure to converge raises
    NonConvergenceError carrying the last state.
    """
    loss_kind, p = _check_tasks(tasks, graph)
    if init is None:
        W, icpts = _default_init(tasks, config)
    else:
        W = np.array(init[0], dtype=float)
        icpts = np.array(init[1], dtype=float)
        if W.shape != (len(tasks), p) or icpts.shape != (len(tasks),):
            raise DimensionMismatchError("initializer shapes do not match tasks")

    lin_solvers = (
        [_LinearTaskSolver(t, config.lam1) for t in tasks] if loss_kind == "linear" else None
    )
    centroid_state: CentroidState | None = None
    U = W.copy()
    obj = mtl_objective(tasks, W, icpts, U, graph, config)
    trace = [obj]
    converged = False
    it = 0
    for it in range(1, config.max_outer + 1):
        centroid_state = solve_centroids(
            W,
            graph,
            config.lam1,
            config.lam2,
            rho=config.rho,
            warm=centroid_state,
            outer_tol=config.centroid_tol,
            outer_max=config.centroid_max_outer,
        )
        U = np.array(centroid_state.U)
        if loss_kind == "linear":
            for m in range(len(tasks)):
                W[m] = lin_solvers[m].solve(U[m])
        else:
            for m, t in enumerate(tasks):
                W[m], icpts[m] = _newton_logistic_step(t, W[m], float(icpts[m]), U[m], config)
        new_obj = mtl_objective(tasks, W, icpts, U, graph, config)
        trace.append(new_obj)
        if abs(trace[-2] - new_obj) <= config.tol * max(1.0, abs(trace[-2])):
            converged = True
            break
    labels = extract_clusters(U)
    state = ModelState(
        W=W,
        intercepts=icpts,
        U=U,
        labels=labels,
        task_ids=tuple(t.task_id for t in tasks),
        loss_kind=loss_kind,
        config=config,
        graph=graph,
        objective=trace[-1],
        trace=trace,
        n_iter=it,
        converged=converged,
    )
    if strict and not converged:
        raise NonConvergenceError(
            f"joint fit did not converge in {config.max_outer} rounds",
            iterations=it,
            state=state,
            residuals=abs(trace[-2] - trace[-1]) if len(trace) > 1 else np.inf,
        )
    return state


@dataclass(frozen=True)
class AdaptiveFitResult:
    """Both stages of the adaptive fit plus the reweighted graph."""

    stage1: ModelState
    stage2: ModelState
    graph: WeightGraph

    # Convenience pass-throughs to the final-stage model.
    @property
    def W(self) -> np.ndarray:
        return self.stage2.W

    @property
    def U(self) -> np.ndarray:
        return self.stage2.U

    @property
    def intercepts(self) -> np.ndarray:
        return self.stage2.intercepts

    @property
    def labels(self) -> np.ndarray:
        return self.stage2.labels


def fit_mtlacvx(
    tasks: list[TaskDataset],
    graph: WeightGraph,
    config: FitConfig,
    stage2_config: FitConfig | None = None,
    init: tuple[np.ndarray, np.ndarray] | None = None,
    strict: bool = False,
) -> AdaptiveFitResult:
    """Two-stage adaptive fit.

    Stage one runs the joint fit on the supplied graph. Its centroid
    distances then reweight the edges (inverse distance, total weight
    preserved) and stage two refits on the reweighted graph, warm-started
    from stage one. Stage two may use its own hyper-parameters.
    """
    stage1 = fit_mtlcvx(tasks, graph, config, init=init, strict=strict)
    graph2 = adaptive_weights(graph, stage1.U)
    cfg2 = stage2_config if stage2_config is not None else config
    stage2 = fit_mtlcvx(
        tasks, graph2, cfg2, init=(stage1.W, stage1.intercepts), strict=strict
    )
    return AdaptiveFitResult(stage1=stage1, stage2=stage2, graph=graph2)


def model_to_dict(state: ModelState) -> dict:
    """JSON-ready representation of a fitted model."""
    return {
        "format": "mtlcvx-model",
        "version": 1,
        "loss_kind": state.loss_kind,
        "task_ids": [str(t) for t in state.task_ids],
        "coefficients": state.W.tolist(),
        "intercepts": state.intercepts.tolist(),
        "centroids": state.U.tolist(),
        "cluster_labels": state.labels.tolist(),
        "graph": {
            "n_nodes": state.graph.n_nodes,
            "edges": state.graph.edges.tolist(),
            "weights": state.graph.weights.tolist(),
        },
        "config": asdict(state.config),
        "objective": state.objective,
        "n_iter": state.n_iter,
        "converged": state.converged,
    }


def model_from_dict(doc: dict) -> ModelState:
    """Inverse of model_to_dict."""
    if doc.get("format") != "mtlcvx-model":
        raise ConfigInvalidError("not a model document")
    graph = WeightGraph(
        doc["graph"]["n_nodes"],
        np.array(doc["graph"]["edges"], dtype=int),
        np.array(doc["graph"]["weights"], dtype=float),
    )
    return ModelState(
        W=np.array(doc["coefficients"], dtype=float),
        intercepts=np.array(doc["intercepts"], dtype=float),
        U=np.array(doc["centroids"], dtype=float),
        labels=np.array(doc["cluster_labels"], dtype=int),
        task_ids=tuple(doc["task_ids"]),
        loss_kind=doc["loss_kind"],
        config=FitConfig(**doc["config"]),
        graph=graph,
        objective=float(doc["objective"]),
        trace=(float(doc["objective"]),),
        n_iter=int(doc["n_iter"]),
        converged=bool(doc["converged"]),
    )


def save_model(state: ModelState, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(state), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_model(path) -> ModelState:
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))
