"""Evaluation metrics: normalized MSE, coefficient RMSE, and ranking AUC.

All aggregate metrics average a per-task quantity over tasks:

  - NMSE: mean squared prediction error divided by the variance of the
    reference response. On synthetic data the reference is the noiseless
    signal X w*, so a perfect fit scores 0 even under observation noise;
    on real data it is the observed response.
  - coefficient RMSE: the Euclidean distance ||w*_m - w_hat_m||_2, averaged
    over tasks.
  - AUC: probability that a random positive outscores a random negative
    (ties count one half), computed from midranks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .data import TaskDataset
from .errors import ConfigInvalidError, DimensionMismatchError, SingleClassError, ZeroVarianceError


@dataclass(frozen=True)
class EvalReport:
    """Per-task metric values with their mean and sample standard deviation."""

    metric: str
    per_task: np.ndarray
    task_ids: tuple

    def __post_init__(self):
        a = np.array(self.per_task, dtype=float)
        a.setflags(write=False)
        object.__setattr__(self, "per_task", a)
        object.__setattr__(self, "task_ids", tuple(self.task_ids))

    @property
    def mean(self) -> float:
        return float(self.per_task.mean())

    @property
    def std(self) -> float:
        if len(self.per_task) < 2:
            return 0.0
        return float(self.per_task.std(ddof=1))

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "mean": self.mean,
            "std": self.std,
            "per_task": self.per_task.tolist(),
            "task_ids": [str(t) for t in self.task_ids],
        }


def _check_lengths(tasks, W, intercepts):
    if len(tasks) != W.shape[0]:
        raise DimensionMismatchError(
            f"{len(tasks)} tasks but {W.shape[0]} coefficient rows"
        )
    if intercepts is not None and len(intercepts) != len(tasks):
        raise DimensionMismatchError("intercepts length does not match tasks")


def nmse(
    tasks: list[TaskDataset],
    W: np.ndarray,
    intercepts: np.ndarray | None = None,
    W_star: np.ndarray | None = None,
    true_intercepts: np.ndarray | None = None,
) -> EvalReport:
    """Normalized mean squared error per task.

    With W_star supplied, the reference response is the noiseless signal
    (true_intercept + X w*); otherwise the observed y. The normalizer is the
    sample variance (n-1 denominator) of the reference response.
    """
    W = np.atleast_2d(np.asarray(W, dtype=float))
    _check_lengths(tasks, W, intercepts)
    vals = []
    for m, t in enumerate(tasks):
        if W_star is not None:
            ref = t.X @ np.asarray(W_star)[m]
            if true_intercepts is not None:
                ref = ref + float(true_intercepts[m])
        else:
            ref = t.y
        var = float(np.var(ref, ddof=1))
        if var <= 0:
            raise ZeroVarianceError(t.task_id)
        pred = t.X @ W[m]
        if intercepts is not None:
            pred = pred + float(intercepts[m])
        vals.append(float(np.mean((ref - pred) ** 2)) / var)
    return EvalReport("nmse", np.array(vals), tuple(t.task_id for t in tasks))


def rmse_coeff(W_star: np.ndarray, W_hat: np.ndarray, task_ids=None) -> EvalReport:
    """Euclidean distance between true and estimated coefficients, per task."""
    W_star = np.atleast_2d(np.asarray(W_star, dtype=float))
    W_hat = np.atleast_2d(np.asarray(W_hat, dtype=float))
    if W_star.shape != W_hat.shape:
        raise DimensionMismatchError(
            f"coefficient arrays disagree: {W_star.shape} vs {W_hat.shape}"
        )
    vals = np.linalg.norm(W_star - W_hat, axis=1)
    ids = tuple(range(len(vals))) if task_ids is None else tuple(task_ids)
    return EvalReport("rmse", vals, ids)


def auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Rank-based AUC: P(score_pos > score_neg) + 0.5 P(equal)."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise DimensionMismatchError("scores and labels must be equal-length vectors")
    if not np.isin(labels, (0, 1)).all():
        raise ConfigInvalidError("labels must be 0/1")
    n_pos = int(np.sum(labels == 1))
    n_neg = int(np.sum(labels == 0))
    if n_pos == 0 or n_neg == 0:
        raise SingleClassError("<scores>")
    ranks = rankdata(scores)  # midranks handle ties
    rank_sum = float(ranks[labels == 1].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def auc_report(
    tasks: list[TaskDataset],
    W: np.ndarray,
    intercepts: np.ndarray | None = None,
) -> EvalReport:
    """Per-task AUC of the linear scores intercept + X w against the labels."""
    W = np.atleast_2d(np.asarray(W, dtype=float))
    _check_lengths(tasks, W, intercepts)
    vals = []
    for m, t in enumerate(tasks):
        scores = t.X @ W[m]
        if intercepts is not None:
            scores = scores + float(intercepts[m])
        vals.append(auc(scores, t.y))
    return EvalReport("auc", np.array(vals), tuple(t.task_id for t in tasks))


def adjusted_rand_index(labels_a, labels_b) -> float:
    """Chance-corrected agreement between two clusterings of the same items."""
    a = np.asarray(labels_a)
    b = np.asarray(labels_b)
    if a.shape != b.shape or a.ndim != 1:
        raise DimensionMismatchError("label vectors must be equal-length")
    n = len(a)
    ua, ia = np.unique(a, return_inverse=True)
    ub, ib = np.unique(b, return_inverse=True)
    cont = np.zeros((len(ua), len(ub)), dtype=np.int64)
    np.add.at(cont, (ia, ib), 1)

    def comb2(x):
        return x * (x - 1) / 2.0

    sum_cells = comb2(cont).sum()
    sum_rows = comb2(cont.sum(axis=1)).sum()
    sum_cols = comb2(cont.sum(axis=0)).sum()
    total = comb2(n)
    expected = sum_rows * sum_cols / total if total > 0 else 0.0
    max_index = 0.5 * (sum_rows + sum_cols)
    if max_index == expected:
        return 1.0
    return float((sum_cells - expected) / (max_index - expected))
