"""Task datasets: containers, standardization, CSV ingestion, splits, down-sampling.

A "task" is one regression problem among the T problems estimated jointly.
All tasks in a problem share the feature dimension p but may differ in sample
count. Responses are real-valued for squared loss and {0,1} for logistic loss.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigInvalidError,
    ConstantColumnError,
    NonNumericCellError,
    SchemaMismatchError,
    SingleClassError,
    TooFewSamplesError,
)

LOSS_KINDS = ("linear", "logistic")


def _frozen_array(a, dtype=float, ndim=None) -> np.ndarray:
    out = np.array(a, dtype=dtype)
    if ndim is not None and out.ndim != ndim:
        raise ConfigInvalidError(f"expected a {ndim}-d array, got shape {out.shape}")
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class TaskDataset:
    """One task's response vector and design matrix.

    Immutable after construction; arrays are copied and marked read-only so
    instances can be shared freely across parallel workers.
    """

    task_id: object
    y: np.ndarray
    X: np.ndarray
    loss_kind: str = "linear"

    def __post_init__(self):
        object.__setattr__(self, "y", _frozen_array(self.y, ndim=1))
        object.__setattr__(self, "X", _frozen_array(self.X, ndim=2))
        if self.loss_kind not in LOSS_KINDS:
            raise ConfigInvalidError(f"unknown loss kind {self.loss_kind!r}")
        if self.X.shape[0] != self.y.shape[0]:
            raise ConfigInvalidError(
                f"task {self.task_id!r}: X has {self.X.shape[0]} rows but y has {self.y.shape[0]}"
            )
        if self.n_samples < 1:
            raise ConfigInvalidError(f"task {self.task_id!r} is empty")
        if not np.isfinite(self.X).all() or not np.isfinite(self.y).all():
            raise ConfigInvalidError(f"task {self.task_id!r} contains non-finite values")
        if self.loss_kind == "logistic" and not np.isin(self.y, (0.0, 1.0)).all():
            raise ConfigInvalidError(f"task {self.task_id!r}: logistic responses must be 0 or 1")

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def take(self, rows) -> "TaskDataset":
        """New dataset restricted to the given row indices (order preserved)."""
        rows = np.asarray(rows, dtype=int)
        return TaskDataset(self.task_id, self.y[rows], self.X[rows], self.loss_kind)


@dataclass(frozen=True)
class StandardizationInfo:
    """Per-task centering/scaling statistics; invert with `destandardize_coefficients`."""

    y_mean: float
    x_means: np.ndarray
    x_scales: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x_means", _frozen_array(self.x_means, ndim=1))
        object.__setattr__(self, "x_scales", _frozen_array(self.x_scales, ndim=1))
        if (self.x_scales <= 0).any():
            raise ConfigInvalidError("x_scales must be strictly positive")


def standardize(task: TaskDataset) -> tuple[TaskDataset, StandardizationInfo]:
    """Center and unit-scale every feature column; center linear responses.

    Scales use the sample standard deviation (n-1 denominator). Logistic
    responses are left untouched. Raises ConstantColumnError if any column
    has zero variance.
    """
    X = task.X
    means = X.mean(axis=0)
    if task.n_samples < 2:
        raise ConstantColumnError(task.task_id, 0)
    scales = X.std(axis=0, ddof=1)
    for j in np.flatnonzero(scales == 0):
        raise ConstantColumnError(task.task_id, int(j))
    Xs = (X - means) / scales
    if task.loss_kind == "linear":
        y_mean = float(task.y.mean())
        ys = task.y - y_mean
    else:
        y_mean = 0.0
        ys = task.y
    info = StandardizationInfo(y_mean=y_mean, x_means=means, x_scales=scales)
    return TaskDataset(task.task_id, ys, Xs, task.loss_kind), info


def apply_standardization(task: TaskDataset, info: StandardizationInfo) -> TaskDataset:
    """Apply previously computed statistics (e.g. training-split stats) to a task."""
    Xs = (task.X - info.x_means) / info.x_scales
    ys = task.y - info.y_mean if task.loss_kind == "linear" else task.y
    return TaskDataset(task.task_id, ys, Xs, task.loss_kind)


def unstandardize(task: TaskDataset, info: StandardizationInfo) -> TaskDataset:
    """Invert `standardize`/`apply_standardization`."""
    X = task.X * info.x_scales + info.x_means
    y = task.y + info.y_mean if task.loss_kind == "linear" else task.y
    return TaskDataset(task.task_id, y, X, task.loss_kind)


def destandardize_coefficients(
    info: StandardizationInfo, coef: np.ndarray, intercept: float = 0.0
) -> tuple[np.ndarray, float]:
    """Map coefficients fitted on standardized data back to the original scale.

    Returns (coef_orig, intercept_orig) such that predictions
    intercept + x @ coef in original units equal the standardized-model
    predictions y_mean + intercept_std + x_std @ coef_std.
    """
    coef = np.asarray(coef, dtype=float)
    coef_orig = coef / info.x_scales
    intercept_orig = info.y_mean + intercept - float(info.x_means @ coef_orig)
    return coef_orig, intercept_orig


@dataclass(frozen=True)
class SplitSpec:
    """Train/validation/test split request, by fractions or absolute counts.

    Exactly one of `fractions` / `counts` is set. Counts mode gives
    (n_train, n_validation) with the remainder as test.
    """

    seed: int
    fractions: tuple[float, float, float] | None = None
    counts: tuple[int, int, int] | None = None

    def __post_init__(self):
        if (self.fractions is None) == (self.counts is None):
            raise ConfigInvalidError("set exactly one of fractions / counts")
        if self.fractions is not None:
            f = self.fractions
            if len(f) != 3 or any(not (0.0 < x < 1.0) for x in f):
                raise ConfigInvalidError("each fraction must lie in (0, 1)")
            if abs(sum(f) - 1.0) > 1e-9:
                raise ConfigInvalidError(f"fractions must sum to 1, got {sum(f)}")
        else:
            c = self.counts
            if len(c) != 3 or any(int(x) < 1 for x in c):
                raise ConfigInvalidError("each split count must be >= 1")

    @classmethod
    def from_fractions(cls, train: float, validation: float, test: float, seed: int) -> "SplitSpec":
        return cls(seed=seed, fractions=(train, validation, test))

    @classmethod
    def from_counts(cls, train: int, validation: int, test: int, seed: int) -> "SplitSpec":
        return cls(seed=seed, counts=(int(train), int(validation), int(test)))

    def sizes_for(self, n: int, task_id) -> tuple[int, int, int]:
        if self.counts is not None:
            a, b, c = self.counts
            if a + b + c != n:
                raise TooFewSamplesError(
                    task_id, f"task {task_id!r}: counts {self.counts} do not sum to n={n}"
                )
            return a, b, c
        ft, fv, _ = self.fractions
        a = int(np.floor(ft * n))
        b = int(np.floor(fv * n))
        c = n - a - b
        if min(a, b, c) < 1:
            raise TooFewSamplesError(task_id)
        return a, b, c


def split_tasks(
    tasks: list[TaskDataset], spec: SplitSpec
) -> tuple[list[TaskDataset], list[TaskDataset], list[TaskDataset]]:
    """Partition every task into train/validation/test subsets.

    The partition is a disjoint cover of each task's rows, deterministic in
    (spec.seed, task position). Row order within each subset follows the
    original dataset order.
    """
    train, val, test = [], [], []
    for idx, task in enumerate(tasks):
        n = task.n_samples
        a, b, c = spec.sizes_for(n, task.task_id)
        rng = np.random.default_rng(np.random.SeedSequence([spec.seed, idx]))
        perm = rng.permutation(n)
        train.append(task.take(np.sort(perm[:a])))
        val.append(task.take(np.sort(perm[a : a + b])))
        test.append(task.take(np.sort(perm[a + b :])))
    return train, val, test


def downsample_balanced(task: TaskDataset, seed: int) -> TaskDataset:
    """Equalize class counts in a binary task by dropping majority-class rows.

    Positives (y=1) are all retained whenever they are the minority class,
    which is the intended use; the majority class is subsampled without
    replacement. Row order is preserved.
    """
    if task.loss_kind != "logistic":
        raise ConfigInvalidError(f"task {task.task_id!r}: down-sampling requires a logistic task")
    pos = np.flatnonzero(task.y == 1.0)
    neg = np.flatnonzero(task.y == 0.0)
    if len(pos) == 0 or len(neg) == 0:
        raise SingleClassError(task.task_id)
    if len(pos) == len(neg):
        return task
    rng = np.random.default_rng(seed)
    if len(neg) > len(pos):
        keep_major = rng.choice(neg, size=len(pos), replace=False)
        kept = np.concatenate([pos, keep_major])
    else:
        keep_major = rng.choice(pos, size=len(neg), replace=False)
        kept = np.concatenate([keep_major, neg])
    return task.take(np.sort(kept))


@dataclass(frozen=True)
class CsvSchema:
    """Column layout for task CSV files: task_id, y, then feature columns."""

    loss_kind: str = "linear"
    task_column: str = "task_id"
    response_column: str = "y"


def load_tasks_csv(path, schema: CsvSchema = CsvSchema()) -> list[TaskDataset]:
    """Read tasks from a CSV with header `task_id,y,x1,...,xp`.

    Rows are grouped by task id, preserving file order within each task.
    Raises SchemaMismatchError for ragged rows or missing columns and
    NonNumericCellError (with the 1-based data row index) for bad cells.
    """
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaMismatchError(f"{path}: empty file") from None
        if len(header) < 3:
            raise SchemaMismatchError(
                f"{path}: need task-id, response and at least one feature column"
            )
        if header[0] != schema.task_column or header[1] != schema.response_column:
            raise SchemaMismatchError(
                f"{path}: header must start with "
                f"{schema.task_column!r},{schema.response_column!r}, got {header[:2]}"
            )
        width = len(header)
        groups: dict[str, list[tuple[float, list[float]]]] = {}
        for row_idx, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != width:
                raise SchemaMismatchError(
                    f"{path}: row {row_idx} has {len(row)} fields, expected {width}"
                )
            tid = row[0]
            try:
                yval = float(row[1])
            except ValueError:
                raise NonNumericCellError(row_idx, header[1]) from None
            feats = []
            for j, cell in enumerate(row[2:], start=2):
                try:
                    feats.append(float(cell))
                except ValueError:
                    raise NonNumericCellError(row_idx, header[j]) from None
            groups.setdefault(tid, []).append((yval, feats))
    if not groups:
        raise SchemaMismatchError(f"{path}: no data rows")
    tasks = []
    for tid, rows in groups.items():
        y = np.array([r[0] for r in rows])
        X = np.array([r[1] for r in rows])
        tasks.append(TaskDataset(tid, y, X, schema.loss_kind))
    return tasks


def save_tasks_csv(tasks: list[TaskDataset], path, schema: CsvSchema = CsvSchema()) -> None:
    """Write tasks in the layout `load_tasks_csv` reads; values round-trip exactly."""
    if not tasks:
        raise ConfigInvalidError("no tasks to write")
    p = tasks[0].n_features
    header = [schema.task_column, schema.response_column] + [f"x{j}" for j in range(1, p + 1)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for task in tasks:
            for i in range(task.n_samples):
                writer.writerow(
                    [task.task_id, repr(float(task.y[i]))]
                    + [repr(float(v)) for v in task.X[i]]
                )
