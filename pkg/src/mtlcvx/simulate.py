"""Synthetic multi-task data with clustered coefficients and AR(1) designs.

Tasks are split evenly into C clusters. Features are partitioned uniformly at
random over clusters; cluster c's centroid u*_c is supported on its own
feature block with N(0, sigma_u2) entries, and each task adds a N(0,
sigma_v2) deviation on the same block, so w*_m = u*_c(m) + v*_m. Design rows
are N(0, Sigma) with Sigma_ij = phi^|i-j|; responses are X w* + N(0, sigma2)
noise, or Bernoulli draws through a logistic link for binary profiles.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .data import TaskDataset
from .errors import ConfigInvalidError

__all__ = [
    "SimConfig",
    "GroundTruth",
    "SimData",
    "cholesky_ar1",
    "generate",
    "benchmark_profile",
    "PROFILES",
]


@dataclass(frozen=True)
class SimConfig:
    """Generator settings; defaults reproduce the main simulation design."""

    T: int = 100
    C: int = 10
    p: int = 100
    n_train: int = 30
    n_val: int = 100
    n_test: int = 100
    phi: float = 0.0
    sigma2: float = 5.0
    sigma_u2: float = 100.0
    sigma_v2: float = 1.0
    loss_kind: str = "linear"
    intercept: float = 0.0

    def __post_init__(self):
        if self.C < 1 or self.T < 1 or self.p < 1:
            raise ConfigInvalidError("T, C and p must be >= 1")
        if self.T % self.C != 0:
            raise ConfigInvalidError(f"T={self.T} must be divisible by C={self.C}")
        if self.p < self.C:
            raise ConfigInvalidError("need at least one feature per cluster")
        if not (-1.0 < self.phi < 1.0):
            raise ConfigInvalidError(f"phi must lie in (-1, 1), got {self.phi}")
        if min(self.sigma2, self.sigma_u2, self.sigma_v2) < 0:
            raise ConfigInvalidError("variances must be >= 0")
        if min(self.n_train, self.n_val, self.n_test) < 1:
            raise ConfigInvalidError("split sizes must be >= 1")
        if self.loss_kind not in ("linear", "logistic"):
            raise ConfigInvalidError(f"unknown loss kind {self.loss_kind!r}")


@dataclass(frozen=True)
class GroundTruth:
    """True parameters behind one generated dataset."""

    W_star: np.ndarray        # (T, p) per-task coefficients
    U_star: np.ndarray        # (C, p) cluster centroids
    labels: np.ndarray        # (T,) cluster index per task
    feature_assignment: np.ndarray  # (p,) cluster index per feature
    intercept: float

    def __post_init__(self):
        for name in ("W_star", "U_star"):
            a = np.array(getattr(self, name), dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        for name in ("labels", "feature_assignment"):
            a = np.array(getattr(self, name), dtype=int)
            a.setflags(write=False)
            object.__setattr__(self, name, a)


@dataclass(frozen=True)
class SimData:
    """Generated splits plus the ground truth that produced them."""

    train: list
    validation: list
    test: list
    truth: GroundTruth
    config: SimConfig


def cholesky_ar1(p: int, phi: float) -> np.ndarray:
    """Lower Cholesky factor of the AR(1) covariance phi^|i-j|, closed form.

    Row i is the coefficient pattern of x_i = phi*x_{i-1} + sqrt(1-phi^2)*z_i
    started from x_0 = z_0.
    """
    if not (-1.0 < phi < 1.0):
        raise ConfigInvalidError(f"phi must lie in (-1, 1), got {phi}")
    L = np.zeros((p, p))
    idx = np.arange(p)
    L[:, 0] = phi**idx
    s = np.sqrt(1.0 - phi * phi)
    for j in range(1, p):
        L[j:, j] = s * phi ** (idx[j:] - j)
    return L


def _draw_assignment(rng: np.random.Generator, p: int, C: int) -> np.ndarray:
    """Uniform feature-to-cluster assignment, redrawn until no cluster is empty."""
    while True:
        assign = rng.integers(0, C, size=p)
        if len(np.unique(assign)) == C:
            return assign


def generate(config: SimConfig, seed: int) -> SimData:
    """Draw one dataset. Deterministic in (config, seed)."""
    ss = np.random.SeedSequence([seed])
    root = np.random.default_rng(ss)
    C, T, p = config.C, config.T, config.p

    assign = _draw_assignment(root, p, C)
    U_star = np.zeros((C, p))
    for c in range(C):
        block = assign == c
        U_star[c, block] = root.normal(scale=np.sqrt(config.sigma_u2), size=int(block.sum()))
    labels = np.repeat(np.arange(C), T // C)
    W_star = np.empty((T, p))
    for m in range(T):
        c = labels[m]
        block = assign == c
        v = np.zeros(p)
        v[block] = root.normal(scale=np.sqrt(config.sigma_v2), size=int(block.sum()))
        W_star[m] = U_star[c] + v

    L = cholesky_ar1(p, config.phi)
    task_seeds = ss.spawn(T)
    sizes = (config.n_train, config.n_val, config.n_test)
    splits: tuple[list, list, list] = ([], [], [])
    for m in range(T):
        rng = np.random.default_rng(task_seeds[m])
        tid = f"task{m:03d}"
        for part, n in zip(splits, sizes):
            X = rng.normal(size=(n, p)) @ L.T
            eta = config.intercept + X @ W_star[m]
            if config.loss_kind == "linear":
                y = eta + rng.normal(scale=np.sqrt(config.sigma2), size=n)
            else:
                y = (rng.random(n) < 1.0 / (1.0 + np.exp(-eta))).astype(float)
            part.append(TaskDataset(tid, y, X, config.loss_kind))
    truth = GroundTruth(
        W_star=W_star,
        U_star=U_star,
        labels=labels,
        feature_assignment=assign,
        intercept=config.intercept,
    )
    return SimData(
        train=splits[0], validation=splits[1], test=splits[2], truth=truth, config=config
    )


def benchmark_profile(C: int = 10, phi: float = 0.0, sigma_v2: float = 1.0) -> SimConfig:
    """Main benchmark design: 100 tasks, 100 features, 30/100/100 splits."""
    return SimConfig(T=100, C=C, p=100, phi=phi, sigma_v2=sigma_v2)


PROFILES: dict[str, SimConfig] = {
    # Full-size benchmark designs.
    "benchmark-c10": benchmark_profile(C=10),
    "benchmark-c5": benchmark_profile(C=5),
    # Linear tasks with mild feature correlation, small enough for quick runs.
    "school-like": SimConfig(
        T=20, C=4, p=8, n_train=40, n_val=30, n_test=60,
        phi=0.25, sigma2=2.0, sigma_u2=25.0, sigma_v2=1.0,
    ),
    # Imbalanced binary tasks in two groups.
    "landmine-like": SimConfig(
        T=10, C=2, p=9, n_train=80, n_val=60, n_test=120,
        phi=0.0, sigma2=0.0, sigma_u2=1.5, sigma_v2=0.05,
        loss_kind="logistic", intercept=-1.5,
    ),
}


def scaled_profile(config: SimConfig, T: int | None = None, **overrides) -> SimConfig:
    """Copy of a profile with some fields overridden (e.g. a smaller T)."""
    if T is not None:
        overrides["T"] = T
    return replace(config, **overrides)
