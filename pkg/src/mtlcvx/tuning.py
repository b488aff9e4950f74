"""Penalty selection on validation data and the Monte Carlo benchmark harness.

Grid search fits the joint model over a (lam1, lam2) grid, scores each cell
by mean validation prediction error, and keeps the best cell (ties prefer
stronger fusion, then stronger centroid pull). The benchmark harness repeats
a full synthetic pipeline -- generate, standardize, fit every requested
method with validation-tuned penalties, evaluate against the ground truth --
over independent replications and aggregates means and standard deviations.

Replications are seeded independently from a root seed, and aggregation is
by replication index, so results are identical whatever the process count.
"""

from __future__ import annotations

import csv
import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import __version__
from .baselines import mean_validation_error, run_stll, run_stlr, select_mtlnl
from .core import FitConfig, ModelState, fit_mtlcvx
from .data import TaskDataset, apply_standardization, destandardize_coefficients, standardize
from .errors import ConfigInvalidError, MtlcvxError, NonConvergenceError
from .graph import WeightGraph, adaptive_weights, build_knn_weights
from .metrics import adjusted_rand_index, auc_report, nmse, rmse_coeff
from .simulate import SimConfig, generate


@dataclass(frozen=True)
class GridSpec:
    """Penalty grids for the joint fits (descending order is not required)."""

    lam1: tuple
    lam2: tuple

    def __post_init__(self):
        l1 = tuple(float(v) for v in self.lam1)
        l2 = tuple(float(v) for v in self.lam2)
        if not l1 or not l2:
            raise ConfigInvalidError("penalty grids must be non-empty")
        if min(l1) <= 0:
            raise ConfigInvalidError("lam1 grid values must be > 0")
        if min(l2) < 0:
            raise ConfigInvalidError("lam2 grid values must be >= 0")
        object.__setattr__(self, "lam1", l1)
        object.__setattr__(self, "lam2", l2)

    @property
    def n_cells(self) -> int:
        return len(self.lam1) * len(self.lam2)


def default_grid(graph: WeightGraph | None = None, n1: int = 10, n2: int = 10) -> GridSpec:
    """Log-spaced lam1 in [1e-2, 1e2]; lam2 in [1e-3, 1e1] scaled by the
    mean edge weight of the graph (so fusion strength is comparable across
    graphs with different weight levels)."""
    scale = float(np.mean(graph.weights)) if graph is not None else 1.0
    return GridSpec(
        lam1=tuple(np.geomspace(1e-2, 1e2, n1)),
        lam2=tuple(np.geomspace(1e-3, 1e1, n2) * scale),
    )


@dataclass(frozen=True)
class GridSearchResult:
    """Winning cell of a validation grid search plus the full score table."""

    best_state: ModelState
    lam1: float
    lam2: float
    val_error: float
    table: tuple
    n_failures: int


def grid_search(
    train: list[TaskDataset],
    validation: list[TaskDataset],
    graph: WeightGraph,
    grid: GridSpec,
    base: FitConfig | None = None,
    init: tuple[np.ndarray, np.ndarray] | None = None,
) -> GridSearchResult:
    """Fit the joint model at every grid cell and keep the validation winner.

    Cells are visited with lam2 descending inside lam1 descending, each fit
    warm-started from the previous cell. Exact ties in validation error go
    to the larger lam2, then the larger lam1. Cells that fail numerically
    are recorded and skipped; if every cell fails the last error re-raises.
    """
    if base is None:
        base = FitConfig(lam1=1.0, lam2=0.0)
    lam1s = sorted(grid.lam1, reverse=True)
    lam2s = sorted(grid.lam2, reverse=True)
    best = None  # (err, lam2, lam1, state)
    table = []
    n_failures = 0
    last_exc: Exception | None = None
    warm = init
    for l1 in lam1s:
        row_warm = warm
        for l2 in lam2s:
            cfg = replace(base, lam1=l1, lam2=l2)
            try:
                state = fit_mtlcvx(train, graph, cfg, init=row_warm)
            except (MtlcvxError, np.linalg.LinAlgError) as exc:
                n_failures += 1
                last_exc = exc
                table.append(
                    {"lam1": l1, "lam2": l2, "val_error": None, "error": str(exc)}
                )
                continue
            row_warm = (state.W, state.intercepts)
            if warm is init:
                warm = row_warm  # carry the first finished cell to the next row
            err = mean_validation_error(state, validation)
            table.append(
                {
                    "lam1": l1,
                    "lam2": l2,
                    "val_error": err,
                    "n_iter": state.n_iter,
                    "converged": state.converged,
                    "n_clusters": state.n_clusters,
                }
            )
            key = (err, -l2, -l1)
            if best is None or key < (best[0], -best[1], -best[2]):
                best = (err, l2, l1, state)
    if best is None:
        raise NonConvergenceError(
            f"every grid cell failed; last error: {last_exc}", iterations=0
        )
    err, l2, l1, state = best
    return GridSearchResult(
        best_state=state,
        lam1=l1,
        lam2=l2,
        val_error=err,
        table=tuple(table),
        n_failures=n_failures,
    )


def tune_mtlacvx(
    train: list[TaskDataset],
    validation: list[TaskDataset],
    graph: WeightGraph,
    grid: GridSpec,
    base: FitConfig | None = None,
    stage1: GridSearchResult | None = None,
) -> tuple[GridSearchResult, GridSearchResult, WeightGraph]:
    """Two-stage tuning: reuse (or run) a stage-one search, reweight edges by
    inverse centroid distance, then search again on the adaptive graph."""
    if stage1 is None:
        stage1 = grid_search(train, validation, graph, grid, base=base)
    graph2 = adaptive_weights(graph, stage1.best_state.U)
    init = (stage1.best_state.W, stage1.best_state.intercepts)
    stage2 = grid_search(train, validation, graph2, grid, base=base, init=init)
    return stage1, stage2, graph2


KNOWN_METHODS = ("stll", "stlr", "mtlnl", "mtlcvx", "mtlacvx")


@dataclass(frozen=True)
class BenchmarkConfig:
    """One Monte Carlo study: a generator setting, methods, grids, seeds."""

    sim: SimConfig
    methods: tuple = ("stll", "mtlnl", "mtlcvx", "mtlacvx")
    n_reps: int = 20
    seed: int = 0
    knn_k: int = 5
    grid: GridSpec | None = None
    mtlnl_lambdas: tuple | None = None
    intercept_ridge: float = 0.0
    fit_tol: float = 1e-6
    max_outer: int = 500
    jobs: int = 1

    def __post_init__(self):
        methods = tuple(self.methods)
        unknown = [m for m in methods if m not in KNOWN_METHODS]
        if unknown:
            raise ConfigInvalidError(f"unknown methods {unknown}; choose from {KNOWN_METHODS}")
        if not methods:
            raise ConfigInvalidError("need at least one method")
        if self.n_reps < 1:
            raise ConfigInvalidError("n_reps must be >= 1")
        if not (1 <= self.knn_k < self.sim.T):
            raise ConfigInvalidError(f"knn_k must lie in [1, T-1], got {self.knn_k}")
        if self.jobs < 1:
            raise ConfigInvalidError("jobs must be >= 1")
        object.__setattr__(self, "methods", methods)
        if self.mtlnl_lambdas is not None:
            object.__setattr__(
                self, "mtlnl_lambdas", tuple(float(v) for v in self.mtlnl_lambdas)
            )


@dataclass(frozen=True)
class RepResult:
    """Metrics of one replication: {(method, metric): value} plus failures."""

    rep: int
    metrics: dict
    selected: dict
    failures: dict


@dataclass(frozen=True)
class BenchmarkResult:
    config: BenchmarkConfig
    reps: tuple
    summary: dict        # {(method, metric): (mean, std, n)}
    failure_counts: dict  # {method: count}


def rep_seed(root_seed: int, rep: int) -> int:
    """Independent per-replication seed derived from the root seed."""
    return int(np.random.SeedSequence([root_seed, rep]).generate_state(1)[0])


def _destandardize_all(infos, W, intercepts=None):
    T, p = W.shape
    W_orig = np.empty((T, p))
    icpt_orig = np.empty(T)
    for m in range(T):
        w0 = 0.0 if intercepts is None else float(intercepts[m])
        W_orig[m], icpt_orig[m] = destandardize_coefficients(infos[m], W[m], w0)
    return W_orig, icpt_orig


def _evaluate(bench, data, W_orig, icpt_orig, labels, metrics_out, method):
    """Fill metrics_out with test-set metrics for one method."""
    truth = data.truth
    if bench.sim.loss_kind == "linear":
        rep_nmse = nmse(data.test, W_orig, intercepts=icpt_orig, W_star=truth.W_star)
        metrics_out[(method, "nmse")] = rep_nmse.mean
    else:
        rep_auc = auc_report(data.test, W_orig, intercepts=icpt_orig)
        metrics_out[(method, "auc")] = rep_auc.mean
    metrics_out[(method, "rmse")] = rmse_coeff(truth.W_star, W_orig).mean
    if labels is not None:
        metrics_out[(method, "ari")] = adjusted_rand_index(truth.labels, labels)
        metrics_out[(method, "n_clusters")] = float(labels.max() + 1)


def run_replication(bench: BenchmarkConfig, rep: int) -> RepResult:
    """Generate one dataset and run every requested method on it."""
    data = generate(bench.sim, rep_seed(bench.seed, rep))
    T = bench.sim.T
    strain, sval, infos = [], [], []
    for tr, va in zip(data.train, data.validation):
        st, info = standardize(tr)
        strain.append(st)
        sval.append(apply_standardization(va, info))
        infos.append(info)

    metrics_out: dict = {}
    selected: dict = {}
    failures: dict = {}

    # Per-task lasso always runs: it initializes the graph even when "stll"
    # is not among the reported methods.
    stl_fits = run_stll(strain, seed=rep_seed(bench.seed, rep))
    W_stll = np.stack([f.coef for f in stl_fits])
    W_stll_orig, icpt_stll_orig = _destandardize_all(infos, W_stll)
    if "stll" in bench.methods:
        selected["stll"] = tuple(float(f.lam) for f in stl_fits)
        _evaluate(bench, data, W_stll_orig, icpt_stll_orig, None, metrics_out, "stll")

    if "stlr" in bench.methods:
        try:
            fits = run_stlr(strain, sval, intercept_ridge=bench.intercept_ridge)
            W = np.stack([f.coef for f in fits])
            icpts = np.array([f.intercept for f in fits])
            W_orig, icpt_orig = _destandardize_all(infos, W, icpts)
            selected["stlr"] = tuple(float(f.lam) for f in fits)
            _evaluate(bench, data, W_orig, icpt_orig, None, metrics_out, "stlr")
        except (MtlcvxError, np.linalg.LinAlgError) as exc:
            failures["stlr"] = str(exc)

    graph = build_knn_weights(W_stll_orig, k=min(bench.knn_k, T - 1))
    grid = bench.grid if bench.grid is not None else default_grid(graph)
    base = FitConfig(
        lam1=1.0,
        lam2=0.0,
        intercept_ridge=bench.intercept_ridge,
        tol=bench.fit_tol,
        max_outer=bench.max_outer,
    )

    if "mtlnl" in bench.methods:
        try:
            lams = (
                np.asarray(bench.mtlnl_lambdas)
                if bench.mtlnl_lambdas is not None
                else np.asarray(grid.lam2)
            )
            state = select_mtlnl(
                strain, sval, graph, lams, intercept_ridge=bench.intercept_ridge
            )
            W_orig, icpt_orig = _destandardize_all(infos, state.W, state.intercepts)
            selected["mtlnl"] = float(state.lam)
            _evaluate(bench, data, W_orig, icpt_orig, state.labels, metrics_out, "mtlnl")
        except (MtlcvxError, np.linalg.LinAlgError) as exc:
            failures["mtlnl"] = str(exc)

    cvx_result = None
    if "mtlcvx" in bench.methods or "mtlacvx" in bench.methods:
        try:
            cvx_result = grid_search(strain, sval, graph, grid, base=base)
        except (MtlcvxError, np.linalg.LinAlgError) as exc:
            if "mtlcvx" in bench.methods:
                failures["mtlcvx"] = str(exc)
            if "mtlacvx" in bench.methods:
                failures["mtlacvx"] = str(exc)
    if cvx_result is not None and "mtlcvx" in bench.methods:
        st = cvx_result.best_state
        W_orig, icpt_orig = _destandardize_all(infos, st.W, st.intercepts)
        selected["mtlcvx"] = (cvx_result.lam1, cvx_result.lam2)
        _evaluate(bench, data, W_orig, icpt_orig, st.labels, metrics_out, "mtlcvx")
    if cvx_result is not None and "mtlacvx" in bench.methods:
        try:
            _, stage2, _ = tune_mtlacvx(
                strain, sval, graph, grid, base=base, stage1=cvx_result
            )
            st = stage2.best_state
            W_orig, icpt_orig = _destandardize_all(infos, st.W, st.intercepts)
            selected["mtlacvx"] = (stage2.lam1, stage2.lam2)
            _evaluate(bench, data, W_orig, icpt_orig, st.labels, metrics_out, "mtlacvx")
        except (MtlcvxError, np.linalg.LinAlgError) as exc:
            failures["mtlacvx"] = str(exc)

    return RepResult(rep=rep, metrics=metrics_out, selected=selected, failures=failures)


def _rep_worker(args):
    bench, rep = args
    return run_replication(bench, rep)


def run_monte_carlo(bench: BenchmarkConfig) -> BenchmarkResult:
    """Run all replications (optionally in parallel) and aggregate.

    Aggregation is deterministic: replication r always uses the seed derived
    from (root seed, r), and summaries reduce values in replication order,
    so any jobs setting produces identical output.
    """
    if bench.jobs == 1:
        reps = [run_replication(bench, r) for r in range(bench.n_reps)]
    else:
        with ProcessPoolExecutor(max_workers=bench.jobs) as pool:
            futures = {r: pool.submit(_rep_worker, (bench, r)) for r in range(bench.n_reps)}
            reps = [futures[r].result() for r in range(bench.n_reps)]

    summary: dict = {}
    keys = sorted({k for rr in reps for k in rr.metrics}, key=lambda k: (k[0], k[1]))
    for key in keys:
        vals = np.array([rr.metrics[key] for rr in reps if key in rr.metrics])
        std = float(vals.std(ddof=1)) if len(vals) > 1 else 0.0
        summary[key] = (float(vals.mean()), std, int(len(vals)))
    failure_counts: dict = {}
    for rr in reps:
        for method in rr.failures:
            failure_counts[method] = failure_counts.get(method, 0) + 1
    return BenchmarkResult(
        config=bench, reps=tuple(reps), summary=summary, failure_counts=failure_counts
    )


def config_digest(bench: BenchmarkConfig) -> str:
    """Short stable hash of the benchmark configuration."""
    doc = asdict(bench)
    doc.pop("jobs", None)  # parallelism does not affect results
    blob = json.dumps(doc, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def summary_to_json(result: BenchmarkResult, path) -> None:
    """Write the aggregate summary, per-replication values and metadata.

    The jobs setting is omitted: it controls execution only, and files
    produced with different parallelism must be byte-identical.
    """
    cfg_doc = asdict(result.config)
    cfg_doc.pop("jobs", None)
    doc = {
        "format": "mtlcvx-benchmark",
        "version": __version__,
        "config": cfg_doc,
        "config_digest": config_digest(result.config),
        "seed": result.config.seed,
        "summary": [
            {
                "method": method,
                "metric": metric,
                "mean": mean,
                "std": std,
                "n_reps": n,
            }
            for (method, metric), (mean, std, n) in sorted(result.summary.items())
        ],
        "replications": [
            {
                "rep": rr.rep,
                "metrics": {f"{m}/{k}": v for (m, k), v in sorted(rr.metrics.items())},
                "selected": {m: v for m, v in sorted(rr.selected.items())},
                "failures": dict(sorted(rr.failures.items())),
            }
            for rr in result.reps
        ],
        "failure_counts": dict(sorted(result.failure_counts.items())),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def summary_to_csv(result: BenchmarkResult, path) -> None:
    """Write one row per (method, metric) with mean, std and counts."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "metric", "mean", "std", "n_reps", "failures"])
        for (method, metric), (mean, std, n) in sorted(result.summary.items()):
            writer.writerow(
                [
                    method,
                    metric,
                    repr(mean),
                    repr(std),
                    n,
                    result.failure_counts.get(method, 0),
                ]
            )
