"""Tests for validation-grid tuning and the Monte Carlo benchmark harness."""

import json

import numpy as np
import pytest

import mtlcvx.tuning as tuning
from mtlcvx.core import FitConfig
from mtlcvx.data import TaskDataset
from mtlcvx.errors import ConfigInvalidError, NonConvergenceError
from mtlcvx.graph import WeightGraph, build_knn_weights
from mtlcvx.simulate import SimConfig
from mtlcvx.tuning import (
    BenchmarkConfig,
    GridSpec,
    config_digest,
    default_grid,
    grid_search,
    rep_seed,
    run_monte_carlo,
    run_replication,
    summary_to_csv,
    summary_to_json,
    tune_mtlacvx,
)


def make_two_cluster_split(seed=0, T=6, p=5, n_train=25, n_val=40, spread=0.05):
    """Train/validation tasks in two tight coefficient clusters."""
    rng = np.random.default_rng(seed)
    centers = np.array([[1.5] * p, [-1.5] * p])
    train, val = [], []
    for m in range(T):
        w = centers[m * 2 // T] + spread * rng.normal(size=p)
        X = rng.normal(size=(n_train + n_val, p))
        y = X @ w + 0.3 * rng.normal(size=n_train + n_val)
        train.append(TaskDataset(f"t{m}", y[:n_train], X[:n_train]))
        val.append(TaskDataset(f"t{m}", y[n_train:], X[n_train:]))
    return train, val


TINY_SIM = SimConfig(C=2, T=6, p=8, n_train=12, n_val=15, n_test=15,
                     phi=0.0, sigma_v2=0.1)
TINY_GRID = GridSpec(lam1=(0.5, 5.0), lam2=(0.05, 0.5))


def tiny_bench(**overrides):
    base = dict(sim=TINY_SIM, methods=("stll", "mtlcvx"), n_reps=2, seed=3,
                grid=TINY_GRID, fit_tol=1e-5, max_outer=50)
    base.update(overrides)
    return BenchmarkConfig(**base)


class TestGridSpec:
    def test_rejects_bad_grids(self):
        with pytest.raises(ConfigInvalidError):
            GridSpec(lam1=(), lam2=(1.0,))
        with pytest.raises(ConfigInvalidError):
            GridSpec(lam1=(1.0, 0.0), lam2=(1.0,))
        with pytest.raises(ConfigInvalidError):
            GridSpec(lam1=(1.0,), lam2=(-0.1,))

    def test_coerces_to_float_tuples(self):
        grid = GridSpec(lam1=np.array([1, 2]), lam2=[0.0, 3])
        assert grid.lam1 == (1.0, 2.0)
        assert grid.lam2 == (0.0, 3.0)
        assert grid.n_cells == 4

    def test_default_grid_scales_fusion_axis_by_mean_edge_weight(self):
        base = default_grid()
        graph = WeightGraph(3, [[0, 1], [1, 2]], [1.0, 3.0])
        scaled = default_grid(graph)
        assert scaled.lam1 == base.lam1
        np.testing.assert_allclose(scaled.lam2, 2.0 * np.array(base.lam2))


class TestGridSearch:
    def test_winner_minimizes_validation_error(self):
        train, val = make_two_cluster_split()
        graph = build_knn_weights(np.array([t.X[:5, 0] for t in train]), k=2)
        grid = GridSpec(lam1=(0.5, 5.0), lam2=(0.01, 0.1, 1.0))
        res = grid_search(train, val, graph, grid,
                          base=FitConfig(lam1=1.0, lam2=0.0, tol=1e-6, max_outer=100))
        assert len(res.table) == grid.n_cells
        assert res.n_failures == 0
        errs = [row["val_error"] for row in res.table]
        assert res.val_error == min(errs)
        # Cells are visited with lam1 descending outside, lam2 descending inside.
        assert (res.table[0]["lam1"], res.table[0]["lam2"]) == (5.0, 1.0)
        assert (res.table[-1]["lam1"], res.table[-1]["lam2"]) == (0.5, 0.01)

    def test_exact_ties_prefer_stronger_fusion_then_stronger_pull(self, monkeypatch):
        train, val = make_two_cluster_split()
        graph = build_knn_weights(np.array([t.X[:5, 0] for t in train]), k=2)
        monkeypatch.setattr(tuning, "mean_validation_error", lambda state, v: 1.0)
        res = grid_search(train, val, graph, GridSpec(lam1=(0.5, 5.0), lam2=(0.05, 0.5)),
                          base=FitConfig(lam1=1.0, lam2=0.0, tol=1e-4, max_outer=30))
        assert (res.lam1, res.lam2) == (5.0, 0.5)

    def test_failed_cells_are_recorded_and_skipped(self, monkeypatch):
        train, val = make_two_cluster_split()
        graph = build_knn_weights(np.array([t.X[:5, 0] for t in train]), k=2)
        real_fit = tuning.fit_mtlcvx

        def flaky(tasks, g, cfg, init=None, **kw):
            if cfg.lam2 == 0.5:
                raise NonConvergenceError("forced failure", iterations=1)
            return real_fit(tasks, g, cfg, init=init, **kw)

        monkeypatch.setattr(tuning, "fit_mtlcvx", flaky)
        res = grid_search(train, val, graph, GridSpec(lam1=(0.5, 5.0), lam2=(0.05, 0.5)),
                          base=FitConfig(lam1=1.0, lam2=0.0, tol=1e-4, max_outer=30))
        assert res.n_failures == 2
        assert res.lam2 == 0.05
        failed = [row for row in res.table if row["val_error"] is None]
        assert len(failed) == 2
        assert all("forced failure" in row["error"] for row in failed)

    def test_raises_when_every_cell_fails(self, monkeypatch):
        train, val = make_two_cluster_split()
        graph = build_knn_weights(np.array([t.X[:5, 0] for t in train]), k=2)

        def always_fail(*a, **kw):
            raise NonConvergenceError("forced failure", iterations=1)

        monkeypatch.setattr(tuning, "fit_mtlcvx", always_fail)
        with pytest.raises(NonConvergenceError, match="every grid cell failed"):
            grid_search(train, val, graph, GridSpec(lam1=(1.0,), lam2=(0.1,)))


class TestTuneMtlacvx:
    def test_two_stage_reuses_stage_one_and_preserves_weight_sum(self):
        train, val = make_two_cluster_split()
        W0 = np.array([t.y[:5] for t in train])
        graph = build_knn_weights(W0, k=2)
        grid = GridSpec(lam1=(0.5, 5.0), lam2=(0.05, 0.5))
        base = FitConfig(lam1=1.0, lam2=0.0, tol=1e-6, max_outer=100)
        stage1 = grid_search(train, val, graph, grid, base=base)
        s1, s2, graph2 = tune_mtlacvx(train, val, graph, grid, base=base, stage1=stage1)
        assert s1 is stage1
        assert graph2.weights.sum() == pytest.approx(graph.weights.sum(), abs=1e-9)
        # Reweighting sharpens the search; it must not lose to stage one badly.
        assert s2.val_error <= 1.05 * s1.val_error


class TestBenchmarkConfig:
    def test_validation(self):
        with pytest.raises(ConfigInvalidError):
            tiny_bench(methods=("stll", "nope"))
        with pytest.raises(ConfigInvalidError):
            tiny_bench(methods=())
        with pytest.raises(ConfigInvalidError):
            tiny_bench(n_reps=0)
        with pytest.raises(ConfigInvalidError):
            tiny_bench(knn_k=6)  # T = 6 allows at most 5 neighbours
        with pytest.raises(ConfigInvalidError):
            tiny_bench(jobs=0)

    def test_rep_seeds_are_stable_and_distinct(self):
        assert rep_seed(0, 0) == rep_seed(0, 0)
        assert rep_seed(0, 0) != rep_seed(0, 1)
        assert rep_seed(0, 1) != rep_seed(1, 0)


class TestRunReplication:
    def test_same_replication_is_bitwise_reproducible(self):
        bench = tiny_bench()
        first = run_replication(bench, 0)
        second = run_replication(bench, 0)
        assert first.metrics == second.metrics
        assert first.selected == second.selected
        assert not first.failures

    def test_reports_requested_methods_only(self):
        rep = run_replication(tiny_bench(), 1)
        methods = {m for m, _ in rep.metrics}
        assert methods == {"stll", "mtlcvx"}
        assert ("stll", "nmse") in rep.metrics
        assert ("mtlcvx", "ari") in rep.metrics
        assert ("stll", "ari") not in rep.metrics  # no cluster labels for STL

    def test_all_methods_run_on_easy_instance(self):
        bench = tiny_bench(methods=("stll", "stlr", "mtlnl", "mtlcvx", "mtlacvx"),
                           knn_k=3)
        rep = run_replication(bench, 0)
        assert not rep.failures
        for method in bench.methods:
            assert (method, "nmse") in rep.metrics
            assert (method, "rmse") in rep.metrics
            # Low-noise clustered tasks: every method should fit decently.
            assert rep.metrics[(method, "nmse")] < 0.5

    def test_logistic_replication_reports_auc(self):
        sim = SimConfig(C=2, T=4, p=6, n_train=30, n_val=30, n_test=40,
                        phi=0.0, sigma_v2=0.1, loss_kind="logistic")
        bench = tiny_bench(sim=sim, methods=("stlr", "mtlcvx"), knn_k=2)
        rep = run_replication(bench, 0)
        assert not rep.failures
        assert ("mtlcvx", "auc") in rep.metrics
        assert ("mtlcvx", "nmse") not in rep.metrics
        assert 0.0 <= rep.metrics[("mtlcvx", "auc")] <= 1.0


@pytest.fixture(scope="module")
def tiny_result():
    return run_monte_carlo(tiny_bench())


class TestRunMonteCarlo:
    def test_summary_aggregates_by_replication(self, tiny_result):
        assert len(tiny_result.reps) == 2
        key = ("mtlcvx", "nmse")
        vals = np.array([rr.metrics[key] for rr in tiny_result.reps])
        mean, std, n = tiny_result.summary[key]
        assert mean == pytest.approx(vals.mean())
        assert std == pytest.approx(vals.std(ddof=1))
        assert n == 2
        assert tiny_result.failure_counts == {}

    def test_parallel_run_matches_serial_byte_for_byte(self, tiny_result, tmp_path):
        parallel = run_monte_carlo(tiny_bench(jobs=2))
        serial_path, parallel_path = tmp_path / "serial.json", tmp_path / "parallel.json"
        summary_to_json(tiny_result, serial_path)
        summary_to_json(parallel, parallel_path)
        assert serial_path.read_bytes() == parallel_path.read_bytes()

    def test_config_digest_ignores_jobs_but_not_seed(self):
        assert config_digest(tiny_bench()) == config_digest(tiny_bench(jobs=4))
        assert config_digest(tiny_bench()) != config_digest(tiny_bench(seed=4))
        assert config_digest(tiny_bench()) == config_digest(tiny_bench())


class TestSummaryFiles:
    def test_json_document_round_trips(self, tiny_result, tmp_path):
        path = tmp_path / "summary.json"
        summary_to_json(tiny_result, path)
        doc = json.loads(path.read_text())
        assert doc["format"] == "mtlcvx-benchmark"
        assert doc["config_digest"] == config_digest(tiny_result.config)
        assert doc["seed"] == tiny_result.config.seed
        assert "jobs" not in doc["config"]
        assert len(doc["replications"]) == len(tiny_result.reps)
        by_key = {(row["method"], row["metric"]): row for row in doc["summary"]}
        for key, (mean, std, n) in tiny_result.summary.items():
            assert by_key[key]["mean"] == mean
            assert by_key[key]["std"] == std
            assert by_key[key]["n_reps"] == n

    def test_csv_rows_preserve_float_values(self, tiny_result, tmp_path):
        path = tmp_path / "summary.csv"
        summary_to_csv(tiny_result, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "method,metric,mean,std,n_reps,failures"
        assert len(lines) == 1 + len(tiny_result.summary)
        for line in lines[1:]:
            method, metric, mean, std, n, failures = line.split(",")
            assert float(mean) == tiny_result.summary[(method, metric)][0]
            assert int(n) == 2
            assert int(failures) == 0
