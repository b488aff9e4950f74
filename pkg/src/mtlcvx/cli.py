"""Command-line interface: simulate, fit, tune, evaluate and benchmark.

Commands
--------
simulate   write synthetic task CSVs plus the generating ground truth
fit        fit one joint model at fixed penalties on a task CSV
tune       validation grid search (one- or two-stage) and the tuned model
evaluate   score a saved model on a task CSV, optionally against a truth file
benchmark  Monte Carlo study with per-method summary tables

Every option can come from a JSON config file (``--config``); command-line
flags override file values, and unknown config keys are rejected. Named
profiles bundle common settings (the two main simulation designs and two
real-data-shaped protocols). Outputs are deterministic given the resolved
configuration and seed, whatever the parallelism degree: each JSON artifact
embeds a metadata block (config digest, seed, version) and every run writes
a ``run.json`` manifest naming its outputs.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from dataclasses import asdict, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import run_stll
from .core import FitConfig, fit_mtlacvx, fit_mtlcvx, model_from_dict, model_to_dict
from .data import (
    CsvSchema,
    apply_standardization,
    destandardize_coefficients,
    load_tasks_csv,
    save_tasks_csv,
    standardize,
)
from .errors import ConfigInvalidError, MtlcvxError
from .graph import build_knn_weights
from .metrics import adjusted_rand_index, auc_report, nmse, rmse_coeff
from .simulate import SimConfig, benchmark_profile, generate
from .tuning import (
    KNOWN_METHODS,
    BenchmarkConfig,
    GridSpec,
    default_grid,
    grid_search,
    run_monte_carlo,
    summary_to_csv,
    summary_to_json,
    tune_mtlacvx,
)

SIM_KEYS = tuple(f.name for f in fields(SimConfig))

# Bundles of defaults selectable with --profile. The two benchmark-* profiles
# are the main simulation designs; the *-like profiles mirror the shape of two
# common real-data studies (a mid-size linear one, and a small logistic one
# with an intercept ridge of 0.1) on synthetic stand-in data.
PROFILES = {
    "benchmark-c10": {"sim": asdict(benchmark_profile(C=10)), "intercept_ridge": 0.0},
    "benchmark-c5": {"sim": asdict(benchmark_profile(C=5)), "intercept_ridge": 0.0},
    "school-like": {
        "sim": asdict(
            SimConfig(T=20, C=4, p=27, n_train=60, n_val=30, n_test=30)
        ),
        "loss_kind": "linear",
        "intercept_ridge": 0.0,
    },
    "landmine-like": {
        "sim": asdict(
            SimConfig(
                T=28, C=2, p=9, n_train=60, n_val=40, n_test=40,
                sigma_u2=1.0, sigma_v2=0.1, loss_kind="logistic",
            )
        ),
        "loss_kind": "logistic",
        "intercept_ridge": 0.1,
    },
}

DEFAULTS = {
    "simulate": {
        "seed": 0,
        "jobs": 1,
        "out_dir": ".",
        "sim": asdict(SimConfig()),
    },
    "fit": {
        "seed": 0,
        "jobs": 1,
        "out_dir": ".",
        "train": None,
        "loss_kind": "linear",
        "method": "mtlcvx",
        "lam1": None,
        "lam2": None,
        "knn_k": 5,
        "intercept_ridge": 0.0,
        "tol": 1e-6,
        "max_outer": 500,
        "standardize": True,
        "trace": False,
    },
    "tune": {
        "seed": 0,
        "jobs": 1,
        "out_dir": ".",
        "train": None,
        "validation": None,
        "loss_kind": "linear",
        "method": "mtlcvx",
        "grid": None,
        "knn_k": 5,
        "intercept_ridge": 0.0,
        "tol": 1e-6,
        "max_outer": 500,
        "standardize": True,
        "trace": False,
    },
    "evaluate": {
        "seed": 0,
        "jobs": 1,
        "out_dir": ".",
        "model": None,
        "data": None,
        "truth": None,
    },
    "benchmark": {
        "seed": 0,
        "jobs": 1,
        "out_dir": ".",
        "sim": asdict(SimConfig()),
        "cells": None,
        "methods": list(KNOWN_METHODS),
        "reps": 20,
        "grid": None,
        "knn_k": 5,
        "intercept_ridge": 0.0,
        "fit_tol": 1e-6,
        "max_outer": 500,
        "mtlnl_lambdas": None,
    },
}


# --------------------------------------------------------------------------
# Config resolution: defaults <- profile <- config file <- flags.

def _check_keys(doc: dict, allowed, context: str) -> None:
    unknown = sorted(set(doc) - set(allowed))
    if unknown:
        raise ConfigInvalidError(
            f"unknown config key(s) in {context}: {', '.join(unknown)}"
        )


def _validate_config(command: str, doc: dict, context: str) -> None:
    _check_keys(doc, DEFAULTS[command], context)
    if isinstance(doc.get("sim"), dict):
        _check_keys(doc["sim"], SIM_KEYS, f"{context}.sim")
    if isinstance(doc.get("grid"), dict):
        _check_keys(doc["grid"], ("lam1", "lam2"), f"{context}.grid")
    for i, cell in enumerate(doc.get("cells") or []):
        if not isinstance(cell, dict):
            raise ConfigInvalidError(f"{context}.cells[{i}] must be an object")
        _check_keys(cell, SIM_KEYS, f"{context}.cells[{i}]")


def _overlay(cfg: dict, update: dict) -> None:
    for key, value in update.items():
        if key == "sim" and isinstance(cfg.get("sim"), dict) and isinstance(value, dict):
            cfg["sim"].update(value)
        else:
            cfg[key] = value


def _load_config_file(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigInvalidError(f"cannot read config file: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigInvalidError(
            f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from None
    if not isinstance(doc, dict):
        raise ConfigInvalidError(f"{path}: config must be a JSON object")
    return doc


def resolve_config(command: str, args: argparse.Namespace) -> dict:
    """Merge defaults, profile, config file and explicit flags (flags win)."""
    cfg = json.loads(json.dumps(DEFAULTS[command]))  # deep copy of defaults
    if args.profile is not None:
        profile = PROFILES[args.profile]
        _overlay(cfg, {k: v for k, v in profile.items() if k in cfg})
    if args.config is not None:
        file_doc = _load_config_file(args.config)
        _validate_config(command, file_doc, str(args.config))
        _overlay(cfg, file_doc)
    flag_doc = {
        key: value
        for key, value in vars(args).items()
        if key in cfg and value is not None
    }
    _overlay(cfg, flag_doc)
    _validate_config(command, cfg, "resolved config")
    return cfg


def _require(cfg: dict, command: str, *keys: str) -> None:
    missing = [k for k in keys if cfg.get(k) is None]
    if missing:
        raise ConfigInvalidError(
            f"{command} requires {', '.join('--' + k.replace('_', '-') for k in missing)}"
            " (flag or config key)"
        )


# --------------------------------------------------------------------------
# Output helpers.

def _metadata(command: str, cfg: dict) -> dict:
    doc = {k: v for k, v in cfg.items() if k not in ("out_dir", "jobs")}
    blob = json.dumps(doc, sort_keys=True, default=str).encode()
    return {
        "command": command,
        "config": doc,
        "config_digest": hashlib.sha256(blob).hexdigest()[:16],
        "seed": cfg.get("seed"),
        "version": __version__,
    }


def _write_json(doc: dict, path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_manifest(out_dir: Path, meta: dict, outputs: list) -> None:
    _write_json({**meta, "outputs": sorted(p.name for p in outputs)}, out_dir / "run.json")


def _write_clusters_csv(state, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["task_id", "cluster"])
        for tid, label in zip(state.task_ids, state.labels):
            writer.writerow([tid, int(label)])


def _write_trace_csv(state, path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "objective"])
        for i, value in enumerate(state.trace):
            writer.writerow([i, repr(float(value))])


def _out_dir(cfg: dict) -> Path:
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


# --------------------------------------------------------------------------
# Shared fitting pipeline pieces.

def _load_and_standardize(path, loss_kind: str, do_standardize: bool):
    tasks = load_tasks_csv(path, CsvSchema(loss_kind=loss_kind))
    if not do_standardize:
        return tasks, tasks, None
    fitted, infos = [], []
    for task in tasks:
        st, info = standardize(task)
        fitted.append(st)
        infos.append(info)
    return tasks, fitted, infos


def _destandardized_state(state, infos):
    """Map a model fitted on standardized data back to the raw data scale."""
    if infos is None:
        return state
    W = np.empty_like(state.W)
    icpt = np.empty(state.n_tasks)
    U = np.empty_like(state.U)
    for m, info in enumerate(infos):
        W[m], icpt[m] = destandardize_coefficients(
            info, state.W[m], float(state.intercepts[m])
        )
        U[m], _ = destandardize_coefficients(info, state.U[m], 0.0)
    return replace(state, W=W, intercepts=icpt, U=U)


def _stll_graph(fitted, infos, knn_k: int, seed: int):
    """Per-task lasso coefficients (on the raw scale) and their k-NN graph."""
    stl_fits = run_stll(fitted, seed=seed)
    W = np.stack([f.coef for f in stl_fits])
    if infos is not None:
        W = np.stack(
            [destandardize_coefficients(info, w, 0.0)[0] for info, w in zip(infos, W)]
        )
    k = min(knn_k, W.shape[0] - 1)
    return build_knn_weights(W, k=k)


def _model_doc(state, meta: dict) -> dict:
    return {**model_to_dict(state), "metadata": meta}


def _load_any_model(path):
    """Read a plain or two-stage model file; returns the final-stage model."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") == "mtlcvx-adaptive-fit":
        return model_from_dict(doc["stage2"])
    return model_from_dict(doc)


def _grid_from_config(cfg: dict, graph) -> GridSpec:
    if cfg.get("grid") is None:
        return default_grid(graph)
    return GridSpec(lam1=tuple(cfg["grid"]["lam1"]), lam2=tuple(cfg["grid"]["lam2"]))


# --------------------------------------------------------------------------
# Commands. Each returns a process exit code.

def cmd_simulate(cfg: dict) -> int:
    sim = SimConfig(**cfg["sim"])
    data = generate(sim, int(cfg["seed"]))
    out = _out_dir(cfg)
    meta = _metadata("simulate", cfg)
    schema = CsvSchema(loss_kind=sim.loss_kind)
    outputs = []
    for name, tasks in (
        ("train", data.train), ("validation", data.validation), ("test", data.test)
    ):
        path = out / f"{name}.csv"
        save_tasks_csv(tasks, path, schema)
        outputs.append(path)
    truth_path = out / "truth.json"
    _write_json(
        {
            "format": "mtlcvx-truth",
            "metadata": meta,
            "W_star": data.truth.W_star.tolist(),
            "U_star": data.truth.U_star.tolist(),
            "labels": data.truth.labels.tolist(),
            "feature_assignment": data.truth.feature_assignment.tolist(),
            "intercept": data.truth.intercept,
            "sim": asdict(sim),
        },
        truth_path,
    )
    outputs.append(truth_path)
    _write_manifest(out, meta, outputs)
    sizes = f"{sim.n_train}/{sim.n_val}/{sim.n_test}"
    print(
        f"simulate: T={sim.T} p={sim.p} C={sim.C} loss={sim.loss_kind} "
        f"rows per task (train/validation/test) = {sizes} -> {out}"
    )
    return 0


def cmd_fit(cfg: dict) -> int:
    _require(cfg, "fit", "train", "lam1", "lam2")
    if cfg["method"] not in ("mtlcvx", "mtlacvx"):
        raise ConfigInvalidError("fit method must be 'mtlcvx' or 'mtlacvx'")
    _, fitted, infos = _load_and_standardize(
        cfg["train"], cfg["loss_kind"], cfg["standardize"]
    )
    graph = _stll_graph(fitted, infos, int(cfg["knn_k"]), int(cfg["seed"]))
    fit_cfg = FitConfig(
        lam1=float(cfg["lam1"]),
        lam2=float(cfg["lam2"]),
        intercept_ridge=float(cfg["intercept_ridge"]),
        tol=float(cfg["tol"]),
        max_outer=int(cfg["max_outer"]),
    )
    out = _out_dir(cfg)
    meta = _metadata("fit", cfg)
    model_path = out / "model.json"
    outputs = [model_path]
    if cfg["method"] == "mtlcvx":
        state = fit_mtlcvx(fitted, graph, fit_cfg)
        final = _destandardized_state(state, infos)
        _write_json(_model_doc(final, meta), model_path)
    else:
        result = fit_mtlacvx(fitted, graph, fit_cfg)
        stage1 = _destandardized_state(result.stage1, infos)
        final = _destandardized_state(result.stage2, infos)
        _write_json(
            {
                "format": "mtlcvx-adaptive-fit",
                "metadata": meta,
                "stage1": model_to_dict(stage1),
                "stage2": model_to_dict(final),
            },
            model_path,
        )
    clusters_path = out / "clusters.csv"
    _write_clusters_csv(final, clusters_path)
    outputs.append(clusters_path)
    if cfg["trace"]:
        trace_path = out / "trace.csv"
        _write_trace_csv(final, trace_path)
        outputs.append(trace_path)
    _write_manifest(out, meta, outputs)
    print(
        f"fit: method={cfg['method']} tasks={final.n_tasks} "
        f"clusters={final.n_clusters} objective={final.objective:.6g} "
        f"iterations={final.n_iter} converged={final.converged} -> {out}"
    )
    return 0


def cmd_tune(cfg: dict) -> int:
    _require(cfg, "tune", "train", "validation")
    if cfg["method"] not in ("mtlcvx", "mtlacvx"):
        raise ConfigInvalidError("tune method must be 'mtlcvx' or 'mtlacvx'")
    raw_train, fitted, infos = _load_and_standardize(
        cfg["train"], cfg["loss_kind"], cfg["standardize"]
    )
    raw_val = load_tasks_csv(cfg["validation"], CsvSchema(loss_kind=cfg["loss_kind"]))
    by_id = {str(t.task_id): t for t in raw_val}
    want = [str(t.task_id) for t in raw_train]
    if sorted(by_id) != sorted(want):
        raise ConfigInvalidError(
            "validation file must contain exactly the task ids of the train file"
        )
    val = [by_id[tid] for tid in want]
    if infos is not None:
        val = [apply_standardization(v, info) for v, info in zip(val, infos)]

    graph = _stll_graph(fitted, infos, int(cfg["knn_k"]), int(cfg["seed"]))
    grid = _grid_from_config(cfg, graph)
    base = FitConfig(
        lam1=1.0,
        lam2=0.0,
        intercept_ridge=float(cfg["intercept_ridge"]),
        tol=float(cfg["tol"]),
        max_outer=int(cfg["max_outer"]),
    )
    out = _out_dir(cfg)
    meta = _metadata("tune", cfg)
    stage1 = grid_search(fitted, val, graph, grid, base=base)
    doc = {
        "format": "mtlcvx-tuning",
        "metadata": meta,
        "method": cfg["method"],
        "grid": {"lam1": list(grid.lam1), "lam2": list(grid.lam2)},
    }
    if cfg["method"] == "mtlcvx":
        best = stage1
        doc["best"] = {
            "lam1": best.lam1, "lam2": best.lam2, "val_error": best.val_error
        }
        doc["table"] = list(best.table)
        doc["n_failures"] = best.n_failures
    else:
        _, stage2, _ = tune_mtlacvx(fitted, val, graph, grid, base=base, stage1=stage1)
        best = stage2
        doc["best"] = {
            "lam1": best.lam1, "lam2": best.lam2, "val_error": best.val_error
        }
        doc["stage1_best"] = {
            "lam1": stage1.lam1, "lam2": stage1.lam2, "val_error": stage1.val_error
        }
        doc["table"] = list(best.table)
        doc["stage1_table"] = list(stage1.table)
        doc["n_failures"] = best.n_failures + stage1.n_failures

    final = _destandardized_state(best.best_state, infos)
    tuning_path = out / "tuning.json"
    _write_json(doc, tuning_path)
    model_path = out / "model.json"
    _write_json(_model_doc(final, meta), model_path)
    clusters_path = out / "clusters.csv"
    _write_clusters_csv(final, clusters_path)
    outputs = [tuning_path, model_path, clusters_path]
    if cfg["trace"]:
        trace_path = out / "trace.csv"
        _write_trace_csv(final, trace_path)
        outputs.append(trace_path)
    _write_manifest(out, meta, outputs)
    print(
        f"tune: method={cfg['method']} best lam1={best.lam1:g} lam2={best.lam2:g} "
        f"validation error={best.val_error:.6g} clusters={final.n_clusters} -> {out}"
    )
    return 0


def cmd_evaluate(cfg: dict) -> int:
    _require(cfg, "evaluate", "model", "data")
    model = _load_any_model(cfg["model"])
    tasks = load_tasks_csv(cfg["data"], CsvSchema(loss_kind=model.loss_kind))
    by_id = {str(t.task_id): t for t in tasks}
    missing = [tid for tid in model.task_ids if tid not in by_id]
    extra = sorted(set(by_id) - set(str(t) for t in model.task_ids))
    if missing or extra:
        raise ConfigInvalidError(
            f"data file does not match the model's tasks "
            f"(missing: {missing[:3]}, unmatched: {extra[:3]})"
        )
    ordered = [by_id[str(tid)] for tid in model.task_ids]

    truth = None
    if cfg["truth"] is not None:
        with open(cfg["truth"], "r", encoding="utf-8") as fh:
            truth = json.load(fh)
        if truth.get("format") != "mtlcvx-truth":
            raise ConfigInvalidError(f"{cfg['truth']}: not a truth document")

    reports = []
    if model.loss_kind == "linear":
        W_star = np.array(truth["W_star"], dtype=float) if truth else None
        true_icpt = (
            np.full(model.n_tasks, float(truth["intercept"])) if truth else None
        )
        reports.append(
            nmse(ordered, model.W, intercepts=model.intercepts,
                 W_star=W_star, true_intercepts=true_icpt)
        )
    else:
        reports.append(auc_report(ordered, model.W, intercepts=model.intercepts))
    scalars = {"n_clusters": float(model.n_clusters)}
    if truth is not None:
        reports.append(rmse_coeff(np.array(truth["W_star"], dtype=float), model.W,
                                  task_ids=model.task_ids))
        scalars["ari"] = adjusted_rand_index(
            np.array(truth["labels"], dtype=int), model.labels
        )

    out = _out_dir(cfg)
    meta = _metadata("evaluate", cfg)
    json_path = out / "metrics.json"
    _write_json(
        {
            "format": "mtlcvx-metrics",
            "metadata": meta,
            "metrics": {rep.metric: rep.to_dict() for rep in reports},
            "scalars": scalars,
        },
        json_path,
    )
    csv_path = out / "metrics.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "task_id", "value"])
        for rep in reports:
            for tid, value in zip(rep.task_ids, rep.per_task):
                writer.writerow([rep.metric, tid, repr(float(value))])
        for name, value in sorted(scalars.items()):
            writer.writerow([name, "", repr(float(value))])
    _write_manifest(out, meta, [json_path, csv_path])
    shown = " ".join(f"{rep.metric}={rep.mean:.4f}" for rep in reports)
    extra_shown = " ".join(f"{k}={v:.4f}" for k, v in sorted(scalars.items()))
    print(f"evaluate: {shown} {extra_shown} -> {out}")
    return 0


def cmd_benchmark(cfg: dict) -> int:
    base_sim = dict(cfg["sim"])
    cells = cfg["cells"] if cfg["cells"] else [{}]
    grid = (
        None
        if cfg["grid"] is None
        else GridSpec(lam1=tuple(cfg["grid"]["lam1"]), lam2=tuple(cfg["grid"]["lam2"]))
    )
    out = _out_dir(cfg)
    meta = _metadata("benchmark", cfg)
    outputs = []
    any_failures = False
    for index, overrides in enumerate(cells):
        sim = SimConfig(**{**base_sim, **overrides})
        bench = BenchmarkConfig(
            sim=sim,
            methods=tuple(cfg["methods"]),
            n_reps=int(cfg["reps"]),
            seed=int(cfg["seed"]),
            knn_k=int(cfg["knn_k"]),
            grid=grid,
            mtlnl_lambdas=cfg["mtlnl_lambdas"],
            intercept_ridge=float(cfg["intercept_ridge"]),
            fit_tol=float(cfg["fit_tol"]),
            max_outer=int(cfg["max_outer"]),
            jobs=int(cfg["jobs"]),
        )
        result = run_monte_carlo(bench)
        suffix = "" if len(cells) == 1 else f"_cell{index}"
        json_path = out / f"benchmark{suffix}.json"
        csv_path = out / f"benchmark{suffix}.csv"
        summary_to_json(result, json_path)
        summary_to_csv(result, csv_path)
        outputs += [json_path, csv_path]
        cell_tag = f"C={sim.C} phi={sim.phi} sigma_v2={sim.sigma_v2}"
        for (method, metric), (mean, std, _) in sorted(result.summary.items()):
            print(f"benchmark[{cell_tag}] {method:8s} {metric:10s} {mean:8.4f} ({std:.4f})")
        if result.failure_counts:
            any_failures = True
            for method, count in sorted(result.failure_counts.items()):
                print(
                    f"benchmark[{cell_tag}] {method}: {count} failed replication(s)",
                    file=sys.stderr,
                )
    _write_manifest(out, meta, outputs)
    return 1 if any_failures else 0


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "tune": cmd_tune,
    "evaluate": cmd_evaluate,
    "benchmark": cmd_benchmark,
}


# --------------------------------------------------------------------------
# Argument parsing.

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mtlcvx",
        description="Multi-task regression with task clustering via centroid fusion.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("--config", help="JSON config file; flags override it")
        sp.add_argument("--seed", type=int, help="root random seed")
        sp.add_argument("--jobs", type=int, help="worker processes (results identical)")
        sp.add_argument("--out-dir", dest="out_dir", help="output directory")
        sp.add_argument("--profile", choices=sorted(PROFILES),
                        help="named bundle of defaults")

    sp = sub.add_parser("simulate", help="write synthetic task CSVs plus ground truth")
    add_common(sp)

    sp = sub.add_parser("fit", help="fit one joint model at fixed penalties")
    add_common(sp)
    sp.add_argument("--train", help="task CSV to fit on")
    sp.add_argument("--method", choices=("mtlcvx", "mtlacvx"))
    sp.add_argument("--lam1", type=float, help="centroid-pull penalty")
    sp.add_argument("--lam2", type=float, help="fusion penalty")
    sp.add_argument("--knn-k", dest="knn_k", type=int, help="neighbours for the task graph")
    sp.add_argument("--intercept-ridge", dest="intercept_ridge", type=float)
    sp.add_argument("--loss-kind", dest="loss_kind", choices=("linear", "logistic"))
    sp.add_argument("--tol", type=float, help="joint-fit stopping tolerance")
    sp.add_argument("--max-outer", dest="max_outer", type=int)
    sp.add_argument("--standardize", action=argparse.BooleanOptionalAction, default=None)
    sp.add_argument("--trace", action=argparse.BooleanOptionalAction, default=None,
                    help="also write the per-iteration objective trace")

    sp = sub.add_parser("tune", help="validation grid search plus the tuned model")
    add_common(sp)
    sp.add_argument("--train", help="task CSV to fit on")
    sp.add_argument("--validation", help="task CSV scored for selection")
    sp.add_argument("--method", choices=("mtlcvx", "mtlacvx"))
    sp.add_argument("--knn-k", dest="knn_k", type=int)
    sp.add_argument("--intercept-ridge", dest="intercept_ridge", type=float)
    sp.add_argument("--loss-kind", dest="loss_kind", choices=("linear", "logistic"))
    sp.add_argument("--tol", type=float)
    sp.add_argument("--max-outer", dest="max_outer", type=int)
    sp.add_argument("--standardize", action=argparse.BooleanOptionalAction, default=None)
    sp.add_argument("--trace", action=argparse.BooleanOptionalAction, default=None)

    sp = sub.add_parser("evaluate", help="score a saved model on a task CSV")
    add_common(sp)
    sp.add_argument("--model", help="model JSON written by fit or tune")
    sp.add_argument("--data", help="task CSV to score")
    sp.add_argument("--truth", help="truth JSON written by simulate (optional)")

    sp = sub.add_parser("benchmark", help="Monte Carlo study with summary tables")
    add_common(sp)
    sp.add_argument("--reps", type=int, help="number of replications")
    sp.add_argument("--methods", nargs="+", choices=KNOWN_METHODS)
    sp.add_argument("--knn-k", dest="knn_k", type=int)
    sp.add_argument("--intercept-ridge", dest="intercept_ridge", type=float)
    sp.add_argument("--fit-tol", dest="fit_tol", type=float)
    sp.add_argument("--max-outer", dest="max_outer", type=int)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args.command, args)
        return COMMANDS[args.command](cfg)
    except (MtlcvxError, OSError) as exc:
        print(f"mtlcvx {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
