"""Command-line interface.

Verbs: ``simulate`` (scenario config -> dataset tree), ``fit`` (dataset ->
model dir + metrics), ``tune`` (dataset + grid -> CV report), ``bench``
(experiment config -> replication tables), ``report`` (tables -> pivoted
summary).  Exit codes: 0 success, 2 configuration/usage error, 3 missing or
corrupt data, 4 runtime fitting failure.

All outputs are byte-deterministic given the same inputs and seeds.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import dataio
from .dataio import ConfigError, DataError
from .estimator import HyperParams, fit, fit_vector, predict, reconstruct_models
from .simulate import generate
from .tuning import (
    aggregate,
    classification_accuracy,
    kfold_cv,
    rmse,
    run_experiment,
)


def _load_json(path: str, kind: type[Exception]) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise kind(f"{path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise kind(f"{path}: invalid JSON ({exc})") from None


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    doc = _load_json(args.config, ConfigError)
    if isinstance(doc.get("scenario"), dict):
        doc = doc["scenario"]
    scenario = dataio.scenario_from_dict(doc)
    if args.seed is not None:
        scenario = dataclasses.replace(scenario, seed=args.seed)
    data = generate(scenario)
    dataio.write_dataset(args.out, data)
    print(f"wrote {len(data.train)} tasks to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------

def _fit_settings(args, dims) -> "FitSettings":
    doc = {}
    if args.config:
        full = _load_json(args.config, ConfigError)
        doc = full.get("fit", full) if isinstance(full, dict) else {}
    settings = dataio.fit_settings_from_dict(doc)
    updates = {}
    if args.r0 is not None or args.r_feature is not None:
        if args.r0 is None or args.r_feature is None:
            raise ConfigError("--r0 and --r-feature must be given together")
        updates["ranks_tensor"] = (args.r0,) + (args.r_feature,) * len(dims)
    if args.t0 is not None or args.t1 is not None:
        if args.t0 is None or args.t1 is None:
            raise ConfigError("--t0 and --t1 must be given together")
        updates["ranks_scalar"] = (args.t0, args.t1)
    if args.q0 is not None:
        updates["q0"] = args.q0
    if args.lam is not None:
        for name in ("lambda_g", "lambda_h", "lambda_u", "lambda_v"):
            updates[name] = args.lam
    for name in ("lambda_g", "lambda_h", "lambda_u", "lambda_v",
                 "epsilon", "max_iter", "ridge", "lr_ridge"):
        val = getattr(args, name)
        if val is not None:
            updates[name] = val
    return dataclasses.replace(settings, **updates)


def _metric_fns(family):
    if family == "bernoulli":
        return "error_rate", lambda y, pred: 1.0 - classification_accuracy(y, pred)
    return "rmse", rmse


def _write_metrics(out, family, models, train, test):
    name, metric = _metric_fns(family)
    per_task = []
    for i, task in enumerate(train):
        entry = {
            "task_id": task.task_id,
            f"train_{name}": metric(
                task.y, predict(models[i], z=task.z, x=task.x, family=family)
            ),
        }
        if i < len(test):
            t = test[i]
            entry[f"test_{name}"] = metric(
                t.y, predict(models[i], z=t.z, x=t.x, family=family)
            )
        per_task.append(entry)
    doc = {"metric": name, "per_task": per_task}
    doc[f"mean_train_{name}"] = float(
        np.mean([e[f"train_{name}"] for e in per_task])
    )
    if test:
        doc[f"mean_test_{name}"] = float(
            np.mean([e[f"test_{name}"] for e in per_task if f"test_{name}" in e])
        )
    dataio.write_json(Path(out) / "metrics.json", doc)
    return doc


def cmd_fit(args) -> int:
    train, test, manifest = dataio.read_dataset(args.data)
    family = manifest.get("family", "gaussian")
    dims = tuple(manifest.get("dims", ()))
    settings = _fit_settings(args, dims)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    method = args.method
    ids = [t.task_id for t in train]

    if method == "tenmtl":
        hp = settings.hyper(family)
        state, trace = fit(train, hp)
        models = reconstruct_models(state, task_ids=ids)
        meta = {
            "task_ids": ids,
            "hyper": {
                "ranks_tensor": list(hp.ranks_tensor),
                "ranks_scalar": list(hp.ranks_scalar),
                "q0": hp.resolved_q0(),
                "lambda_g": hp.lambda_g,
                "lambda_h": hp.lambda_h,
                "lambda_u": hp.lambda_u,
                "lambda_v": hp.lambda_v,
                "epsilon": hp.epsilon,
                "max_iter": hp.max_iter,
                "seed": hp.seed,
            },
        }
        dataio.save_model(out, method, family, dataio.state_to_arrays(state), meta)
        dataio.write_json(
            out / "trace.json",
            {
                "objectives": [float(v) for v in trace.objectives],
                "iterations": trace.iterations,
                "converged": trace.converged,
                "final_rel_change": trace.final_rel_change,
            },
        )
    elif method == "tenmtl-vector":
        if not settings.ranks_scalar:
            raise ConfigError("tenmtl-vector needs --t0/--t1 (or fit.ranks_scalar)")
        state, trace = fit_vector(
            train,
            r0=settings.ranks_scalar[0],
            r1=settings.ranks_scalar[1],
            lambda_g=settings.lambda_g,
            lambda_u=settings.lambda_u,
            family=family,
            epsilon=settings.epsilon,
            max_iter=settings.max_iter,
        )
        models = reconstruct_models(state, task_ids=ids)
        dataio.save_model(
            out, method, family, dataio.state_to_arrays(state),
            {"task_ids": ids, "ranks": list(settings.ranks_scalar),
             "lambda_g": settings.lambda_g, "lambda_u": settings.lambda_u},
        )
        dataio.write_json(
            out / "trace.json",
            {
                "objectives": [float(v) for v in trace.objectives],
                "iterations": trace.iterations,
                "converged": trace.converged,
                "final_rel_change": trace.final_rel_change,
            },
        )
    elif method in ("local", "global", "lr-tucker"):
        from .tuning import _fit_models

        models = _fit_models(method, train, family, settings)
        arrays = {}
        if models[0].gamma is not None:
            arrays["gamma_stack"] = np.vstack([m.gamma for m in models])
        if models[0].b is not None:
            arrays["b_stack"] = np.stack([m.b for m in models])
        dataio.save_model(
            out, method, family, arrays,
            {"task_ids": ids, "ridge": settings.ridge,
             "ranks_tensor": list(settings.ranks_tensor),
             "ranks_scalar": list(settings.ranks_scalar)},
        )
    else:
        raise ConfigError(f"unknown method {method!r}")

    metrics = _write_metrics(out, family, models, train, test)
    name = metrics["metric"]
    line = f"method={method} mean_train_{name}={metrics[f'mean_train_{name}']:.6f}"
    if f"mean_test_{name}" in metrics:
        line += f" mean_test_{name}={metrics[f'mean_test_{name}']:.6f}"
    print(line)
    return 0


# ---------------------------------------------------------------------------
# tune
# ---------------------------------------------------------------------------

def cmd_tune(args) -> int:
    train, _, manifest = dataio.read_dataset(args.data)
    family = manifest.get("family", "gaussian")
    doc = _load_json(args.config, ConfigError)
    if isinstance(doc.get("grid"), dict):
        doc = doc["grid"]
    grid = dataio.grid_from_dict(doc)
    report = kfold_cv(
        train, grid, family=family, method=args.method, n_jobs=args.jobs
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dataio.write_json(
        out / "cv.json",
        {
            "metric": report.metric,
            "selected_index": report.selected_index,
            "selected": _jsonable(report.selected),
            "candidates": [_jsonable(c) for c in report.candidates],
            "mean_scores": [float(v) for v in report.mean_scores],
            "fold_scores": [[float(v) for v in row] for row in report.fold_scores],
        },
    )
    sel = report.selected
    print(
        f"selected ranks_tensor={sel['ranks_tensor']} "
        f"ranks_scalar={sel['ranks_scalar']} lambda={sel['lambda_g']} "
        f"({report.metric}={report.mean_scores[report.selected_index]:.6f})"
    )
    return 0


def _jsonable(cand: dict) -> dict:
    out = {}
    for k, v in cand.items():
        if isinstance(v, tuple):
            out[k] = list(v)
        else:
            out[k] = v
    return out


# ---------------------------------------------------------------------------
# bench / report
# ---------------------------------------------------------------------------

_ROW_FIELDS = [
    "setting", "scenario", "beta_u", "sigma_e", "sparsity", "rep", "seed",
    "method", "train_rmse", "test_rmse", "error",
]
_AGG_FIELDS = [
    "setting", "scenario", "beta_u", "sigma_e", "sparsity", "method",
    "mean_test_rmse", "std_test_rmse", "n_reps", "n_failed",
]


def cmd_bench(args) -> int:
    doc = _load_json(args.config, ConfigError)
    cfg = dataio.experiment_from_dict(doc)
    if args.jobs is not None:
        cfg = dataclasses.replace(cfg, n_jobs=args.jobs)
    rows = run_experiment(cfg)
    agg = aggregate(rows)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dataio.write_csv(
        out / "results.csv", _ROW_FIELDS, [[r[f] for f in _ROW_FIELDS] for r in rows]
    )
    dataio.write_csv(
        out / "summary.csv", _AGG_FIELDS, [[r[f] for f in _AGG_FIELDS] for r in agg]
    )
    dataio.write_json(out / "results.json", {"config": doc, "rows": rows})
    for row in agg:
        print(
            f"setting={row['setting']} method={row['method']:<13} "
            f"test_rmse={row['mean_test_rmse']:.3f} ({row['std_test_rmse']:.3f})"
        )
    return 0


def cmd_report(args) -> int:
    results = Path(args.results)
    path = results / "results.json" if results.is_dir() else results
    if not path.is_file():
        raise DataError(f"{path}: not found")
    doc = _load_json(str(path), DataError)
    rows = doc.get("rows", [])
    if not rows:
        raise DataError(f"{path}: no replication rows")
    agg = aggregate(rows)
    methods = list(dict.fromkeys(r["method"] for r in agg))
    settings = list(dict.fromkeys(r["setting"] for r in agg))
    by_key = {(r["setting"], r["method"]): r for r in agg}
    pivot = []
    for s in settings:
        any_row = next(r for r in agg if r["setting"] == s)
        entry = {
            "setting": s,
            "scenario": any_row["scenario"],
            "beta_u": any_row["beta_u"],
            "sigma_e": any_row["sigma_e"],
            "sparsity": any_row["sparsity"],
        }
        for m in methods:
            r = by_key.get((s, m))
            entry[m] = (
                f"{r['mean_test_rmse']:.3f} ({r['std_test_rmse']:.3f})" if r else ""
            )
        pivot.append(entry)
    if args.format == "json":
        print(json.dumps(pivot, indent=2, sort_keys=True))
    else:
        header = ["setting", "scenario", "beta_u", "sigma_e", "sparsity"] + methods
        print(",".join(header))
        for entry in pivot:
            print(",".join(str(entry[h]) for h in header))
    return 0


# ---------------------------------------------------------------------------
# parser / entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tenmtl",
        description="Personalized multi-task regression with shared Tucker factors",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic dataset tree")
    p.add_argument("--config", required=True, help="scenario JSON")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit one method on a dataset tree")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument(
        "--method", required=True,
        choices=["tenmtl", "tenmtl-vector", "local", "global", "lr-tucker"],
    )
    p.add_argument("--out", required=True, help="output model directory")
    p.add_argument("--config", default=None, help="JSON with a 'fit' section")
    p.add_argument("--r0", type=int, default=None, help="tensor-side task rank")
    p.add_argument("--r-feature", type=int, default=None,
                   help="tensor-side feature rank (all modes)")
    p.add_argument("--t0", type=int, default=None, help="scalar-side task rank")
    p.add_argument("--t1", type=int, default=None, help="scalar-side feature rank")
    p.add_argument("--q0", type=int, default=None, help="shared task-factor columns")
    p.add_argument("--lam", type=float, default=None,
                   help="tied value for all four penalties")
    p.add_argument("--lambda-g", dest="lambda_g", type=float, default=None)
    p.add_argument("--lambda-h", dest="lambda_h", type=float, default=None)
    p.add_argument("--lambda-u", dest="lambda_u", type=float, default=None)
    p.add_argument("--lambda-v", dest="lambda_v", type=float, default=None)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--max-iter", dest="max_iter", type=int, default=None)
    p.add_argument("--ridge", type=float, default=None,
                   help="ridge for local/global/lr-tucker")
    p.add_argument("--lr-ridge", dest="lr_ridge", type=float, default=None,
                   help="first-stage ridge for lr-tucker only (default: --ridge)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("tune", help="cross-validated grid search")
    p.add_argument("--data", required=True)
    p.add_argument("--config", required=True, help="grid JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--method", default="tenmtl",
                   choices=["tenmtl", "tenmtl-vector", "lr-tucker"])
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("bench", help="run a replicated simulation experiment")
    p.add_argument("--config", required=True, help="experiment JSON")
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("report", help="pivot bench results into a summary table")
    p.add_argument("--results", required=True,
                   help="bench output directory or results.json")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # numerical/runtime failure
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
