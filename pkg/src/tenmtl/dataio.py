"""On-disk formats: dataset trees, model directories, and JSON configs.

Dataset tree (written by ``tenmtl simulate``, read by ``fit``/``tune``)::

    <root>/manifest.json           n_tasks, p, dims, family, per-task split sizes,
                                   generator config echo
    <root>/task_<id>/y.csv         header "y,split"; split is train|test
    <root>/task_<id>/z.csv         header "z1,...,zp" (only when p > 0)
    <root>/task_<id>/x.bin(.json)  stacked sample-first tensors, little-endian
                                   float64, row-major (only when dims nonempty)

Rows across y.csv/z.csv/x.bin are aligned; train rows come first.  Floats are
written with ``repr`` (shortest round-trip), so identical data gives identical
bytes.

Model directory: ``model.json`` (method, family, metadata, array index) plus
one ``<name>.bin``/``<name>.bin.json`` pair per array.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .estimator import TaskDataset, TuckerState, VectorState
from .simulate import GeneratedDataset, ScenarioConfig
from .tensor_ops import read_tensor, write_tensor

__all__ = [
    "ConfigError",
    "DataError",
    "write_dataset",
    "read_dataset",
    "save_model",
    "load_model",
    "state_to_arrays",
    "arrays_to_state",
    "check_keys",
    "write_json",
    "write_csv",
]


class ConfigError(ValueError):
    """Invalid or unknown configuration content."""


class DataError(ValueError):
    """Missing or corrupt on-disk data."""


def check_keys(doc: dict, allowed: set[str], where: str) -> None:
    """Reject unknown keys so config typos fail loudly."""
    if not isinstance(doc, dict):
        raise ConfigError(f"{where}: expected an object, got {type(doc).__name__}")
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(
            f"{where}: unknown keys {sorted(unknown)}; allowed: {sorted(allowed)}"
        )


def write_json(path: Path, doc) -> None:
    path.write_text(
        json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def write_csv(path: Path, header: list[str], rows) -> None:
    """Deterministic CSV: repr for floats, str otherwise, LF newlines."""
    def cell(v):
        if isinstance(v, float):
            return repr(v)
        return str(v)

    lines = [",".join(header)]
    lines.extend(",".join(cell(v) for v in row) for row in rows)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# dataset tree
# ---------------------------------------------------------------------------

def write_dataset(root: str | Path, data: GeneratedDataset) -> None:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    cfg = data.config
    p = data.train[0].p
    dims = data.train[0].dims
    manifest = {
        "version": 1,
        "family": "gaussian",
        "n_tasks": len(data.train),
        "p": p,
        "dims": list(dims),
        "tasks": [
            {
                "task_id": int(i),
                "n_train": int(data.train[i].n),
                "n_test": int(data.test[i].n) if data.test else 0,
            }
            for i in range(len(data.train))
        ],
        "generator": cfg.to_dict(),
        "clusters": [int(c) for c in data.clusters],
    }
    write_json(root / "manifest.json", manifest)
    for i, train in enumerate(data.train):
        task_dir = root / f"task_{i}"
        task_dir.mkdir(exist_ok=True)
        test = data.test[i] if data.test else None
        y = np.concatenate([train.y, test.y]) if test else train.y
        split = ["train"] * train.n + (["test"] * test.n if test else [])
        write_csv(
            task_dir / "y.csv",
            ["y", "split"],
            [(float(v), s) for v, s in zip(y, split)],
        )
        if p:
            z = np.vstack([train.z, test.z]) if test else train.z
            write_csv(
                task_dir / "z.csv",
                [f"z{j + 1}" for j in range(p)],
                [[float(v) for v in row] for row in z],
            )
        if dims:
            x = np.concatenate([train.x, test.x]) if test else train.x
            write_tensor(task_dir / "x.bin", x)


def read_dataset(
    root: str | Path,
) -> tuple[list[TaskDataset], list[TaskDataset], dict]:
    """Load a dataset tree; returns (train tasks, test tasks, manifest)."""
    root = Path(root)
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        raise DataError(f"{root}: no manifest.json")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{manifest_path}: invalid JSON ({exc})") from None
    try:
        n_tasks = int(manifest["n_tasks"])
        p = int(manifest["p"])
        dims = tuple(int(d) for d in manifest["dims"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"{manifest_path}: malformed manifest ({exc})") from None
    train, test = [], []
    for i in range(n_tasks):
        task_dir = root / f"task_{i}"
        try:
            y, split = _read_y(task_dir / "y.csv")
            z = _read_z(task_dir / "z.csv", p, y.shape[0]) if p else None
            x = read_tensor(task_dir / "x.bin") if dims else None
        except (OSError, ValueError) as exc:
            raise DataError(f"{task_dir}: {exc}") from None
        if x is not None and (x.shape[0] != y.shape[0] or x.shape[1:] != dims):
            raise DataError(
                f"{task_dir}: x shape {x.shape} inconsistent with "
                f"n={y.shape[0]}, dims={dims}"
            )
        tr = split == "train"
        te = ~tr
        train.append(
            TaskDataset(
                i,
                y[tr],
                z=z[tr] if z is not None else None,
                x=x[tr] if x is not None else None,
            )
        )
        if te.any():
            test.append(
                TaskDataset(
                    i,
                    y[te],
                    z=z[te] if z is not None else None,
                    x=x[te] if x is not None else None,
                )
            )
    return train, test, manifest


def _read_y(path: Path):
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != "y,split":
        raise DataError(f"{path}: expected header 'y,split'")
    y, split = [], []
    for ln in lines[1:]:
        val, s = ln.split(",")
        if s not in ("train", "test"):
            raise DataError(f"{path}: bad split label {s!r}")
        y.append(float(val))
        split.append(s)
    return np.array(y), np.array(split)


def _read_z(path: Path, p: int, n: int):
    lines = path.read_text(encoding="utf-8").splitlines()
    expected_header = ",".join(f"z{j + 1}" for j in range(p))
    if not lines or lines[0] != expected_header:
        raise DataError(f"{path}: expected header {expected_header!r}")
    rows = [[float(v) for v in ln.split(",")] for ln in lines[1:]]
    z = np.array(rows, dtype=np.float64).reshape(len(rows), p)
    if z.shape != (n, p):
        raise DataError(f"{path}: shape {z.shape}, expected {(n, p)}")
    return z


# ---------------------------------------------------------------------------
# model directories
# ---------------------------------------------------------------------------

def save_model(
    path: str | Path,
    method: str,
    family: str,
    arrays: dict[str, np.ndarray],
    meta: dict,
) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    index = {}
    for name in sorted(arrays):
        write_tensor(path / f"{name}.bin", arrays[name])
        index[name] = {"file": f"{name}.bin", "shape": list(np.shape(arrays[name]))}
    write_json(
        path / "model.json",
        {"version": 1, "method": method, "family": family, "meta": meta,
         "arrays": index},
    )


def load_model(path: str | Path):
    path = Path(path)
    doc_path = path / "model.json"
    if not doc_path.is_file():
        raise DataError(f"{path}: no model.json")
    doc = json.loads(doc_path.read_text(encoding="utf-8"))
    arrays = {
        name: read_tensor(path / entry["file"])
        for name, entry in doc.get("arrays", {}).items()
    }
    return doc["method"], doc["family"], arrays, doc.get("meta", {})


def state_to_arrays(state: TuckerState | VectorState) -> dict[str, np.ndarray]:
    if isinstance(state, VectorState):
        return {"u0": state.u0, "g0": state.g0, "u1": state.u1}
    arrays = {"w0": state.w0, "f0": state.f0, "d0": state.d0}
    if state.has_tensor:
        arrays["g"] = state.g
        for d, u_d in enumerate(state.u, start=1):
            arrays[f"u{d}"] = u_d
    if state.has_scalar:
        arrays["h"] = state.h
        arrays["v1"] = state.v1
    return arrays


def arrays_to_state(arrays: dict[str, np.ndarray], kind: str):
    if kind == "vector":
        return VectorState(u0=arrays["u0"], g0=arrays["g0"], u1=arrays["u1"])
    u = []
    d = 1
    while f"u{d}" in arrays:
        u.append(arrays[f"u{d}"])
        d += 1
    return TuckerState(
        g=arrays.get("g"),
        w0=arrays["w0"],
        f0=arrays["f0"],
        u=u,
        h=arrays.get("h"),
        d0=arrays["d0"],
        v1=arrays.get("v1"),
    )


# ---------------------------------------------------------------------------
# config documents
# ---------------------------------------------------------------------------

_SCENARIO_KEYS = {
    "scenario", "n_tasks", "n_train", "n_test", "dims", "n_clusters", "ranks",
    "beta_x", "sigma_x", "beta_u", "sigma_u", "sigma_e", "sparsity",
    "beta_group", "sigma_group", "sigma_nongroup", "n_groups",
    "group_min_frac", "group_max_frac", "seed",
}

_FIT_KEYS = {
    "ranks_tensor", "ranks_scalar", "q0", "lambda", "lambda_g", "lambda_h",
    "lambda_u", "lambda_v", "epsilon", "max_iter", "ridge", "lr_ridge",
}

_GRID_KEYS = {"r0", "r_feature", "t0", "t1", "q0", "lambdas", "k_folds", "seed"}

_EXPERIMENT_KEYS = {
    "scenario", "methods", "fit", "sweep", "replications", "master_seed", "n_jobs"
}


def scenario_from_dict(doc: dict, where: str = "scenario") -> ScenarioConfig:
    check_keys(doc, _SCENARIO_KEYS, where)
    try:
        return ScenarioConfig(**doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def fit_settings_from_dict(doc: dict, where: str = "fit"):
    from .tuning import FitSettings

    check_keys(doc, _FIT_KEYS, where)
    doc = dict(doc)
    lam = doc.pop("lambda", None)
    if lam is not None:
        for name in ("lambda_g", "lambda_h", "lambda_u", "lambda_v"):
            doc.setdefault(name, float(lam))
    if "ranks_tensor" in doc:
        doc["ranks_tensor"] = tuple(int(v) for v in doc["ranks_tensor"])
    if "ranks_scalar" in doc:
        doc["ranks_scalar"] = tuple(int(v) for v in doc["ranks_scalar"])
    try:
        return FitSettings(**doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def grid_from_dict(doc: dict, where: str = "grid"):
    from .tuning import Grid

    check_keys(doc, _GRID_KEYS, where)
    doc = dict(doc)
    for name in ("r0", "r_feature", "t0", "t1"):
        if name in doc:
            doc[name] = tuple(int(v) for v in doc[name])
    if "q0" in doc:
        doc["q0"] = tuple(None if v is None else int(v) for v in doc["q0"])
    if "lambdas" in doc:
        doc["lambdas"] = tuple(float(v) for v in doc["lambdas"])
    try:
        return Grid(**doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def experiment_from_dict(doc: dict):
    from .tuning import ExperimentConfig

    check_keys(doc, _EXPERIMENT_KEYS, "experiment")
    if "scenario" not in doc:
        raise ConfigError("experiment: missing 'scenario'")
    scenario = scenario_from_dict(doc["scenario"])
    fit_settings = fit_settings_from_dict(doc.get("fit", {}))
    sweep = doc.get("sweep", [{}])
    if not isinstance(sweep, list) or not sweep:
        raise ConfigError("experiment: 'sweep' must be a nonempty list of objects")
    for i, entry in enumerate(sweep):
        check_keys(entry, _SCENARIO_KEYS - {"scenario", "seed"}, f"sweep[{i}]")
    try:
        return ExperimentConfig(
            scenario=scenario,
            methods=tuple(doc.get("methods", ("tenmtl", "local", "global", "lr-tucker"))),
            fit=fit_settings,
            sweep=tuple(dict(e) for e in sweep),
            replications=int(doc.get("replications", 10)),
            master_seed=int(doc.get("master_seed", 0)),
            n_jobs=int(doc.get("n_jobs", 1)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"experiment: {exc}") from None
