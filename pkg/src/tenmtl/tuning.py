"""Cross-validated hyperparameter selection and the simulation experiment harness.

Metrics: Gaussian models are scored by RMSE, Bernoulli by error rate
(1 - accuracy); both are "lower is better", averaged per task first, then over
tasks, then over folds.  Reported spreads are sample standard deviations
(ddof=1).

Reproducibility: fold assignments derive from ``SeedSequence((seed, task_index))``;
experiment replications derive data seeds from
``SeedSequence((master_seed, setting_index, replication_index))`` so every
method inside one replication sees the same dataset.  Parallel execution
(joblib) returns results in submission order, so outputs are identical for any
worker count.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace

import numpy as np

from .baselines import fit_global, fit_local, fit_lr_tucker
from .estimator import (
    HyperParams,
    TaskDataset,
    _check_tasks,
    fit,
    fit_vector,
    predict,
    reconstruct_models,
)
from .families import get_family
from .simulate import ScenarioConfig, generate

__all__ = [
    "rmse",
    "classification_accuracy",
    "Grid",
    "CvReport",
    "kfold_cv",
    "FitSettings",
    "ExperimentConfig",
    "run_experiment",
    "aggregate",
    "derive_seed",
]


def rmse(y_true, y_pred) -> float:
    y_true = np.asarray(y_true, dtype=np.float64).ravel()
    y_pred = np.asarray(y_pred, dtype=np.float64).ravel()
    if y_true.shape != y_pred.shape:
        raise ValueError(f"length mismatch: {y_true.shape} vs {y_pred.shape}")
    return float(np.sqrt(np.mean(np.square(y_true - y_pred))))


def classification_accuracy(y_true, prob) -> float:
    """Fraction of correct 0/1 labels at the 0.5 probability threshold."""
    y_true = np.asarray(y_true, dtype=np.float64).ravel()
    labels = (np.asarray(prob, dtype=np.float64).ravel() > 0.5).astype(np.float64)
    if y_true.shape != labels.shape:
        raise ValueError(f"length mismatch: {y_true.shape} vs {labels.shape}")
    return float(np.mean(labels == y_true))


def derive_seed(*indices) -> int:
    """Deterministic child seed from integer coordinates."""
    return int(np.random.SeedSequence(tuple(int(i) for i in indices)).generate_state(1)[0])


# ---------------------------------------------------------------------------
# cross-validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Grid:
    """Joint candidate grid over ranks and the (tied) penalty weight.

    ``r0``/``r_feature`` span the tensor side (``ranks_tensor =
    (r0, rf, ..., rf)``); ``t0``/``t1`` span the scalar side.  Leave a side
    empty for data without those predictors.  ``q0`` candidates may contain
    ``None`` (the default rule).  One ``lambdas`` value is applied to all four
    penalties.
    """

    r0: tuple[int, ...] = ()
    r_feature: tuple[int, ...] = ()
    t0: tuple[int, ...] = ()
    t1: tuple[int, ...] = ()
    q0: tuple = (None,)
    lambdas: tuple[float, ...] = (0.001,)
    k_folds: int = 5
    seed: int = 0

    def candidates(self, p: int, dims: tuple[int, ...]) -> list[dict]:
        """Expand to HyperParams keyword dicts, in deterministic grid order."""
        if bool(dims) != bool(self.r0 and self.r_feature):
            raise ValueError(
                f"tensor-side grid {(self.r0, self.r_feature)} inconsistent "
                f"with dims {dims}"
            )
        if (p > 0) != bool(self.t0 and self.t1):
            raise ValueError(
                f"scalar-side grid {(self.t0, self.t1)} inconsistent with p={p}"
            )
        tensor_opts = (
            [(int(r0),) + (int(rf),) * len(dims)
             for r0, rf in itertools.product(self.r0, self.r_feature)]
            if dims
            else [()]
        )
        scalar_opts = (
            [(int(t0), int(t1)) for t0, t1 in itertools.product(self.t0, self.t1)]
            if p
            else [()]
        )
        out = []
        for rt, rs, q0, lam in itertools.product(
            tensor_opts, scalar_opts, self.q0, self.lambdas
        ):
            out.append(
                dict(
                    ranks_tensor=rt,
                    ranks_scalar=rs,
                    q0=q0,
                    lambda_g=float(lam),
                    lambda_h=float(lam),
                    lambda_u=float(lam),
                    lambda_v=float(lam),
                )
            )
        return out


@dataclass
class CvReport:
    candidates: list[dict]
    fold_scores: np.ndarray  # (n_candidates, k_folds)
    mean_scores: np.ndarray  # (n_candidates,)
    selected_index: int
    selected: dict
    fold_assignments: list[np.ndarray]  # per task, length n_i fold ids
    metric: str


def _fold_assignments(tasks, k, seed):
    folds = []
    for i, task in enumerate(tasks):
        if task.n < k:
            raise ValueError(
                f"task {task.task_id}: {task.n} samples cannot fill {k} folds"
            )
        rng = np.random.default_rng(np.random.SeedSequence((int(seed), i)))
        ids = np.empty(task.n, dtype=np.int64)
        ids[rng.permutation(task.n)] = np.arange(task.n) % k
        folds.append(ids)
    return folds


def _subset(task: TaskDataset, mask: np.ndarray) -> TaskDataset:
    return TaskDataset(
        task.task_id,
        task.y[mask],
        z=task.z[mask] if task.z is not None else None,
        x=task.x[mask] if task.x is not None else None,
    )


def _total_rank(cand: dict) -> int:
    return sum(cand["ranks_tensor"]) + sum(cand["ranks_scalar"])


def _score_candidate(tasks, folds, k, cand, family, epsilon, max_iter, method):
    fam = get_family(family)
    metric = rmse if fam.name == "gaussian" else (
        lambda y, prob: 1.0 - classification_accuracy(y, prob)
    )
    scores = np.empty(k)
    for fold in range(k):
        train = [_subset(t, folds[i] != fold) for i, t in enumerate(tasks)]
        vals = [_subset(t, folds[i] == fold) for i, t in enumerate(tasks)]
        models = _fit_models(
            method,
            train,
            fam,
            FitSettings(
                ranks_tensor=cand["ranks_tensor"],
                ranks_scalar=cand["ranks_scalar"],
                q0=cand["q0"],
                lambda_g=cand["lambda_g"],
                lambda_h=cand["lambda_h"],
                lambda_u=cand["lambda_u"],
                lambda_v=cand["lambda_v"],
                epsilon=epsilon,
                max_iter=max_iter,
            ),
        )
        per_task = [
            metric(v.y, predict(models[i], z=v.z, x=v.x, family=fam))
            for i, v in enumerate(vals)
        ]
        scores[fold] = float(np.mean(per_task))
    return scores


def kfold_cv(
    tasks: list[TaskDataset],
    grid: Grid,
    family: str = "gaussian",
    method: str = "tenmtl",
    epsilon: float = 1e-5,
    max_iter: int = 50,
    n_jobs: int = 1,
) -> CvReport:
    """Grid search by per-task k-fold CV, fitting all tasks jointly per fold.

    Ties on the mean score break toward the smallest total rank, then the
    smallest lambda, then the earliest grid position.
    """
    p, dims = _check_tasks(tasks)
    cands = grid.candidates(p, dims)
    folds = _fold_assignments(tasks, grid.k_folds, grid.seed)

    def job(cand):
        return _score_candidate(
            tasks, folds, grid.k_folds, cand, family, epsilon, max_iter, method
        )

    if n_jobs != 1:
        from joblib import Parallel, delayed

        rows = Parallel(n_jobs=n_jobs)(delayed(job)(c) for c in cands)
    else:
        rows = [job(c) for c in cands]
    fold_scores = np.vstack(rows)
    means = fold_scores.mean(axis=1)
    order = sorted(
        range(len(cands)),
        key=lambda i: (means[i], _total_rank(cands[i]), cands[i]["lambda_g"], i),
    )
    best = order[0]
    fam_name = get_family(family).name
    return CvReport(
        candidates=cands,
        fold_scores=fold_scores,
        mean_scores=means,
        selected_index=best,
        selected=cands[best],
        fold_assignments=folds,
        metric="rmse" if fam_name == "gaussian" else "error_rate",
    )


# ---------------------------------------------------------------------------
# experiment harness
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FitSettings:
    """Fixed hyperparameters used when no CV grid is given."""

    ranks_tensor: tuple[int, ...] = ()
    ranks_scalar: tuple[int, ...] = ()
    q0: int | None = None
    lambda_g: float = 0.0
    lambda_h: float = 0.0
    lambda_u: float = 0.0
    lambda_v: float = 0.0
    epsilon: float = 1e-5
    max_iter: int = 50
    ridge: float = 1e-6
    lr_ridge: float | None = None  # first-stage ridge for lr-tucker; None -> ridge

    def hyper(self, family) -> HyperParams:
        return HyperParams(
            ranks_tensor=tuple(self.ranks_tensor),
            ranks_scalar=tuple(self.ranks_scalar),
            q0=self.q0,
            lambda_g=self.lambda_g,
            lambda_h=self.lambda_h,
            lambda_u=self.lambda_u,
            lambda_v=self.lambda_v,
            epsilon=self.epsilon,
            max_iter=self.max_iter,
            family=family,
        )


_METHODS = ("tenmtl", "tenmtl-vector", "local", "global", "lr-tucker")


def _fit_models(method, train, family, settings: FitSettings):
    """Fit one method; returns per-task PersonalizedModels aligned with tasks."""
    fam = get_family(family)
    ids = [t.task_id for t in train]
    if method == "local":
        return fit_local(train, fam, ridge=settings.ridge)
    if method == "global":
        shared = fit_global(train, fam)
        return [shared] * len(train)
    if method == "lr-tucker":
        ridge = settings.ridge if settings.lr_ridge is None else settings.lr_ridge
        return fit_lr_tucker(
            train,
            fam,
            ranks_tensor=tuple(settings.ranks_tensor),
            ranks_scalar=tuple(settings.ranks_scalar),
            ridge=ridge,
        )
    if method == "tenmtl":
        state, _ = fit(train, settings.hyper(fam))
        return reconstruct_models(state, task_ids=ids)
    if method == "tenmtl-vector":
        if not settings.ranks_scalar:
            raise ValueError("tenmtl-vector needs ranks_scalar=(R_0, R_1)")
        state, _ = fit_vector(
            train,
            r0=settings.ranks_scalar[0],
            r1=settings.ranks_scalar[1],
            lambda_g=settings.lambda_g,
            lambda_u=settings.lambda_u,
            family=fam,
            epsilon=settings.epsilon,
            max_iter=settings.max_iter,
        )
        return reconstruct_models(state, task_ids=ids)
    raise ValueError(f"unknown method {method!r}; expected one of {_METHODS}")


@dataclass
class ExperimentConfig:
    """A sweep of scenario settings x methods x replications."""

    scenario: ScenarioConfig
    methods: tuple[str, ...] = ("tenmtl", "local", "global", "lr-tucker")
    fit: FitSettings = field(default_factory=FitSettings)
    sweep: tuple[dict, ...] = ({},)  # per-setting ScenarioConfig overrides
    replications: int = 10
    master_seed: int = 0
    n_jobs: int = 1

    def __post_init__(self):
        for m in self.methods:
            if m not in _METHODS:
                raise ValueError(f"unknown method {m!r}; expected one of {_METHODS}")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")


def _run_replication(cfg: ExperimentConfig, setting_idx, overrides, rep):
    seed = derive_seed(cfg.master_seed, setting_idx, rep)
    scen = replace(cfg.scenario, seed=seed, **overrides)
    data = generate(scen)
    fam = get_family("gaussian")
    rows = []
    for method in cfg.methods:
        row = {
            "setting": setting_idx,
            "scenario": scen.scenario,
            "rep": rep,
            "seed": seed,
            "method": method,
            **{k: getattr(scen, k) for k in ("beta_u", "sigma_e", "sparsity")},
        }
        try:
            models = _fit_models(method, data.train, fam, cfg.fit)
            test_errs = [
                rmse(t.y, predict(models[i], z=t.z, x=t.x, family=fam))
                for i, t in enumerate(data.test)
            ]
            train_errs = [
                rmse(t.y, predict(models[i], z=t.z, x=t.x, family=fam))
                for i, t in enumerate(data.train)
            ]
            row["test_rmse"] = float(np.mean(test_errs))
            row["train_rmse"] = float(np.mean(train_errs))
            row["error"] = ""
        except Exception as exc:  # recorded, not fatal
            row["test_rmse"] = float("nan")
            row["train_rmse"] = float("nan")
            row["error"] = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    return rows


def run_experiment(cfg: ExperimentConfig) -> list[dict]:
    """All replication rows, ordered by (setting, replication, method)."""
    jobs = [
        (idx, overrides, rep)
        for idx, overrides in enumerate(cfg.sweep)
        for rep in range(cfg.replications)
    ]
    if cfg.n_jobs != 1:
        from joblib import Parallel, delayed

        chunks = Parallel(n_jobs=cfg.n_jobs)(
            delayed(_run_replication)(cfg, i, o, r) for i, o, r in jobs
        )
    else:
        chunks = [_run_replication(cfg, i, o, r) for i, o, r in jobs]
    return [row for chunk in chunks for row in chunk]


def aggregate(rows: list[dict]) -> list[dict]:
    """Mean/sample-std of test RMSE per (setting, method), in first-seen order."""
    keys = []
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        key = (row["setting"], row["method"])
        if key not in groups:
            groups[key] = []
            keys.append(key)
        groups[key].append(row)
    out = []
    for key in keys:
        grp = groups[key]
        vals = np.array([r["test_rmse"] for r in grp], dtype=np.float64)
        ok = vals[np.isfinite(vals)]
        out.append(
            {
                "setting": key[0],
                "method": key[1],
                **{k: grp[0][k] for k in ("scenario", "beta_u", "sigma_e", "sparsity")},
                "mean_test_rmse": float(ok.mean()) if ok.size else float("nan"),
                "std_test_rmse": float(ok.std(ddof=1)) if ok.size > 1 else 0.0,
                "n_reps": int(len(grp)),
                "n_failed": int(len(grp) - ok.size),
            }
        )
    return out
