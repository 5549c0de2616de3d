"""Reference methods: per-task, pooled, and rank-truncated per-task GLMs."""

from __future__ import annotations

import numpy as np

from .estimator import PersonalizedModel, TaskDataset, _check_tasks, _local_fits
from .families import Family
from .glm import GlmProblem, fit_glm
from .tensor_ops import hosvd

__all__ = ["fit_local", "fit_global", "fit_lr_tucker"]


def fit_local(
    tasks: list[TaskDataset],
    family: str | Family = "gaussian",
    ridge: float = 1e-6,
) -> list[PersonalizedModel]:
    """Independent ridge-stabilized GLM per task."""
    gamma_hat, b_hat = _local_fits(tasks, family, ridge)
    return [
        PersonalizedModel(
            task.task_id,
            b=b_hat[i] if b_hat is not None else None,
            gamma=gamma_hat[i] if gamma_hat is not None else None,
        )
        for i, task in enumerate(tasks)
    ]


def fit_global(
    tasks: list[TaskDataset],
    family: str | Family = "gaussian",
    ridge: float = 0.0,
) -> PersonalizedModel:
    """One GLM on all tasks pooled; the same coefficients serve every task."""
    p, dims = _check_tasks(tasks)
    design = np.vstack(
        [np.hstack([t.z if p else np.zeros((t.n, 0)),
                    t.x.reshape(t.n, -1, order="F") if dims else np.zeros((t.n, 0))])
         for t in tasks]
    )
    response = np.concatenate([t.y for t in tasks])
    problem = GlmProblem(
        design=design, response=response, l2_penalty=ridge, family=family
    )
    coef = fit_glm(problem).coefficients
    return PersonalizedModel(
        "global",
        b=coef[p:].reshape(dims, order="F") if dims else None,
        gamma=coef[:p] if p else None,
    )


def fit_lr_tucker(
    tasks: list[TaskDataset],
    family: str | Family = "gaussian",
    ranks_tensor: tuple[int, ...] = (),
    ranks_scalar: tuple[int, ...] = (),
    ridge: float = 1e-6,
) -> list[PersonalizedModel]:
    """Local fits, stacked and rank-truncated by HOSVD, then re-expanded.

    ``ranks_tensor``/``ranks_scalar`` follow the same convention as
    :class:`tenmtl.estimator.HyperParams`; full ranks reproduce the local fits
    exactly.
    """
    p, dims = _check_tasks(tasks)
    if bool(dims) != bool(ranks_tensor) or (p > 0) != bool(ranks_scalar):
        raise ValueError(
            f"ranks ({ranks_tensor}, {ranks_scalar}) inconsistent with data "
            f"(p={p}, dims={dims})"
        )
    gamma_hat, b_hat = _local_fits(tasks, family, ridge)
    b_stack = hosvd(b_hat, list(ranks_tensor)).full() if dims else None
    gamma = hosvd(gamma_hat, list(ranks_scalar)).full() if p else None
    return [
        PersonalizedModel(
            task.task_id,
            b=b_stack[i] if b_stack is not None else None,
            gamma=gamma[i] if gamma is not None else None,
        )
        for i, task in enumerate(tasks)
    ]
