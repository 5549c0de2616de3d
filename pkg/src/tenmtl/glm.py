"""Penalized canonical-link GLMs solved by IRLS + coordinate descent.

The problem solved is

    minimize  sum_j [ -y_j eta_j + b(eta_j) ]  +  l1 ||beta||_1  +  0.5 l2 ||beta||^2
    where     eta = design @ beta + offset

with the *summed* (not averaged) negative log-likelihood, so ``l1`` is an
absolute penalty weight.  The outer loop is iteratively reweighted least
squares; each weighted quadratic is minimized by cyclic soft-threshold
coordinate descent on its Gram form (a compiled kernel when available, a
NumPy fallback otherwise; set ``TENMTL_PURE_PYTHON=1`` to force the fallback).
Unpenalized (``l1 == 0``) quadratics are solved directly by least squares.

Gaussian problems need a single IRLS iteration (the quadratic *is* the
objective); Bernoulli problems iterate with step halving, which makes every
call from a warm start non-increasing in the penalized objective.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .families import Family, get_family

if os.environ.get("TENMTL_PURE_PYTHON"):
    from ._cd_py import cd_quadratic

    _KERNEL = "pure-python"
else:
    try:
        from ._cd_fast import cd_quadratic

        _KERNEL = "compiled"
    except ImportError:
        from ._cd_py import cd_quadratic

        _KERNEL = "pure-python"

__all__ = [
    "GlmProblem",
    "GlmSolution",
    "cd_kernel_name",
    "neg_log_likelihood",
    "penalized_objective",
    "lambda_max",
    "kkt_check",
    "fit_glm",
]

# IRLS guards: |eta| cap when computing Bernoulli weights, variance floor.
_ETA_CAP = 30.0
_WEIGHT_FLOOR = 1e-10
_MAX_HALVINGS = 30


def cd_kernel_name() -> str:
    """Which coordinate-descent kernel is active: ``"compiled"`` or ``"pure-python"``."""
    return _KERNEL


@dataclass
class GlmProblem:
    """One penalized GLM instance.

    ``design`` is ``n x q`` (``q`` may be 0), ``response`` and ``offset`` are
    length ``n`` (``offset=None`` means zeros).  ``l1_penalty`` weights the
    lasso term; ``l2_penalty`` an optional ridge term ``0.5 l2 ||beta||^2``
    used for stabilized unpenalized fits.
    """

    design: np.ndarray
    response: np.ndarray
    offset: np.ndarray | None = None
    l1_penalty: float = 0.0
    l2_penalty: float = 0.0
    family: str | Family = "gaussian"

    def __post_init__(self):
        self.design = np.ascontiguousarray(self.design, dtype=np.float64)
        self.response = np.asarray(self.response, dtype=np.float64).ravel()
        if self.design.ndim != 2:
            raise ValueError(f"design must be 2-D, got shape {self.design.shape}")
        n = self.design.shape[0]
        if self.response.shape[0] != n:
            raise ValueError(
                f"response length {self.response.shape[0]} != design rows {n}"
            )
        if self.offset is None:
            self.offset = np.zeros(n)
        else:
            self.offset = np.asarray(self.offset, dtype=np.float64).ravel()
            if self.offset.shape[0] != n:
                raise ValueError(
                    f"offset length {self.offset.shape[0]} != design rows {n}"
                )
        self.l1_penalty = float(self.l1_penalty)
        self.l2_penalty = float(self.l2_penalty)
        if self.l1_penalty < 0 or self.l2_penalty < 0:
            raise ValueError("penalties must be nonnegative")
        self.family = get_family(self.family)
        if not (
            np.all(np.isfinite(self.design))
            and np.all(np.isfinite(self.response))
            and np.all(np.isfinite(self.offset))
        ):
            raise ValueError("design/response/offset must be finite")

    @property
    def n_features(self) -> int:
        return self.design.shape[1]


@dataclass
class GlmSolution:
    coefficients: np.ndarray
    objective: float
    iterations: int
    kkt_residual: float
    converged: bool
    message: str = ""


def neg_log_likelihood(family: str | Family, eta: np.ndarray, y: np.ndarray) -> float:
    """Summed negative log-likelihood ``sum(-y*eta + b(eta))``."""
    fam = get_family(family)
    eta = np.asarray(eta, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    return float(np.sum(-y * eta + fam.b(eta)))


def penalized_objective(problem: GlmProblem, beta: np.ndarray) -> float:
    """NLL plus l1/l2 penalties at ``beta``."""
    eta = problem.design @ beta + problem.offset
    return _penalized(problem, beta, eta)


def _penalized(problem, beta, eta):
    obj = neg_log_likelihood(problem.family, eta, problem.response)
    if problem.l1_penalty:
        obj += problem.l1_penalty * float(np.abs(beta).sum())
    if problem.l2_penalty:
        obj += 0.5 * problem.l2_penalty * float(beta @ beta)
    return obj


def _smooth_gradient(problem, beta, eta):
    """Gradient of NLL + ridge (the smooth part) at ``beta``."""
    resid = problem.family.b_prime(eta) - problem.response
    return problem.design.T @ resid + problem.l2_penalty * beta


def lambda_max(problem: GlmProblem) -> float:
    """Smallest l1 weight at which ``beta = 0`` is optimal."""
    if problem.n_features == 0:
        return 0.0
    g = problem.design.T @ (problem.family.b_prime(problem.offset) - problem.response)
    return float(np.abs(g).max())


def _kkt_from_eta(problem, beta, eta):
    if problem.n_features == 0:
        return 0.0
    g = _smooth_gradient(problem, beta, eta)
    l1 = problem.l1_penalty
    nz = beta != 0.0
    v = np.where(nz, np.abs(g + l1 * np.sign(beta)), np.maximum(0.0, np.abs(g) - l1))
    return float(v.max())


def kkt_check(problem: GlmProblem, beta: np.ndarray) -> float:
    """Max subgradient-optimality violation at ``beta`` (0 means optimal)."""
    beta = np.asarray(beta, dtype=np.float64).ravel()
    eta = problem.design @ beta + problem.offset
    return _kkt_from_eta(problem, beta, eta)


def _solve_quadratic(gram, lin, l1, l2, beta, tol, max_sweeps):
    """Minimize the penalized IRLS quadratic, updating ``beta`` in place."""
    if l1 > 0.0:
        cd_quadratic(gram, lin, l1, l2, beta, max_sweeps, tol)
        return beta
    q = gram.shape[0]
    if l2 > 0.0:
        try:
            beta[:] = np.linalg.solve(gram + l2 * np.eye(q), lin)
            return beta
        except np.linalg.LinAlgError:
            pass
    beta[:] = np.linalg.lstsq(gram + l2 * np.eye(q), lin, rcond=None)[0]
    return beta


def fit_glm(
    problem: GlmProblem,
    init: np.ndarray | None = None,
    tol: float = 1e-8,
    max_iter: int = 100,
    cd_max_sweeps: int = 20000,
) -> GlmSolution:
    """Solve the penalized GLM; warm-startable and monotone from ``init``.

    Convergence is declared when the KKT residual (recomputed from the true
    linear predictor) is at most ``tol``.
    """
    X, y, o = problem.design, problem.response, problem.offset
    fam = problem.family
    l1, l2 = problem.l1_penalty, problem.l2_penalty
    n, q = X.shape

    if q == 0:
        obj = neg_log_likelihood(fam, o, y)
        return GlmSolution(np.zeros(0), obj, 0, 0.0, True)

    if init is None:
        beta = np.zeros(q)
    else:
        beta = np.array(init, dtype=np.float64).ravel().copy()
        if beta.shape[0] != q:
            raise ValueError(f"init length {beta.shape[0]} != {q} features")

    # If zero already satisfies the stationarity condition it is the global
    # optimum of this convex problem; skip the solve entirely.
    if l1 > 0.0 and lambda_max(problem) <= l1:
        beta = np.zeros(q)
        return GlmSolution(beta, _penalized(problem, beta, o), 0, 0.0, True)

    gaussian = fam.name == "gaussian"
    gram = lin = None
    if gaussian:
        gram = X.T @ X
        lin = X.T @ (y - o)

    inner_tol = 0.5 * tol
    prev_obj = _penalized(problem, beta, X @ beta + o)
    capped = False
    kkt = np.inf
    it = 0
    for it in range(max_iter + 1):
        eta = X @ beta + o
        kkt = _kkt_from_eta(problem, beta, eta)
        if kkt <= tol or it == max_iter:
            break
        if not gaussian:
            eta_c = np.clip(eta, -_ETA_CAP, _ETA_CAP)
            if np.any(np.abs(eta) > _ETA_CAP):
                capped = True
            w = np.maximum(fam.b_double_prime(eta_c), _WEIGHT_FLOOR)
            z = (eta - o) + (y - fam.b_prime(eta)) / w
            gram = X.T @ (X * w[:, None])
            lin = X.T @ (w * z)
        trial = beta.copy()
        _solve_quadratic(gram, lin, l1, l2, trial, inner_tol, cd_max_sweeps)
        if gaussian:
            beta = trial
            continue
        # Step-halve toward the current iterate until the penalized objective
        # stops increasing (IRLS steps are not guaranteed descent steps).
        new_obj = _penalized(problem, trial, X @ trial + o)
        halvings = 0
        while new_obj > prev_obj + 1e-12 and halvings < _MAX_HALVINGS:
            trial = 0.5 * (trial + beta)
            new_obj = _penalized(problem, trial, X @ trial + o)
            halvings += 1
        if new_obj > prev_obj + 1e-12:
            break  # no usable descent direction; report current iterate
        beta = trial
        prev_obj = new_obj

    eta = X @ beta + o
    kkt = _kkt_from_eta(problem, beta, eta)
    obj = _penalized(problem, beta, eta)
    message = "linear predictor capped at +/-30" if capped else ""
    return GlmSolution(beta, obj, it, kkt, kkt <= tol, message)
