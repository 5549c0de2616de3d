"""Personalized multi-task GLM with partially shared Tucker structure.

Each task ``i`` carries scalar predictors ``z`` (length ``p``) and/or tensor
predictors ``X`` (shape ``I_1 x ... x I_m``).  The stacked tensor coefficients
``B~`` (shape ``N x I_1 x ... x I_m``) and scalar coefficients ``Gamma``
(``N x p``) are constrained to Tucker form

    B~    = G x_0 U_0 x_1 U_1 ... x_m U_m        U_0 = [W_0 | F_0]   (N x R_0)
    Gamma = V_0 H V_1'                           V_0 = [W_0 | D_0]   (N x T_0)

where the first ``q_0`` task-factor columns ``W_0`` are shared between the two
sides.  The penalized objective

    sum_ij NLL(y_ij; eta_ij) + lg ||G||_1 + lh ||H||_1 + lu sum_d ||U_d||_1 + lv ||V_1||_1

is minimized by block coordinate descent in the order
W_0 rows, F_0 rows, U_1..U_m, G, D_0 rows, V_1, H; every block update is an
exact penalized GLM in disguise (built here as designs/offsets), solved with
warm starts, so the objective never increases.

Conventions: ``vec`` is column-major everywhere; see :mod:`tenmtl.tensor_ops`
for the matricization convention that makes the identities below exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .families import Family, get_family
from .glm import GlmProblem, fit_glm, neg_log_likelihood
from .tensor_ops import fold, hosvd, matricize, mode_product, tucker_reconstruct

__all__ = [
    "TaskDataset",
    "HyperParams",
    "TuckerState",
    "VectorState",
    "FitTrace",
    "PersonalizedModel",
    "objective",
    "initialize",
    "update_w0_row",
    "update_f0_row",
    "update_ud",
    "update_core_g",
    "update_d0_row",
    "update_v1",
    "update_core_h",
    "fit",
    "fit_vector",
    "reconstruct_models",
    "predict",
    "implied_covariance",
]

# Solver settings for the inner block GLMs.  Warm starts plus monotone inner
# solvers make each block update non-increasing regardless of these.
_GLM_TOL = 1e-7
_GLM_MAX_ITER = 50
_INIT_RIDGE = 1e-6


# ---------------------------------------------------------------------------
# data containers
# ---------------------------------------------------------------------------

@dataclass
class TaskDataset:
    """One task's responses plus scalar (``z``) and/or tensor (``x``) predictors.

    ``z`` is ``n x p`` (or None), ``x`` stacks the per-sample tensors into one
    ``(n, I_1, ..., I_m)`` array (or None).  At least one side must be present.
    """

    task_id: int | str
    y: np.ndarray
    z: np.ndarray | None = None
    x: np.ndarray | None = None

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=np.float64).ravel()
        n = self.y.shape[0]
        if n == 0:
            raise ValueError(f"task {self.task_id}: empty response")
        if self.z is not None:
            self.z = np.ascontiguousarray(self.z, dtype=np.float64)
            if self.z.ndim != 2 or self.z.shape[0] != n:
                raise ValueError(
                    f"task {self.task_id}: z must be (n, p), got {self.z.shape}"
                )
            if self.z.shape[1] == 0:
                self.z = None
        if self.x is not None:
            self.x = np.ascontiguousarray(self.x, dtype=np.float64)
            if self.x.ndim < 2 or self.x.shape[0] != n:
                raise ValueError(
                    f"task {self.task_id}: x must stack samples first, got {self.x.shape}"
                )
        if self.z is None and self.x is None:
            raise ValueError(f"task {self.task_id}: no predictors")
        for name, arr in (("y", self.y), ("z", self.z), ("x", self.x)):
            if arr is not None and not np.all(np.isfinite(arr)):
                raise ValueError(f"task {self.task_id}: non-finite values in {name}")

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def p(self) -> int:
        return 0 if self.z is None else self.z.shape[1]

    @property
    def dims(self) -> tuple[int, ...]:
        return () if self.x is None else self.x.shape[1:]


def _check_tasks(tasks: list[TaskDataset]) -> tuple[int, tuple[int, ...]]:
    """Validate cross-task consistency; return ``(p, dims)``."""
    if not tasks:
        raise ValueError("no tasks given")
    p, dims = tasks[0].p, tasks[0].dims
    for t in tasks[1:]:
        if t.p != p or t.dims != dims:
            raise ValueError(
                f"task {t.task_id}: predictors (p={t.p}, dims={t.dims}) differ "
                f"from task {tasks[0].task_id} (p={p}, dims={dims})"
            )
    return p, dims


@dataclass
class HyperParams:
    """Ranks, penalties, and stopping rule for :func:`fit`.

    ``ranks_tensor`` is ``(R_0, R_1, ..., R_m)`` (empty = no tensor side);
    ``ranks_scalar`` is ``(T_0, T_1)`` (empty = no scalar side).  ``q0`` is the
    number of shared task-factor columns; None means
    ``max(min(R_0, T_0) - 1, 0)`` when both sides are present, else 0.
    ``seed`` is recorded for provenance; fitting itself is deterministic.
    """

    ranks_tensor: tuple[int, ...] = ()
    ranks_scalar: tuple[int, ...] = ()
    q0: int | None = None
    lambda_g: float = 0.0
    lambda_h: float = 0.0
    lambda_u: float = 0.0
    lambda_v: float = 0.0
    epsilon: float = 1e-5
    max_iter: int = 50
    family: str | Family = "gaussian"
    seed: int = 0

    def __post_init__(self):
        self.ranks_tensor = tuple(int(r) for r in self.ranks_tensor)
        self.ranks_scalar = tuple(int(r) for r in self.ranks_scalar)
        self.family = get_family(self.family)
        for name in ("lambda_g", "lambda_h", "lambda_u", "lambda_v"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.max_iter < 0:
            raise ValueError("max_iter must be nonnegative")

    def resolved_q0(self) -> int:
        if not (self.ranks_tensor and self.ranks_scalar):
            return 0
        if self.q0 is None:
            return max(min(self.ranks_tensor[0], self.ranks_scalar[0]) - 1, 0)
        return int(self.q0)

    def validate(self, tasks: list[TaskDataset]) -> None:
        p, dims = _check_tasks(tasks)
        n_tasks = len(tasks)
        if bool(dims) != bool(self.ranks_tensor):
            raise ValueError(
                f"ranks_tensor={self.ranks_tensor} inconsistent with tensor "
                f"predictors of shape {dims}"
            )
        if (p > 0) != bool(self.ranks_scalar):
            raise ValueError(
                f"ranks_scalar={self.ranks_scalar} inconsistent with p={p}"
            )
        if self.ranks_tensor:
            if len(self.ranks_tensor) != len(dims) + 1:
                raise ValueError(
                    f"ranks_tensor needs {len(dims) + 1} entries for dims {dims}"
                )
            limits = (n_tasks,) + dims
            for r, lim in zip(self.ranks_tensor, limits):
                if not 1 <= r <= lim:
                    raise ValueError(
                        f"ranks_tensor {self.ranks_tensor} out of range for "
                        f"(N, dims) = {limits}"
                    )
        if self.ranks_scalar:
            if len(self.ranks_scalar) != 2:
                raise ValueError("ranks_scalar must be (T_0, T_1)")
            for r, lim in zip(self.ranks_scalar, (n_tasks, p)):
                if not 1 <= r <= lim:
                    raise ValueError(
                        f"ranks_scalar {self.ranks_scalar} out of range for "
                        f"(N, p) = {(n_tasks, p)}"
                    )
        q0 = self.resolved_q0() if self.q0 is None else int(self.q0)
        cap = min(
            self.ranks_tensor[0] if self.ranks_tensor else 0,
            self.ranks_scalar[0] if self.ranks_scalar else 0,
        )
        if not 0 <= q0 <= cap:
            raise ValueError(f"q0={q0} must lie in [0, {cap}]")


@dataclass
class TuckerState:
    """All factor blocks; ``None``/empty blocks mark an absent side.

    ``w0`` (``N x q0``) holds the shared task-factor columns; ``u0``/``v0``
    assemble the full task factors ``[w0 | f0]`` and ``[w0 | d0]``.
    """

    g: np.ndarray | None  # tensor core (R_0, R_1, ..., R_m)
    w0: np.ndarray  # (N, q0) shared task-factor columns
    f0: np.ndarray  # (N, R_0 - q0)
    u: list[np.ndarray]  # feature factors, u[d-1] is (I_d, R_d)
    h: np.ndarray | None  # scalar core (T_0, T_1)
    d0: np.ndarray  # (N, T_0 - q0)
    v1: np.ndarray | None  # (p, T_1)

    @property
    def n_tasks(self) -> int:
        return self.w0.shape[0]

    @property
    def q0(self) -> int:
        return self.w0.shape[1]

    @property
    def has_tensor(self) -> bool:
        return self.g is not None

    @property
    def has_scalar(self) -> bool:
        return self.h is not None

    @property
    def u0(self) -> np.ndarray:
        return np.hstack([self.w0, self.f0])

    @property
    def v0(self) -> np.ndarray:
        return np.hstack([self.w0, self.d0])

    def copy(self) -> "TuckerState":
        return TuckerState(
            g=None if self.g is None else self.g.copy(),
            w0=self.w0.copy(),
            f0=self.f0.copy(),
            u=[m.copy() for m in self.u],
            h=None if self.h is None else self.h.copy(),
            d0=self.d0.copy(),
            v1=None if self.v1 is None else self.v1.copy(),
        )


@dataclass
class VectorState:
    """Vector-predictor special case: ``beta_i' = u0_i G0 U1'``."""

    u0: np.ndarray  # (N, R_0)
    g0: np.ndarray  # (R_0, R_1)
    u1: np.ndarray  # (p, R_1)

    def coefficient_matrix(self) -> np.ndarray:
        """Stacked per-task coefficient rows (N x p)."""
        return self.u0 @ self.g0 @ self.u1.T


@dataclass
class FitTrace:
    objectives: list[float]
    iterations: int
    converged: bool
    final_rel_change: float


@dataclass
class PersonalizedModel:
    """One task's dense coefficients: tensor ``b`` and/or scalar ``gamma``."""

    task_id: int | str
    b: np.ndarray | None = None
    gamma: np.ndarray | None = None


# ---------------------------------------------------------------------------
# projections shared by the block updates
#
# With K_0 = U_m kron ... kron U_1 the linear predictor is
#   eta_ij = u0_i (G_(0) K_0' vec(X_ij))  +  v0_i (H V_1' z_ij)
#          = u0_i o_ij                    +  v0_i k_ij
# so each task needs only the n x R_0 matrix O (rows o_ij') and the n x T_0
# matrix KZ (rows k_ij').
# ---------------------------------------------------------------------------

def _tensor_projection(state: TuckerState, task: TaskDataset) -> np.ndarray | None:
    if not state.has_tensor:
        return None
    proj = task.x
    for d, u_d in enumerate(state.u, start=1):
        proj = mode_product(proj, u_d.T, d)
    m_rows = proj.reshape(task.n, -1, order="F")  # rows vec(X_ij x_d U_d')
    return m_rows @ matricize(state.g, 0).T


def _scalar_projection(state: TuckerState, task: TaskDataset) -> np.ndarray | None:
    if not state.has_scalar:
        return None
    return (task.z @ state.v1) @ state.h.T


def _predictor(state, i, o_rows, kz_rows):
    eta = 0.0
    if o_rows is not None:
        eta = eta + o_rows @ state.u0[i]
    if kz_rows is not None:
        eta = eta + kz_rows @ state.v0[i]
    return np.zeros(0) if isinstance(eta, float) else eta


def objective(state: TuckerState, tasks: list[TaskDataset], hp: HyperParams) -> float:
    """Penalized objective: total NLL plus l1 penalties on G, H, U_d, V_1."""
    total = 0.0
    for i, task in enumerate(tasks):
        eta = _predictor(
            state, i, _tensor_projection(state, task), _scalar_projection(state, task)
        )
        total += neg_log_likelihood(hp.family, eta, task.y)
    if state.has_tensor:
        total += hp.lambda_g * float(np.abs(state.g).sum())
        total += hp.lambda_u * sum(float(np.abs(u_d).sum()) for u_d in state.u)
    if state.has_scalar:
        total += hp.lambda_h * float(np.abs(state.h).sum())
        total += hp.lambda_v * float(np.abs(state.v1).sum())
    return total


# ---------------------------------------------------------------------------
# initialization: ridge-stabilized local fits, stacked, truncated by HOSVD
# ---------------------------------------------------------------------------

def _local_design(task: TaskDataset) -> np.ndarray:
    """Per-task design ``[z | vec(x)]`` with column-major tensor flattening."""
    parts = []
    if task.z is not None:
        parts.append(task.z)
    if task.x is not None:
        parts.append(task.x.reshape(task.n, -1, order="F"))
    return np.hstack(parts)


def _local_fits(tasks, family, ridge=_INIT_RIDGE):
    """Independent penalized-least-squares/IRLS fit per task.

    Returns ``(gamma_hat, b_hat)``: an ``N x p`` matrix (or None) and an
    ``(N, I_1, ..., I_m)`` stack (or None).
    """
    p, dims = _check_tasks(tasks)
    gammas = [] if p else None
    bs = [] if dims else None
    for task in tasks:
        problem = GlmProblem(
            design=_local_design(task),
            response=task.y,
            l2_penalty=ridge,
            family=family,
        )
        coef = fit_glm(problem, tol=_GLM_TOL, max_iter=_GLM_MAX_ITER).coefficients
        if p:
            gammas.append(coef[:p])
        if dims:
            bs.append(coef[p:].reshape(dims, order="F"))
    gamma_hat = np.array(gammas) if p else None
    b_hat = np.array(bs) if dims else None
    return gamma_hat, b_hat


def initialize(tasks: list[TaskDataset], hp: HyperParams) -> TuckerState:
    """HOSVD of stacked local fits, truncated at the requested ranks.

    The shared block ``w0`` starts from the scalar-side task factor's leading
    ``q0`` columns; ``f0``/``d0`` take the remaining tensor-/scalar-side
    columns.
    """
    hp.validate(tasks)
    n_tasks = len(tasks)
    q0 = hp.resolved_q0()
    gamma_hat, b_hat = _local_fits(tasks, hp.family)

    g = None
    u: list[np.ndarray] = []
    u0_init = np.zeros((n_tasks, 0))
    if hp.ranks_tensor:
        tk = hosvd(b_hat, list(hp.ranks_tensor))
        g = tk.core
        u0_init = tk.factors[0]
        u = tk.factors[1:]

    h = None
    v1 = None
    v0_init = np.zeros((n_tasks, 0))
    if hp.ranks_scalar:
        tk = hosvd(gamma_hat, list(hp.ranks_scalar))
        h = tk.core
        v0_init = tk.factors[0]
        v1 = tk.factors[1]

    w0 = v0_init[:, :q0].copy() if q0 else np.zeros((n_tasks, 0))
    f0 = u0_init[:, q0:].copy()
    d0 = v0_init[:, q0:].copy()
    return TuckerState(g=g, w0=w0, f0=f0, u=u, h=h, d0=d0, v1=v1)


# ---------------------------------------------------------------------------
# block updates (each is a penalized GLM with an explicit design and offset)
# ---------------------------------------------------------------------------

def _row_glm(design, offset, task, hp, init):
    problem = GlmProblem(
        design=design, response=task.y, offset=offset, family=hp.family
    )
    return fit_glm(problem, init=init, tol=_GLM_TOL, max_iter=_GLM_MAX_ITER).coefficients


def update_w0_row(
    i: int, state: TuckerState, task: TaskDataset, hp: HyperParams
) -> np.ndarray:
    """Shared task-factor row: design ``k^(1) + o^(1)``, offset from f0/d0 parts."""
    q0 = state.q0
    o_rows = _tensor_projection(state, task)
    kz_rows = _scalar_projection(state, task)
    design = np.zeros((task.n, q0))
    offset = np.zeros(task.n)
    if o_rows is not None:
        design = design + o_rows[:, :q0]
        offset = offset + o_rows[:, q0:] @ state.f0[i]
    if kz_rows is not None:
        design = design + kz_rows[:, :q0]
        offset = offset + kz_rows[:, q0:] @ state.d0[i]
    state.w0[i] = _row_glm(design, offset, task, hp, init=state.w0[i])
    return state.w0[i]


def update_f0_row(
    i: int, state: TuckerState, task: TaskDataset, hp: HyperParams
) -> np.ndarray:
    """Tensor-only task-factor row: design ``o^(2)``, offset from w0/d0 parts."""
    q0 = state.q0
    o_rows = _tensor_projection(state, task)
    kz_rows = _scalar_projection(state, task)
    offset = o_rows[:, :q0] @ state.w0[i]
    if kz_rows is not None:
        offset = offset + kz_rows @ state.v0[i]
    state.f0[i] = _row_glm(o_rows[:, q0:], offset, task, hp, init=state.f0[i])
    return state.f0[i]


def update_d0_row(
    i: int, state: TuckerState, task: TaskDataset, hp: HyperParams
) -> np.ndarray:
    """Scalar-only task-factor row: design ``k^(2)``, offset from w0/f0 parts."""
    q0 = state.q0
    o_rows = _tensor_projection(state, task)
    kz_rows = _scalar_projection(state, task)
    offset = kz_rows[:, :q0] @ state.w0[i]
    if o_rows is not None:
        offset = offset + o_rows @ state.u0[i]
    state.d0[i] = _row_glm(kz_rows[:, q0:], offset, task, hp, init=state.d0[i])
    return state.d0[i]


def _stacked_lasso(designs, offsets, tasks, hp, l1, init):
    problem = GlmProblem(
        design=np.vstack(designs),
        response=np.concatenate([t.y for t in tasks]),
        offset=np.concatenate(offsets),
        l1_penalty=l1,
        family=hp.family,
    )
    return fit_glm(problem, init=init, tol=_GLM_TOL, max_iter=_GLM_MAX_ITER).coefficients


def update_ud(
    d: int, state: TuckerState, tasks: list[TaskDataset], hp: HyperParams
) -> np.ndarray:
    """Feature factor ``U_d`` (``d`` in 1..m), lasso on ``vec(U_d)``.

    Per sample the design row is ``vec(C_ij(d) ghat_i(d)')`` where
    ``C_ij = X_ij x_{k != d} U_k'`` and ``ghat_i = G x_0 u0_i``.
    """
    u0 = state.u0
    i_d, r_d = state.u[d - 1].shape
    designs, offsets = [], []
    for i, task in enumerate(tasks):
        proj = task.x
        for k, u_k in enumerate(state.u, start=1):
            if k != d:
                proj = mode_product(proj, u_k.T, k)
        # per-sample mode-d unfolding, remaining feature modes column-major
        unfolded = np.moveaxis(proj, d, 1).reshape(task.n, i_d, -1, order="F")
        ghat = np.tensordot(u0[i], state.g, axes=(0, 0))
        ghat_d = matricize(ghat, d - 1)
        rows = np.einsum("njk,rk->njr", unfolded, ghat_d)
        designs.append(rows.reshape(task.n, i_d * r_d, order="F"))
        kz_rows = _scalar_projection(state, task)
        offsets.append(
            kz_rows @ state.v0[i] if kz_rows is not None else np.zeros(task.n)
        )
    coef = _stacked_lasso(
        designs, offsets, tasks, hp, hp.lambda_u, init=state.u[d - 1].ravel(order="F")
    )
    state.u[d - 1] = coef.reshape(i_d, r_d, order="F")
    return state.u[d - 1]


def update_core_g(
    state: TuckerState, tasks: list[TaskDataset], hp: HyperParams
) -> np.ndarray:
    """Tensor core ``G``, lasso on ``vec(G_(0))``: design ``m_ij kron u0_i``."""
    u0 = state.u0
    r0 = state.g.shape[0]
    designs, offsets = [], []
    for i, task in enumerate(tasks):
        proj = task.x
        for k, u_k in enumerate(state.u, start=1):
            proj = mode_product(proj, u_k.T, k)
        m_rows = proj.reshape(task.n, -1, order="F")
        rows = np.einsum("nk,r->nrk", m_rows, u0[i])
        designs.append(rows.reshape(task.n, -1, order="F"))
        kz_rows = _scalar_projection(state, task)
        offsets.append(
            kz_rows @ state.v0[i] if kz_rows is not None else np.zeros(task.n)
        )
    g0 = matricize(state.g, 0)
    coef = _stacked_lasso(
        designs, offsets, tasks, hp, hp.lambda_g, init=g0.ravel(order="F")
    )
    state.g = fold(coef.reshape(g0.shape, order="F"), 0, state.g.shape)
    return state.g


def update_v1(
    state: TuckerState, tasks: list[TaskDataset], hp: HyperParams
) -> np.ndarray:
    """Scalar feature factor ``V_1``, lasso on ``vec(V_1')``: design ``z kron kappa_i``."""
    p, t1 = state.v1.shape
    designs, offsets = [], []
    for i, task in enumerate(tasks):
        kappa = state.v0[i] @ state.h  # (T_1,)
        rows = np.einsum("np,t->npt", task.z, kappa)
        designs.append(rows.reshape(task.n, p * t1))
        o_rows = _tensor_projection(state, task)
        offsets.append(
            o_rows @ state.u0[i] if o_rows is not None else np.zeros(task.n)
        )
    coef = _stacked_lasso(
        designs, offsets, tasks, hp, hp.lambda_v, init=state.v1.ravel()
    )
    state.v1 = coef.reshape(p, t1)
    return state.v1


def update_core_h(
    state: TuckerState, tasks: list[TaskDataset], hp: HyperParams
) -> np.ndarray:
    """Scalar core ``H``, lasso on ``vec(H)``: design ``(V_1' z) kron v0_i``."""
    t0, t1 = state.h.shape
    designs, offsets = [], []
    for i, task in enumerate(tasks):
        b_rows = task.z @ state.v1  # (n, T_1)
        rows = np.einsum("nt,s->nts", b_rows, state.v0[i])
        designs.append(rows.reshape(task.n, t1 * t0))
        o_rows = _tensor_projection(state, task)
        offsets.append(
            o_rows @ state.u0[i] if o_rows is not None else np.zeros(task.n)
        )
    coef = _stacked_lasso(
        designs, offsets, tasks, hp, hp.lambda_h, init=state.h.ravel(order="F")
    )
    state.h = coef.reshape(t0, t1, order="F")
    return state.h


# ---------------------------------------------------------------------------
# main fitting loops
# ---------------------------------------------------------------------------

def fit(tasks: list[TaskDataset], hp: HyperParams) -> tuple[TuckerState, FitTrace]:
    """Block coordinate descent from the HOSVD initialization.

    Stops when ``|l_t - l_{t-1}| / max(|l_{t-1}|, 1e-12) < epsilon`` or after
    ``max_iter`` sweeps; the returned trace records every objective value.
    """
    state = initialize(tasks, hp)
    objs = [objective(state, tasks, hp)]
    converged = False
    rel = np.inf
    iterations = 0
    for iterations in range(1, hp.max_iter + 1):
        if state.q0 > 0:
            for i, task in enumerate(tasks):
                update_w0_row(i, state, task, hp)
        if state.has_tensor:
            if state.f0.shape[1] > 0:
                for i, task in enumerate(tasks):
                    update_f0_row(i, state, task, hp)
            for d in range(1, len(state.u) + 1):
                update_ud(d, state, tasks, hp)
            update_core_g(state, tasks, hp)
        if state.has_scalar:
            if state.d0.shape[1] > 0:
                for i, task in enumerate(tasks):
                    update_d0_row(i, state, task, hp)
            update_v1(state, tasks, hp)
            update_core_h(state, tasks, hp)
        objs.append(objective(state, tasks, hp))
        rel = abs(objs[-1] - objs[-2]) / max(abs(objs[-2]), 1e-12)
        if rel < hp.epsilon:
            converged = True
            break
    else:
        iterations = hp.max_iter
    return state, FitTrace(objs, iterations, converged, float(rel))


def fit_vector(
    tasks: list[TaskDataset],
    r0: int,
    r1: int,
    lambda_g: float = 0.0,
    lambda_u: float = 0.0,
    family: str | Family = "gaussian",
    epsilon: float = 1e-5,
    max_iter: int = 50,
) -> tuple[VectorState, FitTrace]:
    """Vector-predictor special case: ``beta_i' = u0_i G0 U1'`` on ``z`` only.

    Alternates unpenalized task rows ``u0_i``, lasso on ``U_1`` (``lambda_u``),
    and lasso on ``G0`` (``lambda_g``), with the same stopping rule as
    :func:`fit`.
    """
    fam = get_family(family)
    p, dims = _check_tasks(tasks)
    if dims or p == 0:
        raise ValueError("fit_vector requires vector-only tasks (z set, x absent)")
    n_tasks = len(tasks)
    if not (1 <= r0 <= n_tasks and 1 <= r1 <= p):
        raise ValueError(f"ranks ({r0}, {r1}) out of range for (N, p) = {(n_tasks, p)}")

    gamma_hat, _ = _local_fits(tasks, fam)
    tk = hosvd(gamma_hat, [r0, r1])
    state = VectorState(u0=tk.factors[0], g0=tk.core, u1=tk.factors[1])

    def vec_objective():
        total = 0.0
        mat = state.g0 @ state.u1.T  # (R_0, p)
        for i, task in enumerate(tasks):
            eta = task.z @ (state.u0[i] @ mat)
            total += neg_log_likelihood(fam, eta, task.y)
        total += lambda_g * float(np.abs(state.g0).sum())
        total += lambda_u * float(np.abs(state.u1).sum())
        return total

    objs = [vec_objective()]
    converged = False
    rel = np.inf
    iterations = 0
    for iterations in range(1, max_iter + 1):
        proj = state.g0 @ state.u1.T  # rows of k_ij = G0 U1' z_ij
        for i, task in enumerate(tasks):
            problem = GlmProblem(
                design=task.z @ proj.T, response=task.y, family=fam
            )
            state.u0[i] = fit_glm(
                problem, init=state.u0[i], tol=_GLM_TOL, max_iter=_GLM_MAX_ITER
            ).coefficients
        designs = []
        for i, task in enumerate(tasks):
            t_i = state.u0[i] @ state.g0  # (R_1,)
            designs.append(
                np.einsum("nj,b->njb", task.z, t_i).reshape(task.n, p * r1)
            )
        coef = _stacked_lasso(
            designs,
            [np.zeros(t.n) for t in tasks],
            tasks,
            HyperParams(family=fam),
            lambda_u,
            init=state.u1.ravel(),
        )
        state.u1 = coef.reshape(p, r1)
        designs = []
        for i, task in enumerate(tasks):
            m_rows = task.z @ state.u1  # (n, R_1)
            designs.append(
                np.einsum("nb,r->nrb", m_rows, state.u0[i]).reshape(
                    task.n, r0 * r1, order="F"
                )
            )
        coef = _stacked_lasso(
            designs,
            [np.zeros(t.n) for t in tasks],
            tasks,
            HyperParams(family=fam),
            lambda_g,
            init=state.g0.ravel(order="F"),
        )
        state.g0 = coef.reshape(r0, r1, order="F")
        objs.append(vec_objective())
        rel = abs(objs[-1] - objs[-2]) / max(abs(objs[-2]), 1e-12)
        if rel < epsilon:
            converged = True
            break
    return state, FitTrace(objs, iterations, converged, float(rel))


# ---------------------------------------------------------------------------
# model extraction and prediction
# ---------------------------------------------------------------------------

def reconstruct_models(
    state: TuckerState | VectorState, task_ids: list | None = None
) -> list[PersonalizedModel]:
    """Expand a fitted state into per-task dense coefficients."""
    if isinstance(state, VectorState):
        gamma = state.coefficient_matrix()
        n_tasks = gamma.shape[0]
        ids = task_ids if task_ids is not None else list(range(n_tasks))
        return [PersonalizedModel(ids[i], gamma=gamma[i]) for i in range(n_tasks)]
    n_tasks = state.n_tasks
    ids = task_ids if task_ids is not None else list(range(n_tasks))
    b_stack = None
    if state.has_tensor:
        b_stack = tucker_reconstruct(state.g, [state.u0] + state.u)
    gamma = state.v0 @ state.h @ state.v1.T if state.has_scalar else None
    return [
        PersonalizedModel(
            ids[i],
            b=b_stack[i] if b_stack is not None else None,
            gamma=gamma[i] if gamma is not None else None,
        )
        for i in range(n_tasks)
    ]


def predict(
    model: PersonalizedModel,
    z: np.ndarray | None = None,
    x: np.ndarray | None = None,
    family: str | Family = "gaussian",
) -> np.ndarray:
    """Mean response for new samples (``z``: ``n x p``; ``x``: ``(n, dims)``)."""
    fam = get_family(family)
    eta = None
    if model.gamma is not None:
        if z is None:
            raise ValueError("model has scalar coefficients but no z given")
        eta = np.asarray(z, dtype=np.float64) @ model.gamma
    if model.b is not None:
        if x is None:
            raise ValueError("model has tensor coefficients but no x given")
        x = np.asarray(x, dtype=np.float64)
        contrib = np.tensordot(x, model.b, axes=model.b.ndim)
        eta = contrib if eta is None else eta + contrib
    if eta is None:
        raise ValueError("model has no coefficients")
    return fam.b_prime(eta)


def implied_covariance(
    state: TuckerState | VectorState,
) -> tuple[np.ndarray, int]:
    """Feature-space coefficient covariance for single-mode states.

    With ``L = G_(0) U_1'`` and task loadings treated as standard normal rows,
    ``Cov(beta_i) = L' L`` (``p x p``); returns it with its numerical rank
    (singular values above ``1e-10`` of the largest), which never exceeds
    ``min(R_0, R_1, p)``.
    """
    if isinstance(state, VectorState):
        ell = state.g0 @ state.u1.T
    else:
        if not state.has_tensor or len(state.u) != 1:
            raise ValueError("implied_covariance needs a single feature mode")
        ell = matricize(state.g, 0) @ state.u[0].T
    p = ell.shape[1]
    cov = ell.T @ ell
    if ell.size == 0:
        return np.zeros((p, p)), 0
    svals = np.linalg.svd(ell, compute_uv=False)
    if svals.size == 0 or svals[0] == 0.0:
        return cov, 0
    return cov, int(np.sum(svals > 1e-10 * svals[0]))
