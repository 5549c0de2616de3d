"""Personalized Tucker estimator: identities, argmin blocks, monotone descent."""

import numpy as np
import pytest

from tenmtl.estimator import (
    FitTrace,
    HyperParams,
    PersonalizedModel,
    TaskDataset,
    TuckerState,
    VectorState,
    fit,
    fit_vector,
    implied_covariance,
    initialize,
    objective,
    predict,
    reconstruct_models,
    update_core_g,
    update_core_h,
    update_d0_row,
    update_f0_row,
    update_ud,
    update_v1,
    update_w0_row,
)
from tenmtl.glm import neg_log_likelihood
from tenmtl.tensor_ops import kronecker, matricize


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def random_state(rng, n_tasks, dims, p, ranks_tensor, ranks_scalar, q0):
    r0 = ranks_tensor[0] if ranks_tensor else 0
    t0 = ranks_scalar[0] if ranks_scalar else 0
    return TuckerState(
        g=rng.standard_normal(ranks_tensor) if ranks_tensor else None,
        w0=rng.standard_normal((n_tasks, q0)),
        f0=rng.standard_normal((n_tasks, r0 - q0)) if ranks_tensor else np.zeros((n_tasks, 0)),
        u=[rng.standard_normal((d, r)) for d, r in zip(dims, ranks_tensor[1:])],
        h=rng.standard_normal(ranks_scalar) if ranks_scalar else None,
        d0=rng.standard_normal((n_tasks, t0 - q0)) if ranks_scalar else np.zeros((n_tasks, 0)),
        v1=rng.standard_normal((p, ranks_scalar[1])) if ranks_scalar else None,
    )


def make_tasks(rng, n_tasks=4, n=25, p=0, dims=(), noise=0.1, family="gaussian"):
    tasks = []
    for i in range(n_tasks):
        z = rng.standard_normal((n, p)) if p else None
        x = rng.standard_normal((n,) + dims) if dims else None
        eta = rng.standard_normal(n)  # placeholder; y redrawn below
        if family == "gaussian":
            y = eta + noise * rng.standard_normal(n)
        else:
            y = (rng.random(n) < 0.5).astype(float)
        tasks.append(TaskDataset(i, y, z=z, x=x))
    return tasks


def coefficients_from_state(state: TuckerState):
    """Per-task (B_i, gamma_i) via the stacked matricization identity."""
    n_tasks = state.n_tasks
    bs, gammas = [None] * n_tasks, [None] * n_tasks
    if state.has_tensor:
        right = np.eye(1)
        for u_d in state.u:
            right = kronecker(u_d, right)
        stack = state.u0 @ matricize(state.g, 0) @ right.T  # (N, prod dims)
        dims = tuple(u_d.shape[0] for u_d in state.u)
        bs = [stack[i].reshape(dims, order="F") for i in range(n_tasks)]
    if state.has_scalar:
        gstack = state.v0 @ state.h @ state.v1.T  # (N, p)
        gammas = [gstack[i] for i in range(n_tasks)]
    return bs, gammas


BLOCKS = ("w0", "f0", "u", "g", "d0", "v1", "h")


def run_one_sweep(state, tasks, hp, record=None):
    """One BCD sweep in fit()'s block order, optionally recording objectives."""

    def note(name):
        if record is not None:
            record.append((name, objective(state, tasks, hp)))

    if state.q0 > 0:
        for i, task in enumerate(tasks):
            update_w0_row(i, state, task, hp)
        note("w0")
    if state.has_tensor:
        if state.f0.shape[1] > 0:
            for i, task in enumerate(tasks):
                update_f0_row(i, state, task, hp)
            note("f0")
        for d in range(1, len(state.u) + 1):
            update_ud(d, state, tasks, hp)
            note(f"u{d}")
        update_core_g(state, tasks, hp)
        note("g")
    if state.has_scalar:
        if state.d0.shape[1] > 0:
            for i, task in enumerate(tasks):
                update_d0_row(i, state, task, hp)
            note("d0")
        update_v1(state, tasks, hp)
        note("v1")
        update_core_h(state, tasks, hp)
        note("h")


# ---------------------------------------------------------------------------
# prediction and reconstruction identities
# ---------------------------------------------------------------------------

def test_predict_matches_brute_force():
    rng = np.random.default_rng(0)
    b = rng.standard_normal((3, 4))
    gamma = rng.standard_normal(2)
    model = PersonalizedModel("t", b=b, gamma=gamma)
    z = rng.standard_normal((7, 2))
    x = rng.standard_normal((7, 3, 4))
    expected = np.array(
        [float(z[j] @ gamma) + float(np.sum(x[j] * b)) for j in range(7)]
    )
    np.testing.assert_allclose(predict(model, z, x), expected, atol=1e-12)


def test_reconstruct_matches_matricized_identity():
    rng = np.random.default_rng(1)
    state = random_state(rng, n_tasks=4, dims=(3, 4), p=5,
                         ranks_tensor=(3, 2, 2), ranks_scalar=(2, 3), q0=1)
    models = reconstruct_models(state)
    bs, gammas = coefficients_from_state(state)
    for i, m in enumerate(models):
        np.testing.assert_allclose(m.b, bs[i], atol=1e-12)
        np.testing.assert_allclose(m.gamma, gammas[i], atol=1e-12)


def test_objective_matches_manual_computation():
    rng = np.random.default_rng(2)
    tasks = make_tasks(rng, n_tasks=3, p=5, dims=(3, 4))
    hp = HyperParams(ranks_tensor=(2, 2, 2), ranks_scalar=(2, 3), q0=1,
                     lambda_g=0.3, lambda_h=0.2, lambda_u=0.1, lambda_v=0.4)
    state = random_state(rng, 3, (3, 4), 5, (2, 2, 2), (2, 3), 1)
    bs, gammas = coefficients_from_state(state)
    manual = 0.0
    for i, task in enumerate(tasks):
        eta = task.z @ gammas[i] + np.array(
            [float(np.sum(task.x[j] * bs[i])) for j in range(task.n)]
        )
        manual += neg_log_likelihood("gaussian", eta, task.y)
    manual += 0.3 * np.abs(state.g).sum() + 0.2 * np.abs(state.h).sum()
    manual += 0.1 * sum(np.abs(u).sum() for u in state.u)
    manual += 0.4 * np.abs(state.v1).sum()
    assert objective(state, tasks, hp) == pytest.approx(manual, rel=1e-10)


# ---------------------------------------------------------------------------
# initialization
# ---------------------------------------------------------------------------

def test_initialize_shapes_and_orthonormal_factors():
    rng = np.random.default_rng(3)
    tasks = make_tasks(rng, n_tasks=5, p=4, dims=(3, 4))
    hp = HyperParams(ranks_tensor=(3, 2, 2), ranks_scalar=(2, 3), q0=1)
    state = initialize(tasks, hp)
    assert state.g.shape == (3, 2, 2)
    assert state.w0.shape == (5, 1)
    assert state.f0.shape == (5, 2)
    assert state.d0.shape == (5, 1)
    assert state.h.shape == (2, 3)
    assert state.v1.shape == (4, 3)
    for u_d, dim, r in zip(state.u, (3, 4), (2, 2)):
        assert u_d.shape == (dim, r)
        np.testing.assert_allclose(u_d.T @ u_d, np.eye(r), atol=1e-10)


def test_initialize_single_side_q0_is_zero():
    rng = np.random.default_rng(4)
    tasks = make_tasks(rng, n_tasks=4, p=6)
    hp = HyperParams(ranks_scalar=(2, 3))
    assert hp.resolved_q0() == 0
    state = initialize(tasks, hp)
    assert state.q0 == 0
    assert not state.has_tensor
    assert state.d0.shape == (4, 2)


def test_default_q0_both_sides():
    hp = HyperParams(ranks_tensor=(3, 2), ranks_scalar=(2, 3))
    assert hp.resolved_q0() == 1
    hp0 = HyperParams(ranks_tensor=(1, 2), ranks_scalar=(1, 3))
    assert hp0.resolved_q0() == 0


# ---------------------------------------------------------------------------
# block updates: argmin property, idempotence, monotonicity
# ---------------------------------------------------------------------------

def test_updates_are_block_argmins():
    rng = np.random.default_rng(5)
    tasks = make_tasks(rng, n_tasks=3, n=30, p=4, dims=(3, 3))
    hp = HyperParams(ranks_tensor=(2, 2, 2), ranks_scalar=(2, 2), q0=1,
                     lambda_g=0.05, lambda_h=0.05, lambda_u=0.05, lambda_v=0.05)
    state = initialize(tasks, hp)

    def perturbed(block, setter):
        base = objective(state, tasks, hp)
        for _ in range(8):
            trial = state.copy()
            setter(trial, 0.05 * rng.standard_normal(block.shape))
            assert objective(trial, tasks, hp) >= base - 1e-9

    update_core_g(state, tasks, hp)
    perturbed(state.g, lambda s, d: setattr(s, "g", s.g + d))
    update_ud(1, state, tasks, hp)
    perturbed(state.u[0], lambda s, d: s.u.__setitem__(0, s.u[0] + d))
    update_v1(state, tasks, hp)
    perturbed(state.v1, lambda s, d: setattr(s, "v1", s.v1 + d))
    update_core_h(state, tasks, hp)
    perturbed(state.h, lambda s, d: setattr(s, "h", s.h + d))
    for i, task in enumerate(tasks):
        update_w0_row(i, state, task, hp)
    perturbed(state.w0, lambda s, d: setattr(s, "w0", s.w0 + d))


def test_updates_idempotent():
    rng = np.random.default_rng(6)
    tasks = make_tasks(rng, n_tasks=3, n=30, p=4, dims=(4,))
    hp = HyperParams(ranks_tensor=(2, 2), ranks_scalar=(2, 2), q0=1,
                     lambda_g=0.1, lambda_h=0.1, lambda_u=0.1, lambda_v=0.1)
    state = initialize(tasks, hp)
    run_one_sweep(state, tasks, hp)

    before = objective(state, tasks, hp)
    update_core_g(state, tasks, hp)
    g_once = state.g.copy()
    update_core_g(state, tasks, hp)
    np.testing.assert_allclose(state.g, g_once, atol=1e-8)
    update_v1(state, tasks, hp)
    v_once = state.v1.copy()
    update_v1(state, tasks, hp)
    np.testing.assert_allclose(state.v1, v_once, atol=1e-8)
    assert objective(state, tasks, hp) <= before + 1e-9


@pytest.mark.parametrize("seed", range(6))
def test_every_block_update_is_monotone(seed):
    rng = np.random.default_rng(100 + seed)
    p = int(rng.integers(3, 6))
    dims = (int(rng.integers(3, 5)),) if seed % 2 == 0 else (3, 3)
    tasks = make_tasks(rng, n_tasks=int(rng.integers(2, 5)), n=25, p=p, dims=dims)
    ranks_tensor = (2,) + (2,) * len(dims)
    hp = HyperParams(ranks_tensor=ranks_tensor, ranks_scalar=(2, 2), q0=1,
                     lambda_g=0.05, lambda_h=0.05, lambda_u=0.05, lambda_v=0.05)
    state = initialize(tasks, hp)
    prev = objective(state, tasks, hp)
    for _ in range(3):
        record = []
        run_one_sweep(state, tasks, hp, record=record)
        for name, val in record:
            assert val <= prev + 1e-9, f"block {name} increased {prev} -> {val}"
            prev = val


# ---------------------------------------------------------------------------
# full fits
# ---------------------------------------------------------------------------

def test_fit_trace_monotone_and_consistent():
    rng = np.random.default_rng(7)
    tasks = make_tasks(rng, n_tasks=4, n=30, p=4, dims=(3, 4))
    hp = HyperParams(ranks_tensor=(2, 2, 2), ranks_scalar=(2, 2), q0=1,
                     lambda_g=0.02, lambda_h=0.02, lambda_u=0.02, lambda_v=0.02)
    state, trace = fit(tasks, hp)
    objs = np.array(trace.objectives)
    assert np.all(np.diff(objs) <= 1e-9)
    assert trace.iterations <= hp.max_iter
    assert trace.objectives[-1] == pytest.approx(objective(state, tasks, hp), rel=1e-12)
    if trace.converged:
        assert trace.final_rel_change < hp.epsilon


def test_fit_w0_shared_block_bit_identical():
    rng = np.random.default_rng(8)
    tasks = make_tasks(rng, n_tasks=4, n=25, p=4, dims=(4,))
    hp = HyperParams(ranks_tensor=(2, 2), ranks_scalar=(2, 2), q0=1, max_iter=5)
    state, _ = fit(tasks, hp)
    assert state.u0[:, :1].tobytes() == state.w0.tobytes()
    assert state.v0[:, :1].tobytes() == state.w0.tobytes()


def test_single_task_full_rank_matches_least_squares():
    rng = np.random.default_rng(9)
    n, p = 40, 5
    z = rng.standard_normal((n, p))
    beta = rng.standard_normal(p)
    y = z @ beta + 0.05 * rng.standard_normal(n)
    task = TaskDataset(0, y, z=z)
    hp = HyperParams(ranks_scalar=(1, p), epsilon=1e-10)
    state, _ = fit([task], hp)
    model = reconstruct_models(state)[0]
    ols = np.linalg.lstsq(z, y, rcond=None)[0]
    np.testing.assert_allclose(predict(model, z), z @ ols, atol=1e-5)


def test_full_rank_unpenalized_matches_local_fits():
    rng = np.random.default_rng(10)
    n_tasks, n, p = 3, 30, 4
    tasks = []
    for i in range(n_tasks):
        z = rng.standard_normal((n, p))
        y = z @ rng.standard_normal(p) + 0.1 * rng.standard_normal(n)
        tasks.append(TaskDataset(i, y, z=z))
    hp = HyperParams(ranks_scalar=(n_tasks, p), epsilon=1e-10)
    state, _ = fit(tasks, hp)
    models = reconstruct_models(state)
    for task, model in zip(tasks, models):
        ols = np.linalg.lstsq(task.z, task.y, rcond=None)[0]
        np.testing.assert_allclose(predict(model, task.z), task.z @ ols, atol=1e-5)


def test_fit_bernoulli_runs_and_predicts_probabilities():
    rng = np.random.default_rng(11)
    tasks = []
    for i in range(3):
        z = rng.standard_normal((40, 4))
        prob = 1.0 / (1.0 + np.exp(-z @ rng.standard_normal(4)))
        tasks.append(TaskDataset(i, (rng.random(40) < prob).astype(float), z=z))
    hp = HyperParams(ranks_scalar=(2, 3), lambda_h=0.05, lambda_v=0.05,
                     family="bernoulli", max_iter=20)
    state, trace = fit(tasks, hp)
    assert np.all(np.diff(trace.objectives) <= 1e-9)
    preds = predict(reconstruct_models(state)[0], tasks[0].z, family="bernoulli")
    assert np.all((preds > 0) & (preds < 1))


def test_fit_max_iter_zero_returns_initialization():
    rng = np.random.default_rng(12)
    tasks = make_tasks(rng, n_tasks=3, p=4)
    hp = HyperParams(ranks_scalar=(2, 2), max_iter=0)
    state, trace = fit(tasks, hp)
    assert trace.iterations == 0 and not trace.converged
    init = initialize(tasks, hp)
    np.testing.assert_array_equal(state.h, init.h)


# ---------------------------------------------------------------------------
# vector special case
# ---------------------------------------------------------------------------

def test_fit_vector_recovers_noiseless_low_rank():
    rng = np.random.default_rng(13)
    n_tasks, n, p, r0, r1 = 6, 30, 8, 2, 3
    u0 = rng.standard_normal((n_tasks, r0))
    g0 = rng.standard_normal((r0, r1))
    u1 = rng.standard_normal((p, r1))
    stack = u0 @ g0 @ u1.T
    tasks = []
    for i in range(n_tasks):
        z = rng.standard_normal((n, p))
        tasks.append(TaskDataset(i, z @ stack[i], z=z))
    state, trace = fit_vector(tasks, r0=r0, r1=r1, epsilon=1e-12, max_iter=100)
    models = reconstruct_models(state)
    # exact recovery up to the ridge-stabilized initialization (1e-6 bias)
    for task, model in zip(tasks, models):
        assert float(np.sqrt(np.mean((predict(model, task.z) - task.y) ** 2))) <= 1e-6
    assert np.all(np.diff(trace.objectives) <= 1e-9)


def test_fit_vector_coefficient_identity():
    rng = np.random.default_rng(14)
    state = VectorState(
        u0=rng.standard_normal((4, 2)),
        g0=rng.standard_normal((2, 3)),
        u1=rng.standard_normal((5, 3)),
    )
    models = reconstruct_models(state, task_ids=list("abcd"))
    stack = state.coefficient_matrix()
    for i, m in enumerate(models):
        np.testing.assert_allclose(m.gamma, stack[i], atol=1e-12)
        assert m.b is None
    assert [m.task_id for m in models] == list("abcd")


def test_fit_vector_rejects_tensor_tasks():
    rng = np.random.default_rng(15)
    tasks = make_tasks(rng, n_tasks=3, dims=(3, 3))
    with pytest.raises(ValueError):
        fit_vector(tasks, r0=2, r1=2)


# ---------------------------------------------------------------------------
# implied covariance
# ---------------------------------------------------------------------------

def test_implied_covariance_rank_bound_random_states():
    rng = np.random.default_rng(16)
    for _ in range(10):
        p = int(rng.integers(2, 8))
        r0 = int(rng.integers(1, 4))
        r1 = int(rng.integers(1, 4))
        state = VectorState(
            u0=rng.standard_normal((5, r0)),
            g0=rng.standard_normal((r0, r1)),
            u1=rng.standard_normal((p, r1)),
        )
        cov, rank = implied_covariance(state)
        assert cov.shape == (p, p)
        np.testing.assert_allclose(cov, cov.T, atol=1e-12)
        assert np.min(np.linalg.eigvalsh(cov)) >= -1e-10
        assert rank <= min(r0, r1, p)


def test_implied_covariance_rank_one_exact():
    rng = np.random.default_rng(17)
    state = VectorState(
        u0=rng.standard_normal((4, 1)),
        g0=rng.standard_normal((1, 3)),
        u1=rng.standard_normal((6, 3)),
    )
    cov, rank = implied_covariance(state)
    assert rank == 1
    svals = np.linalg.svd(cov, compute_uv=False)
    assert svals[1] <= 1e-12 * svals[0]


def test_implied_covariance_rank_zero_exact():
    state = VectorState(
        u0=np.zeros((4, 0)), g0=np.zeros((0, 3)), u1=np.zeros((6, 3))
    )
    cov, rank = implied_covariance(state)
    assert rank == 0
    np.testing.assert_array_equal(cov, np.zeros((6, 6)))


def test_implied_covariance_tensor_state_single_mode():
    rng = np.random.default_rng(18)
    state = random_state(rng, n_tasks=4, dims=(6,), p=0,
                         ranks_tensor=(2, 3), ranks_scalar=(), q0=0)
    cov, rank = implied_covariance(state)
    ell = matricize(state.g, 0) @ state.u[0].T
    np.testing.assert_allclose(cov, ell.T @ ell, atol=1e-12)
    assert rank <= 2
    two_mode = random_state(rng, 4, (3, 3), 0, (2, 2, 2), (), 0)
    with pytest.raises(ValueError):
        implied_covariance(two_mode)


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

def test_task_validation():
    with pytest.raises(ValueError):
        TaskDataset(0, np.array([1.0, np.nan]), z=np.zeros((2, 2)))
    with pytest.raises(ValueError):
        TaskDataset(0, np.zeros(3))
    with pytest.raises(ValueError):
        TaskDataset(0, np.zeros(3), z=np.zeros((2, 2)))


def test_hyperparams_validation():
    rng = np.random.default_rng(19)
    tasks = make_tasks(rng, n_tasks=3, p=4)
    with pytest.raises(ValueError):
        HyperParams(ranks_scalar=(2, 2), lambda_g=-1.0)
    with pytest.raises(ValueError):
        fit(tasks, HyperParams(ranks_tensor=(2, 2), ranks_scalar=(2, 2)))
    with pytest.raises(ValueError):
        fit(tasks, HyperParams(ranks_scalar=(2, 9)))  # T_1 > p
    with pytest.raises(ValueError):
        fit(tasks, HyperParams(ranks_scalar=(2, 2), q0=1))  # q0 > cap
    mixed = make_tasks(rng, n_tasks=2, p=3) + make_tasks(rng, n_tasks=1, p=4)
    with pytest.raises(ValueError):
        fit(mixed, HyperParams(ranks_scalar=(2, 2)))
