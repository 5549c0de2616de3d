"""On-disk formats: dataset trees, model directories, config parsing."""

import json

import numpy as np
import pytest

from tenmtl.dataio import (
    ConfigError,
    DataError,
    arrays_to_state,
    experiment_from_dict,
    fit_settings_from_dict,
    grid_from_dict,
    load_model,
    read_dataset,
    save_model,
    scenario_from_dict,
    state_to_arrays,
    write_dataset,
)
from tenmtl.estimator import TuckerState, VectorState
from tenmtl.simulate import ScenarioConfig, generate
from tenmtl.tuning import ExperimentConfig, FitSettings, Grid


def tree_bytes(root):
    return {
        str(p.relative_to(root)): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


# ---------------------------------------------------------------------------
# dataset tree
# ---------------------------------------------------------------------------

def test_vector_dataset_round_trip(tmp_path):
    cfg = ScenarioConfig(scenario="I", n_tasks=3, n_train=8, n_test=4,
                         dims=(5,), ranks=(2, 3), seed=11)
    data = generate(cfg)
    write_dataset(tmp_path / "d", data)
    train, test, manifest = read_dataset(tmp_path / "d")
    assert manifest["n_tasks"] == 3 and manifest["p"] == 5
    assert manifest["dims"] == [] and manifest["generator"] == cfg.to_dict()
    assert len(train) == 3 and len(test) == 3
    for orig, back in zip(data.train + data.test, train + test):
        np.testing.assert_array_equal(back.y, orig.y)
        np.testing.assert_array_equal(back.z, orig.z)
        assert back.x is None and back.task_id == orig.task_id


def test_tensor_dataset_round_trip(tmp_path):
    cfg = ScenarioConfig(scenario="III", n_tasks=2, n_train=6, n_test=3,
                         dims=(3, 4), ranks=(2, 2, 2), seed=5)
    data = generate(cfg)
    write_dataset(tmp_path / "d", data)
    train, test, manifest = read_dataset(tmp_path / "d")
    assert manifest["p"] == 0 and manifest["dims"] == [3, 4]
    for orig, back in zip(data.train + data.test, train + test):
        np.testing.assert_array_equal(back.y, orig.y)
        np.testing.assert_array_equal(back.x, orig.x)
        assert back.z is None


def test_write_dataset_is_byte_deterministic(tmp_path):
    cfg = ScenarioConfig(scenario="III", n_tasks=2, n_train=5, n_test=2,
                         dims=(3, 2), ranks=(2, 2, 2), seed=3)
    data = generate(cfg)
    write_dataset(tmp_path / "a", data)
    write_dataset(tmp_path / "b", data)
    assert tree_bytes(tmp_path / "a") == tree_bytes(tmp_path / "b")


def test_read_dataset_errors(tmp_path):
    with pytest.raises(DataError, match="manifest"):
        read_dataset(tmp_path / "missing")

    bad = tmp_path / "bad"
    bad.mkdir()
    (bad / "manifest.json").write_text("{not json", encoding="utf-8")
    with pytest.raises(DataError, match="invalid JSON"):
        read_dataset(bad)

    cfg = ScenarioConfig(scenario="I", n_tasks=1, n_train=4, n_test=0,
                         dims=(3,), ranks=(1, 2), seed=0)
    root = tmp_path / "truncated"
    write_dataset(root, generate(cfg))
    (root / "task_0" / "y.csv").write_text("wrong,header\n", encoding="utf-8")
    with pytest.raises(DataError):
        read_dataset(root)


def test_no_test_split_reads_back_empty(tmp_path):
    cfg = ScenarioConfig(scenario="I", n_tasks=2, n_train=4, n_test=0,
                         dims=(3,), ranks=(1, 2), seed=0)
    write_dataset(tmp_path / "d", generate(cfg))
    train, test, _ = read_dataset(tmp_path / "d")
    assert len(train) == 2 and test == []


# ---------------------------------------------------------------------------
# model directories
# ---------------------------------------------------------------------------

def test_tucker_state_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    state = TuckerState(
        g=rng.standard_normal((2, 3)),
        w0=rng.standard_normal((4, 1)),
        f0=rng.standard_normal((4, 1)),
        u=[rng.standard_normal((5, 3))],
        h=rng.standard_normal((3, 2)),
        d0=rng.standard_normal((4, 2)),
        v1=rng.standard_normal((6, 2)),
    )
    save_model(tmp_path / "m", "tenmtl", "gaussian",
               state_to_arrays(state), {"q0": 1})
    method, family, arrays, meta = load_model(tmp_path / "m")
    assert (method, family, meta) == ("tenmtl", "gaussian", {"q0": 1})
    back = arrays_to_state(arrays, "tucker")
    for name in ("g", "w0", "f0", "h", "d0", "v1"):
        np.testing.assert_array_equal(getattr(back, name), getattr(state, name))
    np.testing.assert_array_equal(back.u[0], state.u[0])


def test_vector_state_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    state = VectorState(
        u0=rng.standard_normal((5, 2)),
        g0=rng.standard_normal((2, 3)),
        u1=rng.standard_normal((7, 3)),
    )
    save_model(tmp_path / "m", "tenmtl-vector", "gaussian",
               state_to_arrays(state), {})
    _, _, arrays, _ = load_model(tmp_path / "m")
    back = arrays_to_state(arrays, "vector")
    for name in ("u0", "g0", "u1"):
        np.testing.assert_array_equal(getattr(back, name), getattr(state, name))


def test_load_model_missing(tmp_path):
    with pytest.raises(DataError, match="model.json"):
        load_model(tmp_path / "nope")


# ---------------------------------------------------------------------------
# config documents
# ---------------------------------------------------------------------------

def test_scenario_from_dict():
    cfg = scenario_from_dict({"scenario": "II", "n_tasks": 4, "n_groups": 8})
    assert isinstance(cfg, ScenarioConfig)
    assert cfg.scenario == "II" and cfg.n_groups == 8
    with pytest.raises(ConfigError, match="unknown keys"):
        scenario_from_dict({"scenario": "I", "n_task": 4})
    with pytest.raises(ConfigError):
        scenario_from_dict({"scenario": "IV"})


def test_fit_settings_lambda_fan_out():
    st = fit_settings_from_dict({"lambda": 0.2, "ranks_scalar": [2, 3]})
    assert isinstance(st, FitSettings)
    assert (st.lambda_g, st.lambda_h, st.lambda_u, st.lambda_v) == (0.2,) * 4
    assert st.ranks_scalar == (2, 3)

    st = fit_settings_from_dict({"lambda": 0.2, "lambda_g": 0.7})
    assert st.lambda_g == 0.7  # explicit value wins over the shorthand
    assert st.lambda_h == 0.2

    with pytest.raises(ConfigError, match="unknown keys"):
        fit_settings_from_dict({"lamda": 0.2})


def test_grid_from_dict():
    grid = grid_from_dict({"t0": [1, 2], "t1": [2], "q0": [None, 0],
                           "lambdas": [0.1], "k_folds": 3})
    assert isinstance(grid, Grid)
    assert grid.t0 == (1, 2) and grid.q0 == (None, 0) and grid.lambdas == (0.1,)
    with pytest.raises(ConfigError, match="unknown keys"):
        grid_from_dict({"ranks": [2]})


def test_experiment_from_dict():
    doc = {
        "scenario": {"scenario": "I", "n_tasks": 3, "n_train": 10, "n_test": 5,
                     "dims": [4], "ranks": [2, 2]},
        "methods": ["local", "global"],
        "fit": {"ranks_scalar": [2, 2], "lambda": 0.01},
        "sweep": [{}, {"sigma_e": 1.0}],
        "replications": 2,
        "master_seed": 7,
    }
    cfg = experiment_from_dict(doc)
    assert isinstance(cfg, ExperimentConfig)
    assert cfg.methods == ("local", "global") and cfg.replications == 2
    assert cfg.sweep == ({}, {"sigma_e": 1.0})
    assert cfg.fit.lambda_g == 0.01

    with pytest.raises(ConfigError, match="missing 'scenario'"):
        experiment_from_dict({"methods": ["local"]})
    with pytest.raises(ConfigError, match="sweep"):
        experiment_from_dict({**doc, "sweep": "all"})
    with pytest.raises(ConfigError, match=r"sweep\[0\]"):
        experiment_from_dict({**doc, "sweep": [{"seed": 3}]})
    with pytest.raises(ConfigError, match="unknown keys"):
        experiment_from_dict({**doc, "method": ["local"]})
