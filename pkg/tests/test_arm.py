import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from arm_ilqg.arm import (
    ArmEnvironment,
    ArmModel,
    CostParams,
    EnvConfig,
    arm_model_from_dict,
    default_iiwa14_model,
    fk_position,
    load_arm_model,
    task_cost,
)
from arm_ilqg.errors import ConfigError, DimensionError, RolloutError


def simple_model(J=2, rate=None, lo=-3.0, hi=3.0):
    z = [0.0] * J
    return ArmModel(
        theta=z,
        d=[0.5] * J,
        a=z,
        alpha=z,
        limits_lo=[lo] * J,
        limits_hi=[hi] * J,
        rate_limit=math.inf if rate is None else rate,
    )


COST = CostParams(v=0.1, alpha=1e-7, target=np.zeros(3))


def make_env(model, lag=1.0, horizon=5, target=(0.0, 0.0, 0.0), noise=0.0, rng=None):
    cfg = EnvConfig(
        initial_state=np.zeros(model.joint_count),
        horizon=horizon,
        lag=lag,
        sensor_noise_std=noise,
    )
    cost = CostParams(v=0.1, alpha=1e-7, target=np.asarray(target, float))
    return ArmEnvironment(model, cost, cfg, noise_rng=rng)


def test_task_cost_reference_value():
    # v=0.1, alpha=1e-7, d=0.01 mm: the quadratic term contributes 1e-4 and
    # the log term -0.92093.
    c = task_cost(CostParams(v=0.1, alpha=1e-7, target=np.zeros(3)), 0.01)
    assert abs(c - (-0.92083)) < 1e-5


def test_task_cost_zero_distance_finite():
    c = task_cost(CostParams(v=1.0, alpha=1e-3, target=np.zeros(3)), 0.0)
    assert c == pytest.approx(math.log(1e-3))


@settings(max_examples=100)
@given(
    st.floats(0.0, 10.0),
    st.floats(0.01, 10.0),
    st.floats(1e-7, 1e-3),
    st.floats(0.0, 500.0),
    st.floats(0.1, 500.0),
)
def test_task_cost_monotone_in_distance(v, vscale, alpha, d, step):
    p = CostParams(v=v * vscale, alpha=alpha, target=np.zeros(3))
    assert task_cost(p, d + step) > task_cost(p, d)


def test_cost_params_validation():
    with pytest.raises(ConfigError):
        CostParams(v=-1.0, alpha=1e-7, target=np.zeros(3))
    with pytest.raises(ConfigError):
        CostParams(v=0.1, alpha=0.0, target=np.zeros(3))
    with pytest.raises(ConfigError):
        CostParams(v=0.1, alpha=1e-7, target=np.zeros(2))


def test_model_field_lengths_checked():
    with pytest.raises(ConfigError, match="entries"):
        ArmModel(
            theta=[0.0, 0.0],
            d=[0.0],
            a=[0.0, 0.0],
            alpha=[0.0, 0.0],
            limits_lo=[-1.0, -1.0],
            limits_hi=[1.0, 1.0],
            rate_limit=1.0,
        )


def test_model_limit_order_checked():
    with pytest.raises(ConfigError, match="lo < hi"):
        simple_model(lo=1.0, hi=-1.0)


def test_model_unknown_keys_rejected():
    obj = {"name": "x", "rate_limit": 1.0, "joints": [], "extra": 1}
    with pytest.raises(ConfigError, match="unknown arm model keys"):
        arm_model_from_dict(obj)
    obj = {
        "rate_limit": 1.0,
        "joints": [{"theta": 0, "d": 0, "a": 0, "alpha": 0, "min": -1, "max": 1, "x": 0}],
    }
    with pytest.raises(ConfigError, match="unknown joint keys"):
        arm_model_from_dict(obj)


def test_model_null_rate_limit_means_unbounded(tmp_path):
    obj = {
        "rate_limit": None,
        "joints": [{"theta": 0, "d": 0.1, "a": 0, "alpha": 0, "min": -1, "max": 1}],
    }
    path = tmp_path / "m.json"
    path.write_text(json.dumps(obj))
    model = load_arm_model(path)
    assert model.rate_limit == math.inf


def test_default_iiwa14_model():
    model = default_iiwa14_model()
    assert model.joint_count == 7
    assert model.rate_limit == math.inf
    # Straight-up pose: all link offsets stack along z.
    pos, clamped = fk_position(model, np.zeros(7))
    assert not clamped
    np.testing.assert_allclose(pos, [0.0, 0.0, float(np.sum(model.d))], atol=1e-12)
    assert model.reach == pytest.approx(float(np.sum(np.abs(model.d))))


def test_fk_clamps_out_of_limit_joints():
    model = simple_model(J=2, lo=-1.0, hi=1.0)
    pos_in, clamped_in = fk_position(model, np.array([0.5, -0.5]))
    assert not clamped_in
    pos_out, clamped_out = fk_position(model, np.array([2.0, -0.5]))
    assert clamped_out
    pos_ref, _ = fk_position(model, np.array([1.0, -0.5]))
    np.testing.assert_allclose(pos_out, pos_ref)
    with pytest.raises(DimensionError):
        fk_position(model, np.zeros(3))


def test_step_passthrough_when_unconstrained():
    # lag 1, no rate limit, action within joint limits: the state lands
    # exactly on the commanded angles.
    env = make_env(simple_model(J=2), lag=1.0)
    obs = env.step(np.zeros(2), np.array([0.3, -0.7]))
    np.testing.assert_allclose(obs.state, [0.3, -0.7])


def test_step_rate_limit_clamps_lagged_displacement():
    # lag 0.5 of a 0.4 rad command is 0.2, clamped to the 0.1 rate limit:
    # rate limiting happens after the lag scaling.
    env = make_env(simple_model(J=1, rate=0.1), lag=0.5)
    obs = env.step(np.zeros(1), np.array([0.4]))
    np.testing.assert_allclose(obs.state, [0.1])


def test_step_joint_limits_applied_last():
    env = make_env(simple_model(J=1, lo=-0.25, hi=0.25), lag=1.0)
    obs = env.step(np.zeros(1), np.array([2.0]))
    np.testing.assert_allclose(obs.state, [0.25])


def test_step_rejects_nonfinite_action():
    env = make_env(simple_model(J=1))
    with pytest.raises(RolloutError):
        env.step(np.zeros(1), np.array([np.nan]))
    with pytest.raises(DimensionError):
        env.step(np.zeros(1), np.zeros(2))


def test_observation_distance_is_millimeters():
    model = simple_model(J=1)  # end effector at [0, 0, 0.5] m
    env = make_env(model, target=(0.0, 0.0, 400.0))
    obs = env.terminal_cost(np.zeros(1))
    assert obs.distance == pytest.approx(100.0)  # 500 mm fk vs 400 mm target
    assert obs.cost == pytest.approx(task_cost(env.cost_params, 100.0))


def test_sensor_noise_requires_rng_and_is_reproducible():
    model = simple_model(J=1)
    with pytest.raises(ConfigError):
        make_env(model, noise=0.001)
    a = make_env(model, noise=0.001, rng=np.random.default_rng(5)).terminal_cost(
        np.zeros(1)
    )
    b = make_env(model, noise=0.001, rng=np.random.default_rng(5)).terminal_cost(
        np.zeros(1)
    )
    clean = make_env(model).terminal_cost(np.zeros(1))
    assert a.distance == b.distance
    assert a.distance != clean.distance


def test_env_config_validation():
    with pytest.raises(ConfigError):
        EnvConfig(initial_state=np.zeros(2), horizon=0)
    with pytest.raises(ConfigError):
        EnvConfig(initial_state=np.zeros(2), horizon=5, lag=0.0)
    with pytest.raises(ConfigError):
        EnvConfig(initial_state=np.zeros(2), horizon=5, lag=1.2)
    with pytest.raises(ConfigError):
        ArmEnvironment(simple_model(J=2), COST, EnvConfig(np.zeros(3), 5))
