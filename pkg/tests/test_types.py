import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from arm_ilqg.errors import DimensionError, NotPositiveDefiniteError
from arm_ilqg.types import (
    LinearGaussianPolicy,
    NominalTrajectory,
    Trajectory,
    check_spd,
)


def random_spd(rng, m, scale=1.0):
    M = rng.standard_normal((m, m))
    return scale * (M @ M.T + m * np.eye(m))


def test_check_spd_accepts_identity():
    check_spd(np.eye(3))


def test_check_spd_rejects_asymmetric():
    with pytest.raises(NotPositiveDefiniteError, match="not symmetric"):
        check_spd(np.array([[1.0, 0.5], [0.1, 1.0]]))


def test_check_spd_rejects_indefinite():
    with pytest.raises(NotPositiveDefiniteError):
        check_spd(np.diag([1.0, -0.1]))


def test_check_spd_tolerance_is_relative():
    # Annealed exploration covariances get very small in absolute terms;
    # a well-conditioned matrix must pass no matter its overall scale.
    for scale in (1.0, 1e-10, 1e-14, 1e-20):
        check_spd(scale * np.diag([1.0, 2.0, 0.5]))


def test_check_spd_rejects_zero():
    with pytest.raises(NotPositiveDefiniteError):
        check_spd(np.zeros((2, 2)))


@settings(max_examples=100)
@given(st.integers(1, 4), st.integers(0, 10_000), st.floats(1e-12, 1e6))
def test_check_spd_random_spd_passes(m, seed, scale):
    rng = np.random.default_rng(seed)
    check_spd(random_spd(rng, m, scale))


@settings(max_examples=100)
@given(st.integers(2, 4), st.integers(0, 10_000))
def test_check_spd_rank_deficient_fails(m, seed):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((m, 1))
    with pytest.raises(NotPositiveDefiniteError):
        check_spd(v @ v.T)  # rank one, m >= 2


def test_policy_shapes_validated():
    K = np.zeros((5, 2, 3))
    k = np.zeros((5, 2))
    sigma = np.tile(np.eye(2), (5, 1, 1))
    pol = LinearGaussianPolicy(K, k, sigma)
    assert (pol.T, pol.m, pol.n) == (5, 2, 3)
    with pytest.raises(DimensionError):
        LinearGaussianPolicy(K, np.zeros((4, 2)), sigma)
    with pytest.raises(NotPositiveDefiniteError, match=r"sigma\[2\]"):
        bad = sigma.copy()
        bad[2] = np.diag([1.0, -1.0])
        LinearGaussianPolicy(K, k, bad)


def test_policy_arrays_frozen():
    pol = LinearGaussianPolicy.constant_command(3, 2, np.ones(2), 0.5)
    with pytest.raises(ValueError):
        pol.k[0, 0] = 2.0


def test_constant_command():
    cmd = np.array([0.1, -0.2, 0.3])
    pol = LinearGaussianPolicy.constant_command(4, 3, cmd, 2.0)
    assert pol.K.shape == (4, 3, 3)
    assert np.all(pol.K == 0.0)
    np.testing.assert_array_equal(pol.k, np.tile(cmd, (4, 1)))
    np.testing.assert_array_equal(pol.sigma[2], 2.0 * np.eye(3))


def test_trajectory_validation():
    states = np.zeros((4, 2))
    actions = np.zeros((3, 2))
    costs = np.zeros(4)
    traj = Trajectory(states, actions, costs)
    assert traj.T == 3
    assert np.all(np.isnan(traj.distances))
    with pytest.raises(DimensionError):
        Trajectory(states, np.zeros((4, 2)), costs)
    with pytest.raises(DimensionError):
        Trajectory(states, actions, np.zeros(3))
    bad = costs.copy()
    bad[1] = np.inf
    with pytest.raises(DimensionError):
        Trajectory(states, actions, bad)


def test_nominal_of_trajectory():
    states = np.arange(8.0).reshape(4, 2)
    actions = np.arange(6.0).reshape(3, 2)
    traj = Trajectory(states, actions, np.zeros(4))
    nom = NominalTrajectory.of(traj)
    np.testing.assert_array_equal(nom.mean_states, states)
    np.testing.assert_array_equal(nom.mean_actions, actions)
    assert nom.T == 3
