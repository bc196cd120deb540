"""Policy evaluation and environment rollouts.

Environments are duck-typed: they expose n, m, horizon, initial_state(),
step(state, action) and terminal_cost(state). step/terminal_cost return an
observation with .state, .distance and .cost fields (see arm.Observation);
a step's cost is the cost of the state-action pair just taken.
"""

import numpy as np

from .errors import DimensionError, NotPositiveDefiniteError, RolloutError
from .types import Trajectory


def policy_mean_action(policy, t, x):
    """Mean action K_t x + k_t."""
    if not 0 <= t < policy.T:
        raise DimensionError(f"timestep {t} outside horizon {policy.T}")
    x = np.asarray(x, dtype=float)
    if x.shape != (policy.n,):
        raise DimensionError(f"state has shape {x.shape}, expected ({policy.n},)")
    return policy.K[t] @ x + policy.k[t]


def covariance_factor(sigma, jitter=1e-12):
    """Cholesky factor of sigma, retrying once with diagonal jitter.

    The exploration covariance Q_uu^-1 can be numerically semidefinite late
    in convergence; the jitter keeps sampling alive there.
    """
    try:
        return np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        try:
            return np.linalg.cholesky(sigma + jitter * np.eye(sigma.shape[0]))
        except np.linalg.LinAlgError as e:
            raise NotPositiveDefiniteError(
                "covariance not factorizable even with jitter"
            ) from e


def sample_action(policy, t, x, rng):
    """Draw u ~ N(K_t x + k_t, Sigma_t); deterministic given the rng state."""
    mean = policy_mean_action(policy, t, x)
    L = covariance_factor(policy.sigma[t])
    return mean + L @ rng.standard_normal(policy.m)


def rollout(env, policy, stochastic=False, rng=None):
    """Run the policy against the environment for its full horizon.

    Deterministic (mean actions) unless stochastic, in which case actions
    are sampled from the policy and rng must be provided.
    """
    T = env.horizon
    if policy.T != T:
        raise DimensionError(f"policy horizon {policy.T} != env horizon {T}")
    states = np.empty((T + 1, env.n))
    actions = np.empty((T, env.m))
    costs = np.empty(T + 1)
    dists = np.empty(T + 1)
    x = np.asarray(env.initial_state(), dtype=float)
    states[0] = x
    for t in range(T):
        if stochastic:
            u = sample_action(policy, t, x, rng)
        else:
            u = policy_mean_action(policy, t, x)
        obs = env.step(x, u)
        if not np.all(np.isfinite(obs.state)):
            raise RolloutError(f"non-finite state at t={t}", timestep=t)
        actions[t] = u
        states[t + 1], costs[t], dists[t] = obs.state, obs.cost, obs.distance
        x = obs.state
    final = env.terminal_cost(x)
    costs[T], dists[T] = final.cost, final.distance
    return Trajectory(states, actions, costs, dists)


def trajectory_total_cost(traj):
    """Sum of the T per-step costs and the terminal cost."""
    return float(np.sum(traj.costs))
