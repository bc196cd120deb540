"""Local model learning: linear dynamics and quadratic cost regression from
exploration rollouts around the nominal trajectory.

All fits are centered on the nominal point of the timestep being modelled,
so the recovered coefficients are directly the local Taylor terms. Because
per-timestep sample counts can be far below the quadratic feature count,
samples from a window of neighboring timesteps can be pooled into each fit.
"""

from dataclasses import dataclass

import numpy as np

from .errors import FitError, RolloutError
from .kernels import quad_features, quad_coeffs_to_hessian
from .rollout import rollout


@dataclass(frozen=True)
class ExplorationConfig:
    N: int = 40
    cov_ini: float = 1.0
    ridge: float = 1e-6
    pooling: int = 2

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("need at least 2 samples")
        if self.cov_ini <= 0 or self.ridge < 0 or self.pooling < 0:
            raise ValueError("cov_ini > 0, ridge >= 0, pooling >= 0 required")


@dataclass(frozen=True)
class SampleSet:
    """N exploration rollouts, stored as stacked arrays.

    states (N, T+1, n), actions (N, T, m), costs (N, T+1) where costs[:, t]
    for t < T is the recorded cost of step t and costs[:, T] the terminal
    cost.
    """

    states: np.ndarray
    actions: np.ndarray
    costs: np.ndarray

    @property
    def N(self):
        return self.states.shape[0]

    @property
    def T(self):
        return self.actions.shape[1]

    def tuples(self, t):
        """(x, u, x_next, cost) arrays for timestep t."""
        return (
            self.states[:, t],
            self.actions[:, t],
            self.states[:, t + 1],
            self.costs[:, t],
        )

    def to_dict(self):
        return {
            "states": self.states.tolist(),
            "actions": self.actions.tolist(),
            "costs": self.costs.tolist(),
        }


@dataclass(frozen=True)
class LinearDynamicsModel:
    """Per-timestep affine dynamics x_next ~= F[t] @ [x; u] + bias[t].

    F (T, n, n+m), bias (T, n); residual_rms[t] is the training RMS error.
    """

    F: np.ndarray
    bias: np.ndarray
    residual_rms: np.ndarray

    @property
    def T(self):
        return self.F.shape[0]

    def predict(self, t, x, u):
        return self.F[t] @ np.concatenate([x, u]) + self.bias[t]

    def to_dict(self):
        return {
            "F": self.F.tolist(),
            "bias": self.bias.tolist(),
            "residual_rms": self.residual_rms.tolist(),
        }


@dataclass(frozen=True)
class QuadraticCostModel:
    """Per-timestep quadratic cost around the nominal, in deviation form:

        l(dz) ~= l0[t] + L_xu[t].dz + 0.5 dz' L_xuxu[t] dz,  dz = [x;u] - [xbar;ubar]

    Entries 0..T-1 are over (x, u); entry T is the terminal model, over x
    only, with all u blocks zero.
    """

    l0: np.ndarray
    L_xu: np.ndarray
    L_xuxu: np.ndarray

    @property
    def T(self):
        return self.l0.shape[0] - 1

    def to_dict(self):
        return {
            "l0": self.l0.tolist(),
            "L_xu": self.L_xu.tolist(),
            "L_xuxu": self.L_xuxu.tolist(),
        }


def collect_samples(env, policy, config, rng):
    """Run N stochastic rollouts and stack them into a SampleSet."""
    T = env.horizon
    states = np.empty((config.N, T + 1, env.n))
    actions = np.empty((config.N, T, env.m))
    costs = np.empty((config.N, T + 1))
    for i in range(config.N):
        try:
            traj = rollout(env, policy, stochastic=True, rng=rng)
        except RolloutError as e:
            e.rollout_index = i
            raise
        states[i], actions[i], costs[i] = traj.states, traj.actions, traj.costs
    return SampleSet(states, actions, costs)


def _ridge_lstsq(Phi, Y, ridge, timestep):
    """Least squares with ridge on every column except the leading intercept.

    Columns are standardized to unit RMS before the penalty is applied, so
    the shrinkage is invariant to the scale of the exploration cloud; the
    returned coefficients are in the original feature units. Solved via row
    augmentation rather than normal equations to keep the exact-recovery
    cases well conditioned.
    """
    rows, cols = Phi.shape
    scale = np.sqrt(np.mean(Phi**2, axis=0))
    scale[scale == 0] = 1.0
    Phi_s = Phi / scale
    if ridge > 0:
        pen = np.sqrt(ridge) * np.eye(cols)[1:]
        A = np.vstack([Phi_s, pen])
        B = np.vstack([Y, np.zeros((cols - 1, Y.shape[1]))])
    else:
        A, B = Phi_s, Y
    beta, _, rank, _ = np.linalg.lstsq(A, B, rcond=None)
    if ridge == 0 and rank < cols:
        raise FitError(
            f"singular regression at t={timestep} (rank {rank} < {cols})",
            timestep=timestep,
        )
    return beta / scale[:, None]


def _pooled_indices(t, T_max, window):
    lo = max(0, t - window)
    hi = min(T_max, t + window)
    return range(lo, hi + 1)


def fit_dynamics(samples, nominal, config):
    """Fit the per-timestep affine dynamics model by ridge regression."""
    N, T = samples.N, samples.T
    n = samples.states.shape[2]
    m = samples.actions.shape[2]
    F = np.empty((T, n, n + m))
    bias = np.empty((T, n))
    rms = np.empty(T)
    for t in range(T):
        center = np.concatenate([nominal.mean_states[t], nominal.mean_actions[t]])
        blocks_z, blocks_y = [], []
        for tp in _pooled_indices(t, T - 1, config.pooling):
            x, u, xn, _ = samples.tuples(tp)
            blocks_z.append(np.hstack([x, u]) - center)
            blocks_y.append(xn - nominal.mean_states[t + 1])
        Z = np.vstack(blocks_z)
        Y = np.vstack(blocks_y)
        if Z.shape[0] < 2:
            raise FitError(f"fewer than 2 samples at t={t}", timestep=t)
        Phi = np.hstack([np.ones((Z.shape[0], 1)), Z])
        beta = _ridge_lstsq(Phi, Y, config.ridge, t)
        Ft = beta[1:].T
        intercept = beta[0]
        F[t] = Ft
        bias[t] = intercept + nominal.mean_states[t + 1] - Ft @ center
        resid = Phi @ beta - Y
        rms[t] = np.sqrt(np.mean(resid**2))
    if not (np.all(np.isfinite(F)) and np.all(np.isfinite(bias))):
        raise FitError("non-finite dynamics coefficients")
    return LinearDynamicsModel(F, bias, rms)


def fit_cost(samples, nominal, config):
    """Fit per-timestep quadratic cost models plus the terminal model."""
    N, T = samples.N, samples.T
    n = samples.states.shape[2]
    m = samples.actions.shape[2]
    p = n + m
    l0 = np.zeros(T + 1)
    L_xu = np.zeros((T + 1, p))
    L_xuxu = np.zeros((T + 1, p, p))
    for t in range(T):
        center = np.concatenate([nominal.mean_states[t], nominal.mean_actions[t]])
        blocks_z, blocks_y = [], []
        for tp in _pooled_indices(t, T - 1, config.pooling):
            x, u, _, c = samples.tuples(tp)
            blocks_z.append(np.hstack([x, u]) - center)
            blocks_y.append(c)
        Z = np.vstack(blocks_z)
        y = np.concatenate(blocks_y)[:, None]
        Phi = quad_features(Z)
        beta = _ridge_lstsq(Phi, y, config.ridge, t)[:, 0]
        c0, g, H = quad_coeffs_to_hessian(beta, p)
        l0[t] = c0
        L_xu[t] = g
        L_xuxu[t] = 0.5 * (H + H.T)
    # Terminal model: cost as a function of the final state only. No
    # cross-time pooling here; earlier recorded costs are step costs and
    # may depend on the action.
    center = nominal.mean_states[T]
    Z = samples.states[:, T] - center
    y = samples.costs[:, T][:, None]
    Phi = quad_features(Z)
    beta = _ridge_lstsq(Phi, y, config.ridge, T)[:, 0]
    c0, g, H = quad_coeffs_to_hessian(beta, n)
    l0[T] = c0
    L_xu[T, :n] = g
    L_xuxu[T, :n, :n] = 0.5 * (H + H.T)
    if not np.all(np.isfinite(L_xuxu)):
        raise FitError("non-finite cost coefficients")
    return QuadraticCostModel(l0, L_xu, L_xuxu)


def save_fit_artifacts(path, samples=None, dynamics=None, cost=None):
    """Dump samples and/or fitted models to a JSON file for inspection."""
    import json

    obj = {}
    if samples is not None:
        obj["samples"] = samples.to_dict()
    if dynamics is not None:
        obj["dynamics"] = dynamics.to_dict()
    if cost is not None:
        obj["cost"] = cost.to_dict()
    with open(path, "w") as fh:
        json.dump(obj, fh)
