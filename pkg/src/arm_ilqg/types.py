"""Core data model: trajectories and time-varying linear-Gaussian policies."""

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, NotPositiveDefiniteError

PD_EIG_TOL = 1e-12
SYM_TOL = 1e-10


def _freeze(arr):
    arr = np.ascontiguousarray(np.asarray(arr, dtype=float))
    arr.flags.writeable = False
    return arr


def check_spd(sigma, tol=PD_EIG_TOL):
    """Raise unless sigma is symmetric positive definite."""
    if np.max(np.abs(sigma - sigma.T)) >= SYM_TOL:
        raise NotPositiveDefiniteError("covariance is not symmetric")
    eigs = np.linalg.eigvalsh(0.5 * (sigma + sigma.T))
    scale = eigs.max()
    if scale <= 0.0 or eigs.min() <= tol * scale:
        raise NotPositiveDefiniteError(
            f"covariance not positive definite (min eigenvalue {eigs.min():.3e})"
        )


@dataclass(frozen=True)
class LinearGaussianPolicy:
    """u_t ~ N(K_t x + k_t, Sigma_t), one parameter set per timestep.

    Shapes: K (T, m, n), k (T, m), sigma (T, m, m).
    """

    K: np.ndarray
    k: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "K", _freeze(self.K))
        object.__setattr__(self, "k", _freeze(self.k))
        object.__setattr__(self, "sigma", _freeze(self.sigma))
        T, m, n = self.K.shape
        if self.k.shape != (T, m) or self.sigma.shape != (T, m, m):
            raise DimensionError(
                f"inconsistent policy shapes: K {self.K.shape}, "
                f"k {self.k.shape}, sigma {self.sigma.shape}"
            )
        for t in range(T):
            try:
                check_spd(self.sigma[t])
            except NotPositiveDefiniteError as e:
                raise NotPositiveDefiniteError(f"sigma[{t}]: {e}") from e

    @property
    def T(self):
        return self.K.shape[0]

    @property
    def m(self):
        return self.K.shape[1]

    @property
    def n(self):
        return self.K.shape[2]

    @staticmethod
    def constant_command(T, n, command, cov_diag):
        """Zero-gain policy holding a fixed mean command with isotropic noise."""
        command = np.asarray(command, dtype=float)
        m = command.shape[0]
        K = np.zeros((T, m, n))
        k = np.tile(command, (T, 1))
        sigma = np.tile(cov_diag * np.eye(m), (T, 1, 1))
        return LinearGaussianPolicy(K, k, sigma)


@dataclass(frozen=True)
class Trajectory:
    """States (T+1, n), actions (T, m) and costs (T+1,).

    costs[t] for t < T is the cost of the step taken from states[t] with
    actions[t]; the final entry is the terminal cost of states[T].
    distances mirrors costs for environments that expose a scalar task
    distance (NaN where not meaningful).
    """

    states: np.ndarray
    actions: np.ndarray
    costs: np.ndarray
    distances: np.ndarray = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "states", _freeze(self.states))
        object.__setattr__(self, "actions", _freeze(self.actions))
        object.__setattr__(self, "costs", _freeze(self.costs))
        if self.distances is None:
            object.__setattr__(
                self, "distances", _freeze(np.full(self.costs.shape, np.nan))
            )
        else:
            object.__setattr__(self, "distances", _freeze(self.distances))
        if self.states.shape[0] != self.actions.shape[0] + 1:
            raise DimensionError(
                f"{self.states.shape[0]} states vs {self.actions.shape[0]} actions"
            )
        if self.costs.shape != (self.states.shape[0],):
            raise DimensionError("costs must have one entry per state")
        if not np.all(np.isfinite(self.costs)):
            raise DimensionError("non-finite cost entries")

    @property
    def T(self):
        return self.actions.shape[0]


@dataclass(frozen=True)
class NominalTrajectory:
    """Mean states/actions from a deterministic rollout of the policy mean."""

    mean_states: np.ndarray
    mean_actions: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean_states", _freeze(self.mean_states))
        object.__setattr__(self, "mean_actions", _freeze(self.mean_actions))
        if self.mean_states.shape[0] != self.mean_actions.shape[0] + 1:
            raise DimensionError("mean_states must have T+1 rows for T actions")

    @property
    def T(self):
        return self.mean_actions.shape[0]

    @staticmethod
    def of(traj):
        return NominalTrajectory(traj.states, traj.actions)
