"""Simulated 7-DOF arm: DH forward kinematics, position-command transition
dynamics and the distance-based task cost.

The learner treats this module as a black box through reset/step; the
kinematic parameters live only on the simulator side.
"""

import json
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import ConfigError, DimensionError, RolloutError
from .kernels import fk_position_chain


@dataclass(frozen=True)
class ArmModel:
    """Serial kinematic chain in standard DH convention plus actuation limits.

    Per-joint arrays: theta (fixed angle offsets, rad), d (link offsets, m),
    a (link lengths, m), alpha (twists, rad). limits_lo/hi bound the joint
    angles; rate_limit bounds the per-step joint change (rad), with None or
    inf meaning unbounded.
    """

    theta: np.ndarray
    d: np.ndarray
    a: np.ndarray
    alpha: np.ndarray
    limits_lo: np.ndarray
    limits_hi: np.ndarray
    rate_limit: float = math.inf
    name: str = "arm"

    def __post_init__(self):
        for f in ("theta", "d", "a", "alpha", "limits_lo", "limits_hi"):
            object.__setattr__(self, f, np.asarray(getattr(self, f), dtype=float))
        if self.rate_limit is None:
            object.__setattr__(self, "rate_limit", math.inf)
        if self.rate_limit <= 0:
            raise ConfigError("rate_limit must be positive (or None for unbounded)")
        J = self.theta.shape[0]
        for f in ("d", "a", "alpha", "limits_lo", "limits_hi"):
            if getattr(self, f).shape != (J,):
                raise ConfigError(f"DH field {f} must have {J} entries")
        if np.any(self.limits_hi <= self.limits_lo):
            raise ConfigError("joint limits must satisfy lo < hi")

    @property
    def joint_count(self):
        return self.theta.shape[0]

    @property
    def reach(self):
        """Upper bound on the end-effector distance from the base."""
        return float(np.sum(np.abs(self.d)) + np.sum(np.abs(self.a)))


_MODEL_KEYS = {"name", "joints", "rate_limit"}
_JOINT_KEYS = {"theta", "d", "a", "alpha", "min", "max"}


def arm_model_from_dict(obj):
    unknown = set(obj) - _MODEL_KEYS
    if unknown:
        raise ConfigError(f"unknown arm model keys: {sorted(unknown)}")
    joints = obj["joints"]
    for j in joints:
        bad = set(j) - _JOINT_KEYS
        if bad:
            raise ConfigError(f"unknown joint keys: {sorted(bad)}")
    get = lambda key: [float(j[key]) for j in joints]
    return ArmModel(
        theta=get("theta"),
        d=get("d"),
        a=get("a"),
        alpha=get("alpha"),
        limits_lo=get("min"),
        limits_hi=get("max"),
        rate_limit=math.inf if obj["rate_limit"] is None else float(obj["rate_limit"]),
        name=str(obj.get("name", "arm")),
    )


def load_arm_model(path):
    """Load an ArmModel from its JSON file (schema: docs in README)."""
    with open(path) as fh:
        return arm_model_from_dict(json.load(fh))


def default_iiwa14_model():
    """The KUKA LBR iiwa 14 R820 chain shipped with the package."""
    ref = resources.files("arm_ilqg.data").joinpath("iiwa14.json")
    return arm_model_from_dict(json.loads(ref.read_text()))


def fk_position(model, q):
    """End-effector Cartesian position for joint angles q.

    Joints outside their limits are clamped before evaluation; the second
    return value flags whether any clamping happened.
    """
    q = np.asarray(q, dtype=float)
    if q.shape != (model.joint_count,):
        raise DimensionError(f"q has shape {q.shape}, expected ({model.joint_count},)")
    qc = np.clip(q, model.limits_lo, model.limits_hi)
    clamped = bool(np.any(qc != q))
    pos = fk_position_chain(model.theta, model.d, model.a, model.alpha, qc)
    return pos, clamped


@dataclass(frozen=True)
class CostParams:
    """Parameters of the task cost d^2 + v*log(d^2 + alpha).

    The distance d and the Cartesian target are in millimeters, so the
    quadratic term steers the approach while the log term only takes over
    once the end effector is within ~sqrt(v) mm of the target.
    """

    v: float
    alpha: float
    target: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "target", np.asarray(self.target, dtype=float))
        if self.v < 0 or self.alpha <= 0:
            raise ConfigError("need v >= 0 and alpha > 0")
        if self.target.shape != (3,):
            raise ConfigError("target must be a 3-vector (millimeters)")


def task_cost(params, d):
    """d^2 + v*log(d^2 + alpha) for a distance d in millimeters.

    alpha > 0 keeps the log finite at d = 0.
    """
    d2 = d * d
    return d2 + params.v * math.log(d2 + params.alpha)


@dataclass(frozen=True)
class Observation:
    """One environment response: next state, task distance (mm) and cost."""

    state: np.ndarray
    distance: float
    cost: float


@dataclass(frozen=True)
class EnvConfig:
    initial_state: np.ndarray
    horizon: int
    lag: float = 0.7
    sensor_noise_std: float = 0.0  # meters, applied to the measured distance

    def __post_init__(self):
        object.__setattr__(
            self, "initial_state", np.asarray(self.initial_state, dtype=float)
        )
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        if not 0.0 < self.lag <= 1.0:
            raise ConfigError("lag must lie in (0, 1]")
        if self.sensor_noise_std < 0:
            raise ConfigError("sensor noise std must be >= 0")


class ArmEnvironment:
    """Black-box positioning environment.

    State: joint angles. Action: target joint angles. The transition moves
    a lag fraction of the commanded displacement, clamped first to the rate
    limit and then to the joint limits.
    """

    def __init__(self, model, cost_params, config, noise_rng=None):
        if config.initial_state.shape != (model.joint_count,):
            raise ConfigError("initial state dimension != joint count")
        if config.sensor_noise_std > 0 and noise_rng is None:
            raise ConfigError("sensor noise requires a noise rng")
        self.model = model
        self.cost_params = cost_params
        self.config = config
        self.noise_rng = noise_rng
        self.n = model.joint_count
        self.m = model.joint_count
        self.horizon = config.horizon

    def _observe(self, state):
        pos, _ = fk_position(self.model, state)
        # fk works in meters; distances and the target are in millimeters.
        d = float(np.linalg.norm(1000.0 * pos - self.cost_params.target))
        if self.config.sensor_noise_std > 0:
            d += 1000.0 * self.config.sensor_noise_std * self.noise_rng.standard_normal()
            d = max(d, 0.0)
        return Observation(state=state, distance=d, cost=task_cost(self.cost_params, d))

    def initial_state(self):
        return self.config.initial_state.copy()

    def terminal_cost(self, state):
        return self._observe(np.asarray(state, dtype=float))

    def step(self, current, action):
        current = np.asarray(current, dtype=float)
        action = np.asarray(action, dtype=float)
        if action.shape != (self.m,) or current.shape != (self.n,):
            raise DimensionError("state/action dimension mismatch")
        if not np.all(np.isfinite(action)):
            raise RolloutError("non-finite action")
        delta = self.config.lag * (action - current)
        r = self.model.rate_limit
        delta = np.clip(delta, -r, r)
        nxt = np.clip(current + delta, self.model.limits_lo, self.model.limits_hi)
        return self._observe(nxt)
