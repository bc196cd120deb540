"""Session and sweep runners plus config-file handling for the CLI."""

import csv
import io
import json
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .arm import (
    ArmEnvironment,
    CostParams,
    EnvConfig,
    default_iiwa14_model,
    load_arm_model,
)
from .errors import ConfigError
from .lqr import LQProblem, riccati_lqr
from .modelfit import ExplorationConfig
from .solver import SolverConfig, backward_pass, ilqg_outer_loop
from .types import LinearGaussianPolicy, NominalTrajectory


DEG2_TO_RAD2 = (math.pi / 180.0) ** 2


@dataclass(frozen=True)
class SessionConfig:
    """Everything one learning session needs; defaults follow the simulated
    positioning study (7-DOF arm, target [500, 500, 500] mm, all angles at
    zero). cov_ini is the initial exploration variance per joint in square
    degrees; distances and the target are in millimeters."""

    initial_state: tuple = (0.0,) * 7
    horizon: int = 10
    lag: float = 0.7
    rate_limit: float | None = None
    sensor_noise_std: float = 0.0
    arm_model_path: str | None = None
    v: float = 0.1
    alpha: float = 1e-7
    target: tuple = (500.0, 500.0, 500.0)
    N: int = 40
    cov_ini: float = 1.0
    ridge: float = 1e-6
    pooling: int = 2
    epsilon_ini: float = 1e4
    epsilon_decrease: float = 1.0 / 3.0
    epsilon_growth: float = 1.7
    epsilon_min: float = 10.0
    bracket_size: int = 3
    max_iterations: int = 16
    convergence_distance_mm: float = 0.1
    eta0: float = 1e-8
    eta_growth: float = 10.0
    max_dual_iterations: int = 16
    dual_refine_steps: int = 8
    seed: int = 0


@dataclass(frozen=True)
class SweepConfig:
    """Cartesian parameter grid over the four critical parameters."""

    cov_ini: tuple = (1.0, 10.0, 100.0)
    v: tuple = (0.1, 1.0, 10.0)
    alpha: tuple = (1e-3, 1e-5, 1e-7)
    epsilon_ini: tuple = (100.0, 1000.0, 10000.0)
    seeds_per_cell: int = 3
    base: SessionConfig = field(default_factory=SessionConfig)

    def cells(self):
        for cov in self.cov_ini:
            for v in self.v:
                for alpha in self.alpha:
                    for eps in self.epsilon_ini:
                        yield (cov, v, alpha, eps)


_SESSION_KEYS = {f for f in SessionConfig.__dataclass_fields__}
_SWEEP_KEYS = {"cov_ini", "v", "alpha", "epsilon_ini", "seeds_per_cell", "session"}


def session_config_from_dict(obj):
    errors = [f"unknown session key: {k}" for k in sorted(set(obj) - _SESSION_KEYS)]
    cfg = None
    if not errors:
        try:
            cfg = SessionConfig(**{k: _json_value(k, v) for k, v in obj.items()})
        except (TypeError, ValueError) as e:
            errors.append(str(e))
    if cfg is not None:
        errors.extend(_validate_session(cfg))
    if errors:
        raise ConfigError("; ".join(errors))
    return cfg


def _json_value(key, value):
    if key in ("initial_state", "target") and isinstance(value, list):
        return tuple(value)
    return value


def _validate_session(cfg):
    errors = []
    if cfg.horizon < 1:
        errors.append("horizon must be >= 1")
    if not 0 < cfg.lag <= 1:
        errors.append("lag must lie in (0, 1]")
    if cfg.N < 2:
        errors.append("N must be >= 2")
    if cfg.cov_ini <= 0:
        errors.append("cov_ini must be > 0")
    if cfg.ridge < 0:
        errors.append("ridge must be >= 0")
    if cfg.alpha <= 0:
        errors.append("alpha must be > 0")
    if cfg.v < 0:
        errors.append("v must be >= 0")
    if cfg.epsilon_ini <= 0:
        errors.append("epsilon_ini must be > 0")
    if not 0 < cfg.epsilon_decrease < 1:
        errors.append("epsilon_decrease must lie in (0, 1)")
    if cfg.epsilon_growth < 1:
        errors.append("epsilon_growth must be >= 1")
    if cfg.epsilon_min <= 0:
        errors.append("epsilon_min must be > 0")
    if cfg.bracket_size < 1:
        errors.append("bracket_size must be >= 1")
    if cfg.rate_limit is not None and cfg.rate_limit <= 0:
        errors.append("rate_limit must be > 0 when given")
    if cfg.max_iterations < 1:
        errors.append("max_iterations must be >= 1")
    if cfg.convergence_distance_mm <= 0:
        errors.append("convergence_distance_mm must be > 0")
    if len(cfg.target) != 3:
        errors.append("target must have 3 entries")
    return errors


def sweep_config_from_dict(obj):
    unknown = sorted(set(obj) - _SWEEP_KEYS)
    if unknown:
        raise ConfigError("; ".join(f"unknown sweep key: {k}" for k in unknown))
    base = session_config_from_dict(obj.get("session", {}))
    kwargs = {}
    for key in ("cov_ini", "v", "alpha", "epsilon_ini"):
        if key in obj:
            kwargs[key] = tuple(obj[key])
    if "seeds_per_cell" in obj:
        kwargs["seeds_per_cell"] = int(obj["seeds_per_cell"])
    return SweepConfig(base=base, **kwargs)


def load_config(path):
    """Load a JSON config file holding a session or a sweep definition."""
    with open(path) as fh:
        obj = json.load(fh)
    if "sweep" in obj:
        inner = dict(obj["sweep"])
        if "session" in obj:
            inner["session"] = obj["session"]
        extra = set(obj) - {"sweep", "session"}
        if extra:
            raise ConfigError(f"unknown top-level keys: {sorted(extra)}")
        return sweep_config_from_dict(inner)
    return session_config_from_dict(obj)


def build_environment(cfg):
    model = (
        load_arm_model(cfg.arm_model_path)
        if cfg.arm_model_path
        else default_iiwa14_model()
    )
    if cfg.rate_limit is not None:
        model = replace(model, rate_limit=cfg.rate_limit)
    env_cfg = EnvConfig(
        initial_state=np.asarray(cfg.initial_state, dtype=float),
        horizon=cfg.horizon,
        lag=cfg.lag,
        sensor_noise_std=cfg.sensor_noise_std,
    )
    cost = CostParams(v=cfg.v, alpha=cfg.alpha, target=np.asarray(cfg.target))
    noise_rng = (
        np.random.default_rng(cfg.seed + 9973) if cfg.sensor_noise_std > 0 else None
    )
    return ArmEnvironment(model, cost, env_cfg, noise_rng=noise_rng)


def initial_policy(cfg):
    """Zero-gain hold-position policy: mean command = initial angles,
    isotropic exploration of cov_ini square degrees per joint."""
    n = len(cfg.initial_state)
    return LinearGaussianPolicy.constant_command(
        cfg.horizon,
        n,
        np.asarray(cfg.initial_state, dtype=float),
        cfg.cov_ini * DEG2_TO_RAD2,
    )


def run_session(cfg):
    env = build_environment(cfg)
    solver = SolverConfig(
        epsilon_ini=cfg.epsilon_ini,
        epsilon_decrease=cfg.epsilon_decrease,
        epsilon_growth=cfg.epsilon_growth,
        epsilon_min=cfg.epsilon_min,
        bracket_size=cfg.bracket_size,
        max_iterations=cfg.max_iterations,
        convergence_distance_mm=cfg.convergence_distance_mm,
        eta0=cfg.eta0,
        eta_growth=cfg.eta_growth,
        max_dual_iterations=cfg.max_dual_iterations,
        dual_refine_steps=cfg.dual_refine_steps,
    )
    explore = ExplorationConfig(
        N=cfg.N,
        cov_ini=cfg.cov_ini * DEG2_TO_RAD2,
        ridge=cfg.ridge,
        pooling=cfg.pooling,
    )
    rng = np.random.default_rng(cfg.seed)
    return ilqg_outer_loop(env, initial_policy(cfg), explore, solver, rng)


@dataclass(frozen=True)
class SweepRow:
    cov_ini: float
    v: float
    alpha: float
    epsilon_ini: float
    outcome: str  # converged | remaining | aborted
    iterations: int | None
    remaining_mm: float
    seed: int


@dataclass
class SweepResult:
    rows: list

    def cell_median(self, cell):
        """Median outcome of one cell, in the two-mode table convention:
        ('converged', median iterations) when at least half the seeds
        converged, else ('remaining', median remaining mm)."""
        rows = [
            r
            for r in self.rows
            if (r.cov_ini, r.v, r.alpha, r.epsilon_ini) == tuple(cell)
        ]
        scored = sorted(
            rows,
            key=lambda r: (
                (0, r.iterations) if r.outcome == "converged" else (1, r.remaining_mm)
            ),
        )
        mid = scored[(len(scored) - 1) // 2]
        if mid.outcome == "converged":
            return ("converged", mid.iterations)
        return ("remaining", mid.remaining_mm)


def _cell_seed(base_seed, cell_index, rep):
    return int(
        np.random.SeedSequence([base_seed, cell_index, rep]).generate_state(1)[0]
    )


def _run_cell(args):
    base, cell, cell_index, rep, base_seed = args
    cov, v, alpha, eps = cell
    cfg = replace(
        base,
        cov_ini=cov,
        v=v,
        alpha=alpha,
        epsilon_ini=eps,
        seed=_cell_seed(base_seed, cell_index, rep),
    )
    try:
        res = run_session(cfg)
    except Exception:  # individual cell failures stay in-table
        return SweepRow(cov, v, alpha, eps, "aborted", None, float("nan"), cfg.seed)
    if res.aborted:
        return SweepRow(cov, v, alpha, eps, "aborted", None, res.remaining_mm, cfg.seed)
    if res.converged:
        return SweepRow(
            cov, v, alpha, eps, "converged", res.converged_at, res.remaining_mm, cfg.seed
        )
    return SweepRow(cov, v, alpha, eps, "remaining", None, res.remaining_mm, cfg.seed)


def run_sweep(sweep, jobs=1, progress=None):
    """Run every grid cell for seeds_per_cell seeds each.

    Rows come back keyed by cell order, independent of execution order, so
    repeated sweeps with the same config are identical.
    """
    tasks = []
    for idx, cell in enumerate(sweep.cells()):
        for rep in range(sweep.seeds_per_cell):
            tasks.append((sweep.base, cell, idx, rep, sweep.base.seed))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = []
            for i, row in enumerate(pool.map(_run_cell, tasks)):
                rows.append(row)
                if progress:
                    progress(i + 1, len(tasks), row)
    else:
        rows = []
        for i, task in enumerate(tasks):
            row = _run_cell(task)
            rows.append(row)
            if progress:
                progress(i + 1, len(tasks), row)
    return SweepResult(rows)


def session_csv(result):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["iteration", "distance_mm", "cost", "eta", "epsilon", "accepted"])
    for r in result.records:
        w.writerow(
            [
                r.iteration,
                f"{r.distance_mm:.9g}",
                f"{r.cost:.9g}",
                f"{r.eta:.9g}",
                f"{r.epsilon:.9g}",
                int(r.accepted),
            ]
        )
    return buf.getvalue()


def session_json(result):
    return json.dumps(
        {
            "records": [
                {
                    "iteration": r.iteration,
                    "distance_mm": r.distance_mm,
                    "cost": r.cost,
                    "eta": r.eta,
                    "epsilon": r.epsilon,
                    "accepted": r.accepted,
                }
                for r in result.records
            ],
            "converged_at": result.converged_at,
            "remaining_mm": result.remaining_mm,
            "aborted": result.aborted,
            "abort_reason": result.abort_reason,
        },
        indent=2,
    )


def sweep_csv(result):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(
        ["cov_ini", "v", "alpha", "eps_ini", "outcome", "iterations", "remaining_mm", "seed"]
    )
    for r in result.rows:
        w.writerow(
            [
                f"{r.cov_ini:g}",
                f"{r.v:g}",
                f"{r.alpha:g}",
                f"{r.epsilon_ini:g}",
                r.outcome,
                "" if r.iterations is None else r.iterations,
                "" if math.isnan(r.remaining_mm) else f"{r.remaining_mm:.9g}",
                r.seed,
            ]
        )
    return buf.getvalue()


def sweep_json(result):
    return json.dumps(
        [
            {
                "cov_ini": r.cov_ini,
                "v": r.v,
                "alpha": r.alpha,
                "eps_ini": r.epsilon_ini,
                "outcome": r.outcome,
                "iterations": r.iterations,
                "remaining_mm": None if math.isnan(r.remaining_mm) else r.remaining_mm,
                "seed": r.seed,
            }
            for r in result.rows
        ],
        indent=2,
    )


def lqr_selfcheck(seed=0, count=20):
    """Compare the backward pass on exact models against the Riccati
    recursion on random affine-quadratic fixtures.

    Returns (ok, max relative gain error).
    """
    from .modelfit import LinearDynamicsModel, QuadraticCostModel

    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        n = int(rng.integers(2, 5))
        m = int(rng.integers(1, 3))
        T = 20
        problem = random_lq_problem(rng, n, m, T)
        nominal = NominalTrajectory(np.zeros((T + 1, n)), np.zeros((T, m)))
        dyn = LinearDynamicsModel(
            F=np.tile(np.hstack([problem.A, problem.B]), (T, 1, 1)),
            bias=np.tile(problem.c, (T, 1)),
            residual_rms=np.zeros(T),
        )
        p = n + m
        L = np.zeros((T + 1, p, p))
        Lx = np.zeros((T + 1, p))
        l0 = np.zeros(T + 1)
        for t in range(T):
            L[t, :n, :n] = problem.Q
            L[t, n:, n:] = problem.R
            Lx[t, :n] = problem.q
            Lx[t, n:] = problem.r
        L[T, :n, :n] = problem.Qf
        Lx[T, :n] = problem.qf
        cost = QuadraticCostModel(l0, Lx, L)
        policy, _, _ = backward_pass(dyn, cost, nominal)
        K_ref, k_ref, _, _, _ = riccati_lqr(problem)
        err = np.max(np.abs(policy.K - K_ref)) / max(1.0, np.max(np.abs(K_ref)))
        err_k = np.max(np.abs(policy.k - k_ref)) / max(1.0, np.max(np.abs(k_ref)))
        worst = max(worst, err, err_k)
    return worst < 1e-6, worst


def random_lq_problem(rng, n, m, T, drift=True):
    A = rng.standard_normal((n, n)) * 0.5
    B = rng.standard_normal((n, m))
    c = rng.standard_normal(n) * 0.1 if drift else np.zeros(n)
    Mq = rng.standard_normal((n, n))
    Q = Mq @ Mq.T / n + 0.1 * np.eye(n)
    Mr = rng.standard_normal((m, m))
    R = Mr @ Mr.T / m + 0.5 * np.eye(m)
    return LQProblem(
        A=A,
        B=B,
        c=c,
        Q=Q,
        R=R,
        q=rng.standard_normal(n) * 0.1,
        r=rng.standard_normal(m) * 0.1,
        T=T,
        Qf=2.0 * Q,
        qf=rng.standard_normal(n) * 0.1,
    )
