"""KL-constrained iterative LQG with regression-learned local models,
validated on a simulated 7-DOF arm positioning task."""

from .accel import backend_name
from .arm import (
    ArmEnvironment,
    ArmModel,
    CostParams,
    EnvConfig,
    Observation,
    default_iiwa14_model,
    fk_position,
    load_arm_model,
    task_cost,
)
from .harness import (
    SessionConfig,
    SweepConfig,
    load_config,
    run_session,
    run_sweep,
)
from .lqr import LQProblem, LinearQuadraticEnv, finite_diff_expansion, riccati_lqr
from .modelfit import (
    ExplorationConfig,
    LinearDynamicsModel,
    QuadraticCostModel,
    SampleSet,
    collect_samples,
    fit_cost,
    fit_dynamics,
)
from .rollout import (
    policy_mean_action,
    rollout,
    sample_action,
    trajectory_total_cost,
)
from .solver import (
    DualState,
    SessionResult,
    SolverConfig,
    backward_pass,
    constrained_update,
    ilqg_outer_loop,
    initialize_eta_for_pd,
    modified_cost,
    project_psd,
    trajectory_kl,
)
from .types import LinearGaussianPolicy, NominalTrajectory, Trajectory

__version__ = "0.1.0"
