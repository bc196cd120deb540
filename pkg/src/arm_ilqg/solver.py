"""Controller update engine: backward value recursion, KL-penalized cost
shaping, trajectory KL measurement, dual ascent on the penalty multiplier,
and the outer learning loop.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EtaLadderExhausted,
    FitError,
    NotPositiveDefiniteError,
    QuuNotPositiveDefinite,
    RolloutError,
)
from .modelfit import QuadraticCostModel, collect_samples, fit_cost, fit_dynamics
from .rollout import rollout, trajectory_total_cost
from .types import LinearGaussianPolicy, NominalTrajectory

ETA_LADDER_CAP = 1e16


@dataclass(frozen=True)
class QExpansions:
    """Per-timestep quadratic action-value coefficients (T, ...)."""

    Q0: np.ndarray
    Q_xu: np.ndarray
    Q_xuxu: np.ndarray


@dataclass(frozen=True)
class ValueExpansions:
    """Per-timestep quadratic state-value coefficients (T+1, ...)."""

    V0: np.ndarray
    V_x: np.ndarray
    V_xx: np.ndarray


@dataclass
class DualState:
    """Multiplier state for the KL-constrained update."""

    eta: float = 1e-3
    epsilon: float = 1e4
    eta_growth: float = 10.0
    max_iterations: int = 16

    def __post_init__(self):
        if self.eta <= 0 or not math.isfinite(self.eta):
            raise ValueError("eta must be finite and positive")
        if self.epsilon <= 0 or self.eta_growth <= 1:
            raise ValueError("epsilon > 0 and eta_growth > 1 required")


@dataclass(frozen=True)
class SolverConfig:
    """Outer-loop and dual-descent settings.

    Each outer iteration solves the constrained update at the bracket of
    KL bounds {eps, eps*dec, eps*dec^2, ...} (bracket_size points,
    dec = epsilon_decrease) and adopts the candidate whose deterministic
    evaluation rollout has the lowest cost, provided it improves on the
    incumbent. eps then grows by epsilon_growth (capped at epsilon_ini)
    when the widest bound won, and shrinks by epsilon_decrease (floored at
    epsilon_min) when the narrowest won or no candidate improved.
    """

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

    def __post_init__(self):
        if not (
            self.epsilon_ini > 0
            and 0 < self.epsilon_decrease < 1
            and self.epsilon_growth >= 1
            and self.epsilon_min > 0
            and self.bracket_size >= 1
            and self.max_iterations >= 1
            and self.convergence_distance_mm > 0
            and self.eta0 > 0
            and self.dual_refine_steps >= 0
        ):
            raise ValueError("invalid solver configuration")


def _split_dims(dyn):
    n = dyn.bias.shape[1]
    m = dyn.F.shape[2] - n
    return n, m


def backward_pass(dyn, cost, nominal):
    """Backward recursion over the local models.

    Returns the updated policy (gains, offsets and maximum-entropy
    covariances Sigma_t = Q_uu^-1) together with the value and Q
    expansions. Raises QuuNotPositiveDefinite on the first timestep whose
    Q_uu has no Cholesky factor; the caller reacts by raising the penalty
    multiplier.
    """
    n, m = _split_dims(dyn)
    T = dyn.T
    p = n + m
    V0 = np.zeros(T + 1)
    V_x = np.zeros((T + 1, n))
    V_xx = np.zeros((T + 1, n, n))
    Q0 = np.zeros(T)
    Q_xu = np.zeros((T, p))
    Q_xuxu = np.zeros((T, p, p))
    K = np.empty((T, m, n))
    k = np.empty((T, m))
    sigma = np.empty((T, m, m))

    V0[T] = cost.l0[T]
    V_x[T] = cost.L_xu[T, :n]
    V_xx[T] = 0.5 * (cost.L_xuxu[T, :n, :n] + cost.L_xuxu[T, :n, :n].T)

    for t in range(T - 1, -1, -1):
        F = dyn.F[t]
        xu_bar = np.concatenate([nominal.mean_states[t], nominal.mean_actions[t]])
        # Drift of the fitted model at the nominal point, in deviation form.
        c = F @ xu_bar + dyn.bias[t] - nominal.mean_states[t + 1]
        Vx1 = V_x[t + 1] + V_xx[t + 1] @ c
        Q0[t] = (
            cost.l0[t]
            + V0[t + 1]
            + V_x[t + 1] @ c
            + 0.5 * c @ V_xx[t + 1] @ c
        )
        Q_xu[t] = cost.L_xu[t] + F.T @ Vx1
        H = cost.L_xuxu[t] + F.T @ V_xx[t + 1] @ F
        Q_xuxu[t] = 0.5 * (H + H.T)

        Quu = Q_xuxu[t, n:, n:]
        Qux = Q_xuxu[t, n:, :n]
        Qxx = Q_xuxu[t, :n, :n]
        Qu = Q_xu[t, n:]
        Qx = Q_xu[t, :n]
        try:
            L = np.linalg.cholesky(Quu)
        except np.linalg.LinAlgError:
            raise QuuNotPositiveDefinite(t) from None

        def chol_solve(rhs):
            return np.linalg.solve(L.T, np.linalg.solve(L, rhs))

        Kd = -chol_solve(Qux)
        kd = -chol_solve(Qu)
        K[t] = Kd
        k[t] = nominal.mean_actions[t] + kd - Kd @ nominal.mean_states[t]
        Sig = chol_solve(np.eye(m))
        sigma[t] = 0.5 * (Sig + Sig.T)

        Vxx = Qxx - Qux.T @ (-Kd)
        V_xx[t] = 0.5 * (Vxx + Vxx.T)
        V_x[t] = Qx + Qux.T @ kd
        V0[t] = Q0[t] + 0.5 * Qu @ kd

    policy = LinearGaussianPolicy(K, k, sigma)
    return policy, ValueExpansions(V0, V_x, V_xx), QExpansions(Q0, Q_xu, Q_xuxu)


def modified_cost(cost, old_policy, nominal, eta):
    """Penalty-shaped cost: (1/eta) * cost plus the quadratic expansion of
    -log p_old(u | x) around the nominal point.

    The terminal entry (no action) is only rescaled by 1/eta. Constant
    terms of the Gaussian log-density are retained so reported model values
    stay meaningful.
    """
    if eta <= 0:
        raise ValueError("eta must be positive")
    T = cost.T
    n = old_policy.n
    m = old_policy.m
    p = n + m
    l0 = cost.l0 / eta
    L_xu = cost.L_xu / eta
    L_xuxu = cost.L_xuxu / eta
    l0 = l0.copy()
    L_xu = L_xu.copy()
    L_xuxu = L_xuxu.copy()
    for t in range(T):
        sig = old_policy.sigma[t]
        try:
            Lc = np.linalg.cholesky(sig)
        except np.linalg.LinAlgError as e:
            raise NotPositiveDefiniteError(f"old policy sigma[{t}]") from e
        sig_inv = np.linalg.solve(Lc.T, np.linalg.solve(Lc, np.eye(m)))
        logdet = 2.0 * np.sum(np.log(np.diag(Lc)))
        M = np.hstack([-old_policy.K[t], np.eye(m)])
        r = nominal.mean_actions[t] - (
            old_policy.K[t] @ nominal.mean_states[t] + old_policy.k[t]
        )
        sr = sig_inv @ r
        l0[t] += 0.5 * r @ sr + 0.5 * (m * math.log(2.0 * math.pi) + logdet)
        L_xu[t] += M.T @ sr
        L_xuxu[t] += M.T @ sig_inv @ M
    return QuadraticCostModel(l0, L_xu, L_xuxu)


def trajectory_kl(new_policy, old_policy, dyn, x0):
    """KL divergence between the trajectory distributions of two policies.

    Gaussian state marginals are propagated under new_policy through the
    fitted linear dynamics; each step adds the expected conditional
    Gaussian KL over the current state marginal.
    """
    T = new_policy.T
    if old_policy.T != T:
        raise ValueError("policy horizons differ")
    n = new_policy.n
    m = new_policy.m
    mu = np.asarray(x0, dtype=float).copy()
    S = np.zeros((n, n))
    total = 0.0
    for t in range(T):
        Kn, kn, Sn = new_policy.K[t], new_policy.k[t], new_policy.sigma[t]
        Ko, ko, So = old_policy.K[t], old_policy.k[t], old_policy.sigma[t]
        try:
            Lo = np.linalg.cholesky(So)
            Ln = np.linalg.cholesky(Sn)
        except np.linalg.LinAlgError as e:
            raise NotPositiveDefiniteError("policy covariance in KL") from e
        So_inv = np.linalg.solve(Lo.T, np.linalg.solve(Lo, np.eye(m)))
        logdet_o = 2.0 * np.sum(np.log(np.diag(Lo)))
        logdet_n = 2.0 * np.sum(np.log(np.diag(Ln)))
        dK = Kn - Ko
        dmu = dK @ mu + (kn - ko)
        total += 0.5 * (
            np.trace(So_inv @ Sn)
            - m
            + logdet_o
            - logdet_n
            + dmu @ So_inv @ dmu
            + np.trace(So_inv @ dK @ S @ dK.T)
        )
        # Propagate the state marginal under the new policy.
        Fx = dyn.F[t][:, :n]
        Fu = dyn.F[t][:, n:]
        A = Fx + Fu @ Kn
        mu = dyn.F[t] @ np.concatenate([mu, Kn @ mu + kn]) + dyn.bias[t]
        S = A @ S @ A.T + Fu @ Sn @ Fu.T
        S = 0.5 * (S + S.T)
    return float(max(total, 0.0))


def initialize_eta_for_pd(dyn, cost, old_policy, nominal, eta0):
    """Smallest eta on a geometric ladder from eta0 (factor 10) for which
    the backward pass over the penalized cost is positive definite
    throughout."""
    eta = eta0
    while eta <= ETA_LADDER_CAP:
        try:
            backward_pass(dyn, modified_cost(cost, old_policy, nominal, eta), nominal)
        except QuuNotPositiveDefinite:
            eta *= 10.0
            continue
        return eta
    raise EtaLadderExhausted(
        f"no eta <= {ETA_LADDER_CAP:g} restored positive definiteness"
    )


@dataclass(frozen=True)
class ConstrainedUpdateResult:
    policy: LinearGaussianPolicy
    kl: float
    eta: float
    satisfied: bool
    ladder: tuple  # (eta, kl) pairs actually visited


def constrained_update(dyn, cost, old_policy, nominal, dual, refine_steps=8):
    """Dual ascent: optimize under the penalized cost, raise eta until the
    trajectory KL falls below epsilon.

    A backward pass losing positive definiteness counts as a failed rung
    (the penalty is too weak there). Once a feasible eta is found, a short
    geometric bisection against the last infeasible rung tightens it so
    the returned policy uses most of the KL budget. If no rung satisfies
    the bound, the lowest-KL attempt comes back flagged satisfied=False.
    """
    x0 = nominal.mean_states[0]

    def attempt(eta):
        try:
            policy, _, _ = backward_pass(
                dyn, modified_cost(cost, old_policy, nominal, eta), nominal
            )
        except QuuNotPositiveDefinite:
            return None, math.inf
        return policy, trajectory_kl(policy, old_policy, dyn, x0)

    eta = dual.eta
    ladder = []
    lo = None
    best = None
    fallback = None
    for _ in range(dual.max_iterations):
        policy, kl = attempt(eta)
        ladder.append((eta, kl))
        if policy is not None and (fallback is None or kl < fallback[1]):
            fallback = (policy, kl, eta)
        if kl <= dual.epsilon:
            best = (policy, kl, eta)
            break
        lo = eta
        eta *= dual.eta_growth
    if best is None:
        if fallback is None:
            raise EtaLadderExhausted("dual descent produced no valid policy")
        return ConstrainedUpdateResult(*fallback, False, tuple(ladder))
    if lo is not None:
        hi = best[2]
        for _ in range(refine_steps):
            mid = math.sqrt(lo * hi)
            policy, kl = attempt(mid)
            ladder.append((mid, kl))
            if kl <= dual.epsilon:
                hi = mid
                best = (policy, kl, mid)
            else:
                lo = mid
    return ConstrainedUpdateResult(*best, True, tuple(ladder))


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    distance_mm: float
    cost: float
    eta: float
    epsilon: float
    accepted: bool


@dataclass
class SessionResult:
    """Learning curve of one session plus its outcome."""

    records: list = field(default_factory=list)
    converged_at: int | None = None
    remaining_mm: float = float("nan")
    aborted: bool = False
    abort_reason: str = ""
    final_policy: LinearGaussianPolicy | None = None

    @property
    def converged(self):
        return self.converged_at is not None


def project_psd(cost_model):
    """Clamp every fitted cost Hessian to its positive-semidefinite part.

    The fitted quadratics carry negative curvature along the radial
    direction of the log well; the backward pass needs convex stage costs,
    and the KL penalty supplies the missing regularization.
    """
    L = cost_model.L_xuxu.copy()
    for t in range(L.shape[0]):
        w, V = np.linalg.eigh(0.5 * (L[t] + L[t].T))
        L[t] = (V * np.maximum(w, 0.0)) @ V.T
    return QuadraticCostModel(cost_model.l0, cost_model.L_xu, L)


def ilqg_outer_loop(env, initial_policy, explore, solver, rng, model_hook=None):
    """Alternate sampling, model fitting and constrained policy updates.

    Every iteration fits fresh local models, solves the KL-constrained
    update at a small bracket of bounds around the current epsilon, and
    evaluates each candidate with a deterministic rollout. The best
    candidate is adopted when its evaluation cost improves on the
    incumbent; epsilon then tracks which end of the bracket won (see
    SolverConfig). model_hook, when given, may replace the fitted
    (dynamics, cost) models (used by tests to inject adversarial models).
    """
    policy = initial_policy
    eval_traj = rollout(env, policy)
    incumbent_cost = trajectory_total_cost(eval_traj)
    distance = float(eval_traj.distances[-1])
    epsilon = solver.epsilon_ini
    result = SessionResult()
    for it in range(1, solver.max_iterations + 1):
        try:
            nominal = NominalTrajectory.of(rollout(env, policy))
            samples = collect_samples(env, policy, explore, rng)
            dyn = fit_dynamics(samples, nominal, explore)
            cost_model = project_psd(fit_cost(samples, nominal, explore))
            if model_hook is not None:
                dyn, cost_model = model_hook(it, dyn, cost_model)
            candidates = []
            for j in range(solver.bracket_size):
                dual = DualState(
                    eta=solver.eta0,
                    epsilon=epsilon * solver.epsilon_decrease**j,
                    eta_growth=solver.eta_growth,
                    max_iterations=solver.max_dual_iterations,
                )
                update = constrained_update(
                    dyn, cost_model, policy, nominal, dual,
                    refine_steps=solver.dual_refine_steps,
                )
                if not update.satisfied:
                    continue
                traj = rollout(env, update.policy)
                candidates.append((trajectory_total_cost(traj), j, update, traj))
        except (FitError, RolloutError, EtaLadderExhausted, NotPositiveDefiniteError) as e:
            result.aborted = True
            result.abort_reason = f"{type(e).__name__}: {e}"
            break
        accepted = False
        eta = float("nan")
        eps_used = epsilon
        if candidates:
            cand_cost, j, update, traj = min(candidates, key=lambda c: c[0])
            eta = update.eta
            eps_used = epsilon * solver.epsilon_decrease**j
            accepted = cand_cost < incumbent_cost
            if accepted:
                policy = update.policy
                incumbent_cost = cand_cost
                distance = float(traj.distances[-1])
                if j == 0:
                    epsilon = min(epsilon * solver.epsilon_growth, solver.epsilon_ini)
                elif j == solver.bracket_size - 1:
                    epsilon = max(epsilon * solver.epsilon_decrease, solver.epsilon_min)
        if not accepted:
            epsilon = max(epsilon * solver.epsilon_decrease, solver.epsilon_min)
        result.records.append(
            IterationRecord(
                iteration=it,
                distance_mm=distance,
                cost=incumbent_cost,
                eta=eta,
                epsilon=eps_used,
                accepted=accepted,
            )
        )
        if distance < solver.convergence_distance_mm:
            result.converged_at = it
            break
    result.remaining_mm = distance
    result.final_policy = policy
    return result
