import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from arm_ilqg.errors import NotPositiveDefiniteError
from arm_ilqg.harness import random_lq_problem
from arm_ilqg.kernels import quad_coeffs_to_hessian, quad_features
from arm_ilqg.lqr import (
    LinearQuadraticEnv,
    LQProblem,
    finite_diff_expansion,
    lq_optimal_cost,
    riccati_lqr,
)


def rollout_cost(problem, x0, controls):
    """Total cost of an open-loop control sequence, via the env wrapper."""
    env = LinearQuadraticEnv(problem, x0)
    x = env.initial_state()
    total = 0.0
    for t in range(problem.T):
        obs = env.step(x, controls[t])
        total += obs.cost
        x = obs.state
    return total + env.terminal_cost(x).cost


def stacked_qp_optimum(problem, x0, rng):
    """Oracle: recover the exact quadratic cost(U) over the flattened control
    sequence by regression on rollouts, then minimize it in closed form."""
    p = problem.T * problem.m
    U = rng.standard_normal((3 * (1 + p + p * (p + 1) // 2), p))
    y = np.array(
        [rollout_cost(problem, x0, u.reshape(problem.T, problem.m)) for u in U]
    )
    coeffs, *_ = np.linalg.lstsq(quad_features(U), y, rcond=None)
    c0, g, H = quad_coeffs_to_hessian(coeffs, p)
    u_star = -np.linalg.solve(H, g)
    return c0 + g @ u_star + 0.5 * u_star @ H @ u_star, u_star


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.booleans())
def test_riccati_matches_stacked_qp(seed, drift):
    rng = np.random.default_rng(seed)
    problem = random_lq_problem(rng, n=3, m=2, T=4, drift=drift)
    x0 = rng.standard_normal(3)
    oracle_cost, u_star = stacked_qp_optimum(problem, x0, rng)
    # Value function at x0.
    assert lq_optimal_cost(problem, x0) == pytest.approx(oracle_cost, rel=1e-7)
    # Closed-loop rollout of the Riccati policy reproduces the open-loop
    # optimum control by control.
    K, kvec, *_ = riccati_lqr(problem)
    x = x0.copy()
    controls = []
    for t in range(problem.T):
        u = K[t] @ x + kvec[t]
        controls.append(u)
        x = problem.A @ x + problem.B @ u + problem.c
    np.testing.assert_allclose(
        np.concatenate(controls), u_star, rtol=1e-6, atol=1e-8
    )


def test_riccati_one_step_hand_computed():
    # Scalar, T=1: min over u of 0.5 q x^2 + 0.5 r u^2 + 0.5 qf (a x + b u)^2.
    a, b, q, r, qf = 2.0, 1.0, 1.0, 0.5, 3.0
    problem = LQProblem(
        A=[[a]], B=[[b]], c=[0.0], Q=[[q]], R=[[r]], q=[0.0], r=[0.0],
        T=1, Qf=[[qf]], qf=[0.0],
    )
    K, kvec, P, p, const = riccati_lqr(problem)
    k_expected = -qf * b * a / (r + qf * b * b)
    assert K[0, 0, 0] == pytest.approx(k_expected)
    assert kvec[0, 0] == pytest.approx(0.0)
    assert const[0] == pytest.approx(0.0)
    # P[0] from substituting the optimal gain.
    x = 1.7
    u = k_expected * x
    cost = 0.5 * q * x**2 + 0.5 * r * u**2 + 0.5 * qf * (a * x + b * u) ** 2
    assert 0.5 * P[0, 0, 0] * x**2 == pytest.approx(cost)


def test_lq_problem_rejects_indefinite_R():
    with pytest.raises(NotPositiveDefiniteError):
        LQProblem(
            A=[[1.0]], B=[[1.0]], c=[0.0], Q=[[1.0]], R=[[-1.0]],
            q=[0.0], r=[0.0], T=2, Qf=[[1.0]], qf=[0.0],
        )


def test_finite_diff_expansion_on_quadratic():
    g = np.array([1.0, -2.0, 0.5])
    H = np.array([[2.0, 0.3, 0.0], [0.3, 1.0, -0.4], [0.0, -0.4, 3.0]])

    def fn(z):
        return 4.0 + g @ z + 0.5 * z @ H @ z

    z0 = np.array([0.2, -1.0, 0.7])
    f0, grad, hess = finite_diff_expansion(fn, z0)
    assert f0 == pytest.approx(fn(z0))
    np.testing.assert_allclose(grad, g + H @ z0, rtol=1e-6)
    np.testing.assert_allclose(hess, H, atol=1e-4)


def test_finite_diff_expansion_on_quartic():
    # f(z) = z1^4 + z1 z2: grad and Hessian at a generic point.
    def fn(z):
        return z[0] ** 4 + z[0] * z[1]

    z0 = np.array([1.5, -0.3])
    _, grad, hess = finite_diff_expansion(fn, z0)
    np.testing.assert_allclose(grad, [4 * 1.5**3 - 0.3, 1.5], rtol=1e-5)
    np.testing.assert_allclose(
        hess, [[12 * 1.5**2, 1.0], [1.0, 0.0]], atol=1e-3
    )


def test_finite_diff_rejects_nonfinite_point():
    with pytest.raises(ValueError):
        finite_diff_expansion(lambda z: np.inf, np.zeros(2))


def test_lq_env_costs_match_problem():
    rng = np.random.default_rng(11)
    problem = random_lq_problem(rng, n=2, m=2, T=3)
    env = LinearQuadraticEnv(problem, np.array([1.0, -1.0]))
    x = env.initial_state()
    u = np.array([0.5, 0.2])
    obs = env.step(x, u)
    np.testing.assert_allclose(obs.state, problem.A @ x + problem.B @ u + problem.c)
    assert obs.cost == pytest.approx(
        0.5 * x @ problem.Q @ x
        + problem.q @ x
        + 0.5 * u @ problem.R @ u
        + problem.r @ u
    )
    term = env.terminal_cost(obs.state)
    assert term.cost == pytest.approx(
        0.5 * obs.state @ problem.Qf @ obs.state + problem.qf @ obs.state
    )
