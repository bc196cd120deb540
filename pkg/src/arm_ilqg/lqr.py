"""Independent reference implementations used for verification only:
finite-horizon affine-quadratic Riccati recursion, finite-difference Taylor
expansion, and a linear-quadratic environment for end-to-end checks.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NotPositiveDefiniteError


@dataclass(frozen=True)
class LQProblem:
    """Affine dynamics x' = Ax + Bu + c with quadratic cost

        l(x, u) = 0.5 x'Qx + q.x + 0.5 u'Ru + r.u
        l_T(x)  = 0.5 x'Qf x + qf.x
    """

    A: np.ndarray
    B: np.ndarray
    c: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    q: np.ndarray
    r: np.ndarray
    T: int
    Qf: np.ndarray
    qf: np.ndarray

    def __post_init__(self):
        for name in ("A", "B", "c", "Q", "R", "q", "r", "Qf", "qf"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        n = self.A.shape[0]
        m = self.B.shape[1]
        if self.A.shape != (n, n) or self.B.shape != (n, m):
            raise DimensionError("A must be square and B conformable")
        try:
            np.linalg.cholesky(self.R)
        except np.linalg.LinAlgError as e:
            raise NotPositiveDefiniteError("R must be positive definite") from e

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]


def riccati_lqr(problem):
    """Backward Riccati recursion for the affine-quadratic problem.

    Returns (K, kvec, P, p, const): per-timestep gains/offsets
    (u* = K_t x + kvec_t) and value coefficients
    V_t(x) = 0.5 x'P_t x + p_t.x + const_t.
    """
    A, B, c = problem.A, problem.B, problem.c
    n, m, T = problem.n, problem.m, problem.T
    K = np.empty((T, m, n))
    kvec = np.empty((T, m))
    P = np.empty((T + 1, n, n))
    p = np.empty((T + 1, n))
    const = np.empty(T + 1)
    P[T] = 0.5 * (problem.Qf + problem.Qf.T)
    p[T] = problem.qf
    const[T] = 0.0
    for t in range(T - 1, -1, -1):
        Pc = P[t + 1] @ c + p[t + 1]
        Quu = problem.R + B.T @ P[t + 1] @ B
        Qux = B.T @ P[t + 1] @ A
        Qu = problem.r + B.T @ Pc
        Qxx = problem.Q + A.T @ P[t + 1] @ A
        Qx = problem.q + A.T @ Pc
        Kt = -np.linalg.solve(Quu, Qux)
        kt = -np.linalg.solve(Quu, Qu)
        K[t] = Kt
        kvec[t] = kt
        Pt = Qxx + Qux.T @ Kt
        P[t] = 0.5 * (Pt + Pt.T)
        p[t] = Qx + Qux.T @ kt
        const[t] = (
            const[t + 1]
            + 0.5 * c @ P[t + 1] @ c
            + p[t + 1] @ c
            + 0.5 * Qu @ kt
        )
    return K, kvec, P, p, const


def lq_optimal_cost(problem, x0):
    """Optimal cost-to-go from x0 under the problem's value recursion."""
    _, _, P, p, const = riccati_lqr(problem)
    x0 = np.asarray(x0, dtype=float)
    return float(0.5 * x0 @ P[0] @ x0 + p[0] @ x0 + const[0])


def finite_diff_expansion(fn, point, step=1e-5):
    """Central-difference quadratic expansion of a scalar function.

    Per-coordinate steps scale with the coordinate magnitude. Returns
    (value, gradient, Hessian); the Hessian is symmetrized.
    """
    z = np.asarray(point, dtype=float)
    p = z.shape[0]
    h = step * (1.0 + np.abs(z))
    f0 = float(fn(z))
    if not np.isfinite(f0):
        raise ValueError("function not finite at the expansion point")
    grad = np.empty(p)
    H = np.empty((p, p))
    for i in range(p):
        ei = np.zeros(p)
        ei[i] = h[i]
        fp = float(fn(z + ei))
        fm = float(fn(z - ei))
        grad[i] = (fp - fm) / (2.0 * h[i])
        H[i, i] = (fp - 2.0 * f0 + fm) / (h[i] * h[i])
    for i in range(p):
        for j in range(i + 1, p):
            ei = np.zeros(p)
            ej = np.zeros(p)
            ei[i] = h[i]
            ej[j] = h[j]
            fpp = float(fn(z + ei + ej))
            fpm = float(fn(z + ei - ej))
            fmp = float(fn(z - ei + ej))
            fmm = float(fn(z - ei - ej))
            H[i, j] = H[j, i] = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j])
    if not (np.all(np.isfinite(grad)) and np.all(np.isfinite(H))):
        raise ValueError("non-finite finite-difference evaluations")
    return f0, grad, 0.5 * (H + H.T)


class _Obs:
    __slots__ = ("state", "distance", "cost")

    def __init__(self, state, distance, cost):
        self.state = state
        self.distance = distance
        self.cost = cost


class LinearQuadraticEnv:
    """Environment wrapper around an LQProblem, for oracle cross-checks.

    The reported distance is the state norm, which only matters for
    bookkeeping in tests.
    """

    def __init__(self, problem, x0):
        self.problem = problem
        self.x0 = np.asarray(x0, dtype=float)
        self.n = problem.n
        self.m = problem.m
        self.horizon = problem.T

    def initial_state(self):
        return self.x0.copy()

    def step(self, x, u):
        pr = self.problem
        cost = float(
            0.5 * x @ pr.Q @ x + pr.q @ x + 0.5 * u @ pr.R @ u + pr.r @ u
        )
        nxt = pr.A @ x + pr.B @ u + pr.c
        return _Obs(nxt, float(np.linalg.norm(nxt)), cost)

    def terminal_cost(self, x):
        pr = self.problem
        return _Obs(
            np.asarray(x, float),
            float(np.linalg.norm(x)),
            float(0.5 * x @ pr.Qf @ x + pr.qf @ x),
        )
