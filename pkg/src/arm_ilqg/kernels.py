"""Hot numeric kernels: forward kinematics and quadratic feature expansion.

Each kernel has a pure-numpy implementation; when the numba backend is
active (see accel.py) the same function is compiled with @njit. Public
names always point at the selected variant.
"""

import numpy as np

from .accel import NUMBA_ENABLED


def _fk_position_impl(theta, d, a, alpha, q):
    """End-effector position of a serial chain, standard DH convention.

    Per joint i the link transform is
    RotZ(theta_i + q_i) @ TransZ(d_i) @ TransX(a_i) @ RotX(alpha_i).

    Args:
        theta: (J,) fixed joint-angle offsets, radians
        d: (J,) link offsets along z, meters
        a: (J,) link lengths along x, meters
        alpha: (J,) link twists about x, radians
        q: (J,) joint angles, radians

    Returns:
        (3,) Cartesian position in the base frame, meters.
    """
    R = np.eye(3)
    p = np.zeros(3)
    for i in range(q.shape[0]):
        ct = np.cos(theta[i] + q[i])
        st = np.sin(theta[i] + q[i])
        ca = np.cos(alpha[i])
        sa = np.sin(alpha[i])
        # Standard DH link matrix, rotation block and translation column.
        A = np.empty((3, 3))
        A[0, 0] = ct
        A[0, 1] = -st * ca
        A[0, 2] = st * sa
        A[1, 0] = st
        A[1, 1] = ct * ca
        A[1, 2] = -ct * sa
        A[2, 0] = 0.0
        A[2, 1] = sa
        A[2, 2] = ca
        t = np.empty(3)
        t[0] = a[i] * ct
        t[1] = a[i] * st
        t[2] = d[i]
        p = p + R @ t
        R = R @ A
    return p


def _fk_positions_impl(theta, d, a, alpha, Q):
    """Batched forward kinematics: Q is (S, J), returns (S, 3)."""
    S = Q.shape[0]
    out = np.empty((S, 3))
    for s in range(S):
        out[s] = _fk_position_impl(theta, d, a, alpha, Q[s])
    return out


def _quad_features_impl(Z):
    """Monomial features [1, z, upper-triangle z_i z_j] for each row of Z.

    Args:
        Z: (S, p) points.

    Returns:
        (S, 1 + p + p(p+1)/2) feature matrix. Off-diagonal products carry
        no factor; the fitted coefficients map back to a symmetric Hessian
        via quad_coeffs_to_hessian.
    """
    S, p = Z.shape
    nfeat = 1 + p + (p * (p + 1)) // 2
    out = np.empty((S, nfeat))
    for s in range(S):
        out[s, 0] = 1.0
        for i in range(p):
            out[s, 1 + i] = Z[s, i]
        c = 1 + p
        for i in range(p):
            for j in range(i, p):
                out[s, c] = Z[s, i] * Z[s, j]
                c += 1
    return out


if NUMBA_ENABLED:
    from numba import njit

    _fk_position_impl = njit(cache=True)(_fk_position_impl)
    _fk_positions_impl = njit(cache=True)(_fk_positions_impl)
    _quad_features_impl = njit(cache=True)(_quad_features_impl)

fk_position_chain = _fk_position_impl
fk_positions_chain = _fk_positions_impl
quad_features = _quad_features_impl


def quad_coeffs_to_hessian(coeffs, p):
    """Rebuild (constant, gradient, Hessian) from quad_features coefficients.

    Inverse of the feature layout above for the model
    f(z) = c0 + g.z + 0.5 z'Hz: the coefficient of z_i^2 is H_ii/2 and the
    coefficient of z_i z_j (i<j) is H_ij.
    """
    c0 = coeffs[0]
    g = coeffs[1:1 + p].copy()
    H = np.zeros((p, p))
    c = 1 + p
    for i in range(p):
        for j in range(i, p):
            if i == j:
                H[i, i] = 2.0 * coeffs[c]
            else:
                H[i, j] = coeffs[c]
                H[j, i] = coeffs[c]
            c += 1
    return c0, g, H
