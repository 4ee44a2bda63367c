"""Pure-numpy integration kernels.

Reference implementations with the same signatures as the compiled module.
All covariance flows share one generic right-hand side

    dV/dt = A V + V A^T + D - K K^T,    K = V C^T + Gt,

where C is (L, M) and Gt is (M, L); L = 0 turns the flow into a plain
Lyapunov differential equation.  Deterministic covariance passes use
classical RK4 with symmetrization after every step; mean/record passes are
explicit linear recursions x_{k+1} = P_k x_k + Q_k u_k batched over
trajectories.

Inputs must be float64 and C-contiguous; the dispatch wrappers in
``lgqsmooth._core`` take care of that.
"""

import numpy as np

__all__ = [
    "rk4_cov_grid",
    "rk4_cov_converge",
    "rk4_cov_grid_tpath",
    "affine_forward",
    "affine_backward",
]

# rk4_cov_converge status codes, shared with the compiled backend
CONVERGED = 0
MAX_STEPS = 1
NON_FINITE = 2


def _rhs(A, D, C, Gt, V):
    K = V @ C.T + Gt
    AV = A @ V
    return AV + AV.T + D - K @ K.T


def _rk4_step(A, D, C, Gt, V, dt, k1):
    k2 = _rhs(A, D, C, Gt, V + (0.5 * dt) * k1)
    k3 = _rhs(A, D, C, Gt, V + (0.5 * dt) * k2)
    k4 = _rhs(A, D, C, Gt, V + dt * k3)
    V = V + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
    return 0.5 * (V + V.T)


def rk4_cov_grid(A, D, C, Gt, V0, dt, n_steps):
    """Integrate the covariance flow on a grid; returns (n_steps+1, M, M)."""
    M = A.shape[0]
    out = np.empty((n_steps + 1, M, M))
    V = V0.copy()
    out[0] = V
    for k in range(n_steps):
        V = _rk4_step(A, D, C, Gt, V, dt, _rhs(A, D, C, Gt, V))
        out[k + 1] = V
    return out


def rk4_cov_converge(A, D, C, Gt, V0, dt, max_steps, tol, consec):
    """March the covariance flow until ||dV/dt|| stays <= tol * (1 + ||V||).

    The tolerance is relative to the solution scale so that flows with very
    large stationary points (retrodictive variances near a divergence) are
    treated the same as O(1) ones.  Returns (V, status, steps, residual,
    V_mid) where V_mid is the iterate half way through the allotted horizon
    (used to diagnose divergence when status != CONVERGED) and residual is
    the Frobenius norm of the final right-hand side.
    """
    V = V0.copy()
    V_mid = V0.copy()
    mid = max_steps // 2
    streak = 0
    resid = np.inf
    for k in range(max_steps):
        k1 = _rhs(A, D, C, Gt, V)
        resid = float(np.sqrt(np.sum(k1 * k1)))
        if not np.isfinite(resid):
            return V, NON_FINITE, k, resid, V_mid
        streak = streak + 1 if resid <= tol * (1.0 + float(np.sqrt(np.sum(V * V)))) else 0
        if streak >= consec:
            return V, CONVERGED, k, resid, V_mid
        V = _rk4_step(A, D, C, Gt, V, dt, k1)
        if k == mid:
            V_mid = V.copy()
    return V, MAX_STEPS, max_steps, resid, V_mid


def _rhs_i(A_h, D_h, C_h, Gt_h, i, V):
    K = V @ C_h[i].T + Gt_h[i]
    AV = A_h[i] @ V
    return AV + AV.T + D_h[i] - K @ K.T


def rk4_cov_grid_tpath(A_half, D_half, C_half, Gt_half, V0, dt, n_steps, backward):
    """Covariance flow with time-dependent coefficients on a grid.

    Coefficient arrays are sampled at half-steps: index 2k is t_k, index
    2k+1 is t_k + dt/2, so each RK4 step has exact-order coefficients.
    With ``backward`` the flow is integrated from index n_steps down to 0
    (the increasing integration variable is T - t); the output is always
    indexed by forward time.
    """
    M = V0.shape[0]
    out = np.empty((n_steps + 1, M, M))
    V = V0.copy()
    if not backward:
        out[0] = V
        for k in range(n_steps):
            i0, i1, i2 = 2 * k, 2 * k + 1, 2 * k + 2
            k1 = _rhs_i(A_half, D_half, C_half, Gt_half, i0, V)
            k2 = _rhs_i(A_half, D_half, C_half, Gt_half, i1, V + (0.5 * dt) * k1)
            k3 = _rhs_i(A_half, D_half, C_half, Gt_half, i1, V + (0.5 * dt) * k2)
            k4 = _rhs_i(A_half, D_half, C_half, Gt_half, i2, V + dt * k3)
            V = V + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
            V = 0.5 * (V + V.T)
            out[k + 1] = V
    else:
        out[n_steps] = V
        for k in range(n_steps - 1, -1, -1):
            i0, i1, i2 = 2 * k + 2, 2 * k + 1, 2 * k
            k1 = _rhs_i(A_half, D_half, C_half, Gt_half, i0, V)
            k2 = _rhs_i(A_half, D_half, C_half, Gt_half, i1, V + (0.5 * dt) * k1)
            k3 = _rhs_i(A_half, D_half, C_half, Gt_half, i1, V + (0.5 * dt) * k2)
            k4 = _rhs_i(A_half, D_half, C_half, Gt_half, i2, V + dt * k3)
            V = V + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
            V = 0.5 * (V + V.T)
            out[k] = V
    return out


def affine_forward(P, Q, u, x0):
    """Batched forward recursion x_{k+1} = P_k x_k + Q_k u_k.

    P is (n, M, M), Q is (n, M, L), u is (n, R, L), x0 is (R, M).
    Returns the full path (n+1, R, M).
    """
    n = P.shape[0]
    R, M = x0.shape
    out = np.empty((n + 1, R, M))
    out[0] = x0
    for k in range(n):
        np.matmul(out[k], P[k].T, out=out[k + 1])
        out[k + 1] += u[k] @ Q[k].T
    return out


def affine_backward(P, Q, u, zT):
    """Batched backward recursion z_k = P_k z_{k+1} + Q_k u_k.

    Index convention matches affine_forward: P_k and Q_k belong to the step
    from t_{k+1} down to t_k and multiply the state at t_{k+1} and the
    record increment of step k.  Returns (n+1, R, M).
    """
    n = P.shape[0]
    R, M = zT.shape
    out = np.empty((n + 1, R, M))
    out[n] = zT
    for k in range(n - 1, -1, -1):
        np.matmul(out[k + 1], P[k].T, out=out[k])
        out[k] += u[k] @ Q[k].T
    return out
