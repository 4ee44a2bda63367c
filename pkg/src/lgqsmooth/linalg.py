"""Small dense linear-algebra helpers: Lyapunov solves, stability and
positivity predicates, and Riccati steady states by time-marching."""

from dataclasses import dataclass

import numpy as np

from . import _core
from .errors import NoConvergence, NonFiniteValue, NotHurwitz, ShapeMismatch, Singular

__all__ = [
    "solve_lyapunov",
    "is_hurwitz",
    "is_psd",
    "regularized_inverse",
    "steady_riccati",
    "RiccatiResult",
]


def _square(A, name="matrix"):
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ShapeMismatch(f"{name} must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise NonFiniteValue(f"{name} contains non-finite entries")
    return A


def is_hurwitz(A, tol=1e-12):
    """True if every eigenvalue of A has real part < -tol."""
    A = _square(A)
    return bool(np.max(np.linalg.eigvals(A).real) < -tol)


def is_psd(S, tol=1e-9):
    """True if S is symmetric (to tol) with min eigenvalue >= -tol."""
    S = _square(S)
    if np.max(np.abs(S - S.T)) > tol * (1.0 + np.max(np.abs(S))):
        return False
    return bool(np.min(np.linalg.eigvalsh(0.5 * (S + S.T))) >= -tol)


def _lyapunov_closed_2x2(A, rhs):
    # -A Q - Q A^T = rhs for 2x2 Hurwitz A: det(A) > 0, tr(A) < 0, so the
    # denominator below is strictly positive.
    det = A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]
    tr = A[0, 0] + A[1, 1]
    B = A - tr * np.eye(2)
    Q = (det * rhs + B @ rhs @ B.T) / (-2.0 * tr * det)
    return 0.5 * (Q + Q.T)


def _lyapunov_kron(A, rhs):
    # vec(A Q + Q A^T) = (A (x) I + I (x) A) vec(Q) in row-major vec order
    M = A.shape[0]
    eye = np.eye(M)
    coeff = np.kron(A, eye) + np.kron(eye, A)
    try:
        q = np.linalg.solve(coeff, -rhs.reshape(-1))
    except np.linalg.LinAlgError as err:
        raise Singular(f"Lyapunov system is singular: {err}") from None
    Q = q.reshape(M, M)
    return 0.5 * (Q + Q.T)


def solve_lyapunov(A, rhs):
    """Solve -A Q - Q A^T = rhs for symmetric Q, with A Hurwitz.

    Dimension 2 uses the closed-form solution; larger systems solve the
    vectorized linear system.  The residual is checked against
    1e-10 * (1 + ||rhs||_F) before returning.
    """
    A = _square(A, "A")
    rhs = _square(rhs, "rhs")
    if A.shape != rhs.shape:
        raise ShapeMismatch(f"A and rhs must have matching shapes, got {A.shape} and {rhs.shape}")
    if not is_hurwitz(A):
        raise NotHurwitz("drift matrix has an eigenvalue with non-negative real part")
    Q = _lyapunov_closed_2x2(A, rhs) if A.shape[0] == 2 else _lyapunov_kron(A, rhs)
    resid = np.linalg.norm(-A @ Q - Q @ A.T - rhs)
    if resid > 1e-10 * (1.0 + np.linalg.norm(rhs)):
        raise Singular(f"Lyapunov residual {resid:.3e} exceeds tolerance")
    return Q


def regularized_inverse(S, jitter=0.0, cond_threshold=1e10):
    """Invert a symmetric matrix, adding jitter * I first if its condition
    number exceeds cond_threshold.  Returns (inverse, jittered)."""
    S = _square(S)
    jittered = False
    cond = np.linalg.cond(S)
    if not np.isfinite(cond) or cond > cond_threshold:
        if jitter <= 0.0:
            raise Singular(f"matrix condition {cond:.3e} exceeds {cond_threshold:.1e} and no jitter given")
        S = S + jitter * np.eye(S.shape[0])
        jittered = True
    try:
        inv = np.linalg.inv(S)
    except np.linalg.LinAlgError as err:
        raise Singular(str(err)) from None
    return 0.5 * (inv + inv.T), jittered


@dataclass
class RiccatiResult:
    """Stationary covariance with convergence diagnostics.

    value: the stationary matrix found by time-marching.
    residual: Frobenius norm of the flow's right-hand side at value.
    steps: RK4 steps taken.
    stabilizing: whether the closed-loop drift at value is Hurwitz.
    closed_loop: the closed-loop drift matrix itself.
    """

    value: np.ndarray
    residual: float
    steps: int
    stabilizing: bool
    closed_loop: np.ndarray


def steady_riccati(A, D, C, Gamma, sign, *, dt=0.01, tol=1e-10, consec=100,
                   max_horizon=1e4, V0=None):
    """Stationary point of the covariance Riccati flow by time-marching.

    For sign=+1 this is the forward (filtering) flow
        dV/dt = A V + V A^T + D - K K^T,  K = V C^T + Gamma^T,
    and for sign=-1 the time-reversed (retrofiltering) flow, which has the
    drift negated and K = V C^T - Gamma^T.  A fixed point of one RK4 step is
    a zero of the right-hand side, so the converged residual is the true
    stationary residual, monitored until it stays below tol for ``consec``
    consecutive steps.

    Raises NoConvergence when the horizon is exhausted; the exception keeps
    the final and mid-horizon iterates so callers can tell divergence from
    slow relaxation.
    """
    A = _square(A, "A")
    D = _square(D, "D")
    C = np.asarray(C, dtype=np.float64)
    Gamma = np.asarray(Gamma, dtype=np.float64)
    if C.ndim != 2 or C.shape[1] != A.shape[0]:
        raise ShapeMismatch(f"C must be (L, {A.shape[0]}), got {C.shape}")
    if Gamma.shape != C.shape:
        raise ShapeMismatch(f"Gamma must match C shape {C.shape}, got {Gamma.shape}")
    if sign not in (1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign}")
    M = A.shape[0]
    if V0 is None:
        V0 = np.eye(M) * max(1.0, float(np.linalg.norm(D)))
    A_eff = A if sign == 1 else -A
    Gt = sign * Gamma.T
    max_steps = int(np.ceil(max_horizon / dt))
    V, status, steps, resid, V_mid = _core.rk4_cov_converge(
        A_eff, D, C, Gt, V0, dt, max_steps, tol, consec
    )
    if status != _core.CONVERGED:
        kind = "non-finite values" if status == _core.NON_FINITE else "no stationary point"
        raise NoConvergence(
            f"Riccati time-marching: {kind} within horizon {max_horizon:g} "
            f"(residual {resid:.3e})",
            final=V, residual=resid, mid=V_mid, steps=steps,
        )
    K = V @ C.T + Gt
    closed_loop = A_eff - K @ C
    return RiccatiResult(
        value=V,
        residual=resid,
        steps=steps,
        stabilizing=is_hurwitz(closed_loop, tol=0.0),
        closed_loop=closed_loop,
    )
