"""Filtering, retrofiltering, and smoothing for linear Gaussian systems.

All estimators share one structure: a deterministic, record-independent
covariance pass (RK4 on a Riccati flow) and a linear mean recursion driven
by the stored record increments (explicit Euler, matching the Ito
convention of the record).

The quantum filter conditions on the observed channel only,

    dV_F/dt = A V_F + V_F A^T + D - K+[V_F] K+[V_F]^T,
    d<x>_F  = A <x>_F dt + K+[V_F] (y_o dt - C_o <x>_F dt),

with K+-[V] = V C_o^T +- Gamma_o^T.  The retrofilter propagates the
Gaussian effect of the future record backward; because its variance starts
infinite at the final time it is carried in information form.  Subtracting
the true covariance V_T ("haloing") turns the quantum problem into a
classical one: Lam = (V_R + V_T)^{-1} obeys the backward flow

    -dLam/dt = Abar^T Lam + Lam Abar - Lam Dbar Lam + C_o^T C_o,
    Abar = A - Gamma_o^T C_o - V_T C_o^T C_o,
    Dbar = K+_o[V_T] K+_o[V_T]^T + K+_u[V_T] K+_u[V_T]^T - K+_o[V_T] K+_o[V_T]^T
         = K+_u[V_T] K+_u[V_T]^T,

with Lam(T) = 0, alongside z = Lam <x>_R which needs no inversion:

    -dz/dt = (Abar^T - Lam Dbar) z + (C_o^T - Lam K+_o[V_T]) y_o.

The smoothed state combines filter and retrofilter through the same
subtraction: with Vh_F = V_F - V_T,

    V_S  = (I + Vh_F Lam)^{-1} Vh_F + V_T,
    <x>_S = (I + Vh_F Lam)^{-1} (<x>_F + Vh_F z),

which is the classical product rule applied to the haloed moments, written
so that neither Vh_F(0) = 0 nor Lam(T) = 0 needs special handling.  The
smoothed-weighted-variance (SWV) state instead combines the raw quantum
moments by the classical rule; it may violate the physicality bound.

Setting V_T = 0 everywhere reduces every formula to its classical
counterpart; `classical_filter` / `classical_retrofilter` /
`classical_smoother` implement that route independently (explicit
inversions rather than the solve-based forms) so the two can be checked
against each other.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _core
from .errors import (
    IdentityViolation,
    NonFiniteValue,
    ShapeMismatch,
    SingularCombination,
)
from .trajectory import TimeGrid, true_cov_half_grid

__all__ = [
    "FilterOutput",
    "RetrofilterOutput",
    "SmootherOutput",
    "EstimationRun",
    "classical_filter",
    "classical_retrofilter",
    "classical_smoother",
    "quantum_filter",
    "haloed_retrofilter",
    "lgq_smoother",
    "swv_state",
    "run_estimation",
]

logger = logging.getLogger(__name__)

# condition-number ceiling for explicitly inverting the information matrix
_COND_MAX = 1e10
# window used by the dual-route retrofilter verification, in time units
_VERIFY_WINDOW = 1.0


@dataclass
class FilterOutput:
    """Filtered moments on a grid, plus the innovation sequence.

    means: (n+1, M); cov: (n+1, M, M); innovations: (n, L) record residuals
    y dt - C <x>_F dt.  For quantum runs ``vt`` carries the true covariance
    on the same grid (None for classical runs).
    """

    grid: TimeGrid
    means: np.ndarray
    cov: np.ndarray
    innovations: np.ndarray
    vt: Optional[np.ndarray] = None


@dataclass
class RetrofilterOutput:
    """Backward (retrofiltered) effect in information form.

    lam: (n+1, M, M) information matrix, zero at the final time.
    z: (n+1, M) information-weighted mean.
    means / cov_r: the explicit moments lam^{-1} z and lam^{-1} - V_T,
    NaN-filled where lam is too ill-conditioned to invert.
    vt: true covariance on the grid (None for classical runs).
    """

    grid: TimeGrid
    lam: np.ndarray
    z: np.ndarray
    means: np.ndarray
    cov_r: np.ndarray
    vt: Optional[np.ndarray] = None
    verify_error: Optional[float] = None


@dataclass
class SmootherOutput:
    """Smoothed and SWV moments on the estimation grid."""

    grid: TimeGrid
    means: np.ndarray
    cov: np.ndarray
    swv_means: np.ndarray
    swv_cov: np.ndarray


@dataclass
class EstimationRun:
    """Aligned output of the full estimation pipeline with diagnostics."""

    grid: TimeGrid
    filtered: FilterOutput
    retro: RetrofilterOutput
    smoother: SmootherOutput
    vt: np.ndarray
    purity_true: np.ndarray = field(default=None)  # type: ignore[assignment]
    purity_filtered: np.ndarray = field(default=None)  # type: ignore[assignment]
    purity_smoothed: np.ndarray = field(default=None)  # type: ignore[assignment]
    purity_swv: np.ndarray = field(default=None)  # type: ignore[assignment]
    physical_smoothed: np.ndarray = field(default=None)  # type: ignore[assignment]
    physical_swv: np.ndarray = field(default=None)  # type: ignore[assignment]


def _sym(path):
    return 0.5 * (path + np.swapaxes(path, -1, -2))


def _check_record(record, L, what="record"):
    if record.y_o_dt.shape[1] != L:
        raise ShapeMismatch(f"{what} has {record.y_o_dt.shape[1]} channels, expected {L}")


def _mean_pass(A, C, kick_path, ydt, x0, dt):
    # x_{k+1} = x_k + A x_k dt + K_k (y_k dt - C x_k dt), K at left endpoints
    n = ydt.shape[0]
    M = A.shape[0]
    K = kick_path[:-1]
    P = np.eye(M) + dt * (A - K @ C)
    return _core.affine_forward(P, K, ydt, x0)


def _info_mean_pass(abar_t, dbar, lam, kick_o, Ct, ydt, dt):
    # z_k = z_{k+1} + dt (Abar^T - Lam Dbar) z_{k+1} + (C^T - Lam G) y_k dt,
    # coefficients at the right endpoint t_{k+1}
    n = ydt.shape[0]
    M = abar_t.shape[-1]
    lam_r = lam[1:]
    if abar_t.ndim == 2:
        abar_r = np.broadcast_to(abar_t, (n, M, M))
    else:
        abar_r = abar_t[1:]
    if dbar.ndim == 2:
        dbar_r = np.broadcast_to(dbar, (n, M, M))
    else:
        dbar_r = dbar[1:]
    G_r = np.broadcast_to(kick_o, (n,) + kick_o.shape[-2:]) if kick_o.ndim == 2 else kick_o[1:]
    P = np.eye(M) + dt * (abar_r - lam_r @ dbar_r)
    Q = Ct - lam_r @ G_r
    return _core.affine_backward(P, Q, ydt, np.zeros(ydt.shape[1:-1] + (M,)))


def _info_moments(lam, z, vt=None):
    n1, M, _ = lam.shape
    means = np.full((n1, M), np.nan)
    cov_r = np.full((n1, M, M), np.nan)
    with np.errstate(all="ignore"):
        cond = np.linalg.cond(lam)
    ok = np.isfinite(cond) & (cond < _COND_MAX)
    if np.any(ok):
        inv = np.linalg.inv(lam[ok])
        inv = _sym(inv)
        cov_r[ok] = inv if vt is None else inv - vt[ok]
        means[ok] = np.linalg.solve(lam[ok], z[ok][..., None])[..., 0]
    return means, cov_r


def classical_filter(A, E, C, Gamma, record, *, x0=None, V0=None):
    """Kalman-Bucy filter with correlated process/measurement noise.

    Parameters
    ----------
    A : (M, M) drift.
    E : (M, P) process-noise input; the diffusion is D = E E^T.
    C : (L, M) measurement matrix; the record increments are
        y dt = C x dt + dv_m with unit-intensity measurement noise.
    Gamma : (L, M) noise correlation, Gamma^T dt = E[ (E dv)(dv_m)^T ].
    record : MeasurementRecord with y_o_dt of width L.
    x0, V0 : initial mean and covariance (default zero mean, identity).
    """
    A = np.asarray(A, dtype=np.float64)
    E = np.asarray(E, dtype=np.float64)
    C = np.atleast_2d(np.asarray(C, dtype=np.float64))
    Gamma = np.atleast_2d(np.asarray(Gamma, dtype=np.float64))
    M = A.shape[0]
    _check_record(record, C.shape[0])
    grid = record.grid
    x0 = np.zeros(M) if x0 is None else np.asarray(x0, dtype=np.float64)
    V0 = np.eye(M) if V0 is None else np.asarray(V0, dtype=np.float64)
    D = E @ E.T
    cov = _core.rk4_cov_grid(A, D, C, Gamma.T, V0, grid.dt, grid.n_steps)
    kick_path = cov @ C.T + Gamma.T
    means = _mean_pass(A, C, kick_path, record.y_o_dt, x0, grid.dt)
    innovations = record.y_o_dt - means[:-1] @ C.T * grid.dt
    return FilterOutput(grid=grid, means=means, cov=cov, innovations=innovations)


def _noise_factor(Dbar, name):
    # symmetric PSD factor F with F F^T = Dbar
    w, U = np.linalg.eigh(0.5 * (Dbar + Dbar.T))
    if np.min(w) < -1e-9 * max(1.0, np.max(np.abs(w))):
        raise ShapeMismatch(f"{name} is not positive semidefinite (min eig {np.min(w):.3e})")
    return U * np.sqrt(np.clip(w, 0.0, None))


def classical_retrofilter(A, E, C, Gamma, record):
    """Backward pass conditioning on the future record only.

    Propagates the information matrix Lam = V_R^{-1} and z = Lam <x>_R
    backward from zero at the final time, so the infinite final variance
    never appears explicitly.
    """
    A = np.asarray(A, dtype=np.float64)
    E = np.asarray(E, dtype=np.float64)
    C = np.atleast_2d(np.asarray(C, dtype=np.float64))
    Gamma = np.atleast_2d(np.asarray(Gamma, dtype=np.float64))
    _check_record(record, C.shape[0])
    grid = record.grid
    M = A.shape[0]
    D = E @ E.T
    abar = A - Gamma.T @ C
    dbar = D - Gamma.T @ Gamma
    F = _noise_factor(dbar, "D - Gamma^T Gamma")
    CtC = C.T @ C
    # the information flow in reversed time is itself a Riccati flow
    lam = _core.rk4_cov_grid(abar.T, CtC, F.T, np.zeros((M, F.shape[1])),
                             np.zeros((M, M)), grid.dt, grid.n_steps)[::-1].copy()
    z = _info_mean_pass(abar.T, dbar, lam, Gamma.T, C.T, record.y_o_dt, grid.dt)
    means, cov_r = _info_moments(lam, z)
    return RetrofilterOutput(grid=grid, lam=lam, z=z, means=means, cov_r=cov_r)


def classical_smoother(filtered, retro):
    """Fixed-interval smoother combining filter and retrofilter moments.

    Uses the explicit product rule V_S = (V_F^{-1} + V_R^{-1})^{-1} and
    <x>_S = V_S (V_F^{-1} <x>_F + V_R^{-1} <x>_R) with direct matrix
    inversions; deliberately a different numerical route from lgq_smoother
    so the two can be compared.
    """
    vf_inv = np.linalg.inv(filtered.cov)
    vs = np.linalg.inv(vf_inv + retro.lam)
    vs = _sym(vs)
    rhs = (vf_inv @ filtered.means[..., None] + retro.z[..., None])[..., 0]
    xs = (vs @ rhs[..., None])[..., 0]
    return xs, vs


def _halo_coefficients(system, vt_half):
    # per-half-step kicks and derived coefficients of the haloed flows
    Ko = vt_half @ system.C_o.T + system.Gamma_o.T
    Ku = vt_half @ system.C_u.T + system.Gamma_u.T
    d_halo = Ko @ np.swapaxes(Ko, -1, -2) + Ku @ np.swapaxes(Ku, -1, -2)
    CtC = system.C_o.T @ system.C_o
    abar = (system.A - system.Gamma_o.T @ system.C_o) - vt_half @ CtC
    return Ko, Ku, d_halo, abar, CtC


def quantum_filter(system, record, *, x0=None, V0=None, VT0=None, vt_half=None,
                   verify=True, identity_tol=1e-8):
    """Quantum filtered state conditioned on the observed record.

    The covariance follows the Riccati flow with the observed channel's
    kick; the diffusion D enters directly.  With ``verify`` (default) the
    same state is recomputed through the haloed route -- integrating
    Vh_F = V_F - V_T with the true covariance as a time-dependent
    coefficient -- and the two are required to agree within
    ``identity_tol`` in covariance and mean, else IdentityViolation.

    V_T starts from VT0 (default: V0, i.e. filter and true state share the
    initial condition); ``vt_half`` may supply a precomputed half-step
    true-covariance path.
    """
    grid = record.grid
    M = system.dim
    _check_record(record, system.C_o.shape[0])
    x0 = np.zeros(M) if x0 is None else np.asarray(x0, dtype=np.float64)
    V0 = system.vacuum() if V0 is None else np.asarray(V0, dtype=np.float64)
    if vt_half is None:
        vt0 = V0 if VT0 is None else np.asarray(VT0, dtype=np.float64)
        vt_half = true_cov_half_grid(system, vt0, grid)
    vt = vt_half[::2]
    n = grid.n_steps
    dt = grid.dt
    cov = _core.rk4_cov_grid(system.A, system.D, system.C_o, system.Gamma_o.T, V0, dt, n)
    kick_path = cov @ system.C_o.T + system.Gamma_o.T
    means = _mean_pass(system.A, system.C_o, kick_path, record.y_o_dt, x0, dt)
    innovations = record.y_o_dt - means[:-1] @ system.C_o.T * dt
    if verify:
        Ko, _, d_halo, _, _ = _halo_coefficients(system, vt_half)
        L_o = system.C_o.shape[0]
        C_half = np.broadcast_to(system.C_o, (2 * n + 1, L_o, M))
        A_half = np.broadcast_to(system.A, (2 * n + 1, M, M))
        halo = _core.rk4_cov_grid_tpath(A_half, d_halo, C_half, Ko, V0 - vt_half[0], dt, n, False)
        cov2 = halo + vt
        cov_err = float(np.max(np.sqrt(np.sum((cov - cov2) ** 2, axis=(1, 2)))))
        kick2 = cov2 @ system.C_o.T + system.Gamma_o.T
        means2 = _mean_pass(system.A, system.C_o, kick2, record.y_o_dt, x0, dt)
        mean_err = float(np.max(np.abs(means - means2)))
        err = max(cov_err, mean_err)
        if not np.isfinite(err) or err > identity_tol:
            raise IdentityViolation(
                f"direct and haloed filter forms disagree: cov {cov_err:.3e}, mean {mean_err:.3e}",
                max_error=err,
            )
    return FilterOutput(grid=grid, means=means, cov=cov, innovations=innovations, vt=vt)


def _retro_information_path(system, vt_half, dt, n):
    # the backward information flow is the generic covariance flow with
    # drift Abar^T, diffusion C_o^T C_o, and quadratic term Lam Dbar Lam
    # factored through Dbar = K+_u K+_u^T
    M = system.dim
    Ko, Ku, _, abar, CtC = _halo_coefficients(system, vt_half)
    L_u = system.C_u.shape[0]
    abar_t = np.ascontiguousarray(np.swapaxes(abar, -1, -2))
    d_half = np.broadcast_to(CtC, (2 * n + 1, M, M))
    c_half = np.ascontiguousarray(np.swapaxes(Ku, -1, -2))
    gt_half = np.zeros((2 * n + 1, M, L_u))
    lam = _core.rk4_cov_grid_tpath(abar_t, d_half, c_half, gt_half,
                                   np.zeros((M, M)), dt, n, True)
    min_eig = float(np.min(np.linalg.eigvalsh(lam)))
    if min_eig < -1e-9 * max(1.0, float(np.max(np.abs(lam)))):
        logger.warning("retrofilter information matrix lost positivity (min eig %.3e)", min_eig)
    dbar_full = Ku[::2] @ np.swapaxes(Ku[::2], -1, -2)
    return lam, abar_t, dbar_full, Ko


def haloed_retrofilter(system, record, *, VT0=None, vt_half=None, verify=True,
                       verify_tol=1e-6):
    """Quantum retrofiltered effect, propagated in haloed information form.

    Integrates Lam = (V_R + V_T)^{-1} and z = Lam <x>_R backward from zero
    at the final time.  Lam must stay PSD; numerical violations are logged,
    not clipped.  With ``verify`` the effect variance V_R = Lam^{-1} - V_T
    is re-derived by directly integrating the retrofilter Riccati equation
    on a sub-grid where Lam is well conditioned, and the two routes must
    agree within ``verify_tol`` (relative Frobenius), else
    IdentityViolation.
    """
    grid = record.grid
    _check_record(record, system.C_o.shape[0])
    if vt_half is None:
        vt0 = system.vacuum() if VT0 is None else np.asarray(VT0, dtype=np.float64)
        vt_half = true_cov_half_grid(system, vt0, grid)
    vt = vt_half[::2]
    n = grid.n_steps
    dt = grid.dt
    lam, abar_t, dbar_full, Ko = _retro_information_path(system, vt_half, dt, n)
    z = _info_mean_pass(abar_t[::2], dbar_full, lam, Ko[::2], system.C_o.T,
                        record.y_o_dt, dt)
    means, cov_r = _info_moments(lam, z, vt)
    verify_error = None
    if verify:
        verify_error = _verify_retro_identity(system, grid, lam, vt, verify_tol)
    return RetrofilterOutput(grid=grid, lam=lam, z=z, means=means, cov_r=cov_r,
                             vt=vt, verify_error=verify_error)


def _verify_retro_identity(system, grid, lam, vt, tol):
    # re-derive V_R by direct backward integration of its own Riccati flow
    # on the best-conditioned stretch of the grid, and compare;  V_R blows
    # up approaching the final time, where the direct route is too steep
    # for fixed-step RK4, so the window must sit where Lam has flattened out
    with np.errstate(all="ignore"):
        cond = np.linalg.cond(lam)
    finite = np.isfinite(cond)
    if not np.any(finite):
        return None
    ok = finite & (cond < max(1e3, 10.0 * float(np.min(cond[finite]))))
    if not np.any(ok):
        return None
    t1 = int(np.max(np.nonzero(ok)[0]))
    n_sub = min(t1, max(10, int(round(_VERIFY_WINDOW / grid.dt))))
    idx = np.arange(t1 - n_sub, t1 + 1)
    if not np.all(ok[idx]):
        idx = idx[ok[idx]]
        if idx.size < 2:
            return None
        t1 = int(idx[-1])
        n_sub = int(idx[-1] - idx[0])
        idx = np.arange(t1 - n_sub, t1 + 1)
    lam_inv = np.linalg.inv(lam[idx])
    vr_info = _sym(lam_inv) - vt[idx]
    direct = _core.rk4_cov_grid(-system.A, system.D, system.C_o, -system.Gamma_o.T,
                                vr_info[-1], grid.dt, n_sub)
    vr_direct = direct[::-1]
    num = np.sqrt(np.sum((vr_direct - vr_info) ** 2, axis=(1, 2)))
    den = np.sqrt(np.sum(vr_info ** 2, axis=(1, 2)))
    rel = float(np.max(num / np.maximum(den, 1e-300)))
    if not np.isfinite(rel) or rel > tol:
        raise IdentityViolation(
            f"information-form and direct retrofilter variances disagree "
            f"(max relative error {rel:.3e} over {n_sub} steps)",
            max_error=rel,
        )
    return rel


def _swv_series(filtered, retro, vt):
    # SWV: classical product rule on the raw quantum moments, using
    # (Lam^{-1} - V_T)^{-1} = (I - Lam V_T)^{-1} Lam, which extends
    # continuously through singular Lam (near the final time it gives the
    # filtered state back)
    lam = retro.lam
    eye = np.eye(lam.shape[-1])
    T = eye - lam @ vt
    try:
        lam_cl = np.linalg.solve(T, lam)
        w = np.linalg.solve(T, retro.z[..., None])[..., 0]
    except np.linalg.LinAlgError:
        raise SingularCombination(
            "retrofiltered effect variance is singular; SWV combination undefined"
        ) from None
    lam_cl = _sym(lam_cl)
    U = eye + filtered.cov @ lam_cl
    try:
        swv_cov = _sym(np.linalg.solve(U, filtered.cov))
        rhs = filtered.means + (filtered.cov @ w[..., None])[..., 0]
        swv_means = np.linalg.solve(U, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError:
        raise SingularCombination("filter/retrofilter SWV combination is singular") from None
    return swv_means, swv_cov


def swv_state(filtered, retro):
    """Smoothed-weighted-variance state: the classical combination rule
    applied to the quantum filtered and retrofiltered moments.

    Returns (means, cov) series.  The result is a valid estimator of the
    true mean but need not satisfy the quantum physicality bound.
    """
    vt = filtered.vt if filtered.vt is not None else retro.vt
    if vt is None:
        vt = np.zeros_like(filtered.cov)
    return _swv_series(filtered, retro, vt)


def lgq_smoother(filtered, retro):
    """Quantum-state smoother combining a quantum filter and retrofilter.

    Applies the classical smoothing rule to the haloed moments (filtered
    and retrofiltered with the true covariance subtracted), then adds the
    true covariance back:

        V_S = (I + Vh_F Lam)^{-1} Vh_F + V_T .

    The solve-based form needs no explicit inversion, so the endpoints --
    where Vh_F or Lam vanish and the smoothed state reduces to the
    filtered state -- need no special casing.  Also computes the SWV
    series; returns a SmootherOutput.
    """
    vt = filtered.vt if filtered.vt is not None else retro.vt
    if vt is None:
        vt = np.zeros_like(filtered.cov)
    vh_f = filtered.cov - vt
    lam = retro.lam
    S = np.eye(lam.shape[-1]) + vh_f @ lam
    try:
        vh_s = _sym(np.linalg.solve(S, vh_f))
        rhs = filtered.means + (vh_f @ retro.z[..., None])[..., 0]
        means = np.linalg.solve(S, rhs[..., None])[..., 0]
    except np.linalg.LinAlgError:
        raise SingularCombination(
            "filtered-minus-true covariance cannot be combined with the retrofilter"
        ) from None
    if not np.all(np.isfinite(vh_s)):
        raise NonFiniteValue("smoothed covariance contains non-finite entries")
    swv_means, swv_cov = _swv_series(filtered, retro, vt)
    return SmootherOutput(grid=filtered.grid, means=means, cov=vh_s + vt,
                          swv_means=swv_means, swv_cov=swv_cov)


def _purity_series(cov_path, hbar):
    n_modes = cov_path.shape[-1] // 2
    with np.errstate(all="ignore"):
        det = np.linalg.det(cov_path)
        p = (hbar / 2.0) ** n_modes / np.sqrt(det)
    p[~np.isfinite(p) | (det <= 0)] = np.nan
    return p


def _physical_series(cov_path, hbar, sigma, tol=1e-9):
    H = cov_path + 1j * (hbar / 2.0) * sigma
    eigs = np.linalg.eigvalsh(H)
    return np.min(eigs, axis=-1) >= -tol


def run_estimation(system, record, *, x0=None, V0=None, VT0=None, verify=True,
                   filter_tol=1e-8, retro_tol=1e-6):
    """Full pipeline: quantum filter, retrofilter, smoother, diagnostics.

    Shares one half-step true-covariance integration across the passes and
    assembles per-step purities and physicality flags for the smoothed and
    SWV states.  filter_tol and retro_tol bound the dual-route identity
    checks when ``verify`` is on.
    """
    grid = record.grid
    V0 = system.vacuum() if V0 is None else np.asarray(V0, dtype=np.float64)
    vt0 = V0 if VT0 is None else np.asarray(VT0, dtype=np.float64)
    vt_half = true_cov_half_grid(system, vt0, grid)
    filtered = quantum_filter(system, record, x0=x0, V0=V0, vt_half=vt_half,
                              verify=verify, identity_tol=filter_tol)
    retro = haloed_retrofilter(system, record, vt_half=vt_half, verify=verify,
                               verify_tol=retro_tol)
    smoother = lgq_smoother(filtered, retro)
    vt = vt_half[::2]
    hbar = system.hbar
    sigma = system.sigma
    return EstimationRun(
        grid=grid,
        filtered=filtered,
        retro=retro,
        smoother=smoother,
        vt=vt,
        purity_true=_purity_series(vt, hbar),
        purity_filtered=_purity_series(filtered.cov, hbar),
        purity_smoothed=_purity_series(smoother.cov, hbar),
        purity_swv=_purity_series(smoother.swv_cov, hbar),
        physical_smoothed=_physical_series(smoother.cov, hbar, sigma),
        physical_swv=_physical_series(smoother.swv_cov, hbar, sigma),
    )
