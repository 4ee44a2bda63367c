"""Stationary conditioned states and their behaviour at extreme efficiencies.

For a time-invariant system every conditioned variance relaxes to a fixed
point of its own Riccati flow: the true-state variance V_T (all channels),
the filtered variance V_F (observed channel only), and the retrodictive
information Lam_R, obtained by marching the backward information flow until
it flattens out.  The stationary smoothed and SWV variances then follow
from the same combination rules used along trajectories.

Two asymptotic regimes admit closed forms for the on-threshold OPO.  At
vanishing observed efficiency the filtered purity obeys
P_F = sqrt(2|cos theta_o|) eta_o^{1/4} and classical smoothing of the
observed record improves it by exactly sqrt(2).  Near unit observed
efficiency the gap Q = V_F - V_T solves the Lyapunov equation
-Abar Q - Q Abar^T = K+_u[V_T] K+_u[V_T]^T and both Q and the relative
purity recovery shrink linearly with the unobserved efficiency.

Variances that have no stationary point (an unmonitored marginal axis)
get +inf on the run-away diagonal entries and a purity of exactly 0; the
report carries a ``stationary`` flag instead of raising.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePhase, NoConvergence
from .linalg import is_hurwitz, solve_lyapunov, steady_riccati
from .model import LGQSystem, OPOParams, build_opo, kick

__all__ = [
    "SteadyStateReport",
    "AsymptoticPrediction",
    "HighEfficiencyFit",
    "steady_report",
    "low_efficiency_formulas",
    "high_efficiency_Q",
    "rpr_high_efficiency_check",
]

logger = logging.getLogger(__name__)

# a diagonal entry counts as divergent when it keeps growing through the
# second half of the allotted horizon and has clearly left the O(hbar) scale
_GROWTH_FACTOR = 1.5
_GROWTH_SCALE = 10.0


def _sym(m):
    return 0.5 * (m + m.swapaxes(-1, -2))


@dataclass(frozen=True)
class SteadyStateReport:
    """Stationary variances, purities, and purity recovery for one system.

    Divergent variance entries are +inf; purities of states with any
    divergent entry are 0.  ``rpr`` is NaN whenever ``rpr_defined`` is
    False (pure filtered state, or no stationary solution).
    """

    v_t: np.ndarray
    v_f: np.ndarray
    lam_r: np.ndarray
    v_s: np.ndarray
    v_swv: np.ndarray
    p_t: float
    p_f: float
    p_s: float
    p_swv: float
    rpr: float
    rpr_defined: bool
    abar_hurwitz: bool
    closed_loop_hurwitz: bool
    stationary: bool
    hbar: float
    notes: tuple = ()

    @property
    def v_r(self):
        """Stationary retrodictive variance, inv(lam_r) - v_t.

        All-inf when the information matrix is singular or was never
        computed (the retrodictive variance is unbounded in some
        direction).
        """
        lam = self.lam_r
        if not np.all(np.isfinite(lam)):
            return np.full_like(lam, np.inf)
        with np.errstate(all="ignore"):
            cond = np.linalg.cond(lam)
        if not np.isfinite(cond) or cond > 1e12:
            return np.full_like(lam, np.inf)
        return _sym(np.linalg.inv(lam)) - self.v_t


def _purity_or_zero(V, hbar):
    if V is None or not np.all(np.isfinite(V)):
        return 0.0
    det = float(np.linalg.det(V))
    if det <= 0.0:
        return 0.0
    n_modes = V.shape[0] // 2
    return float((hbar / 2.0) ** n_modes / np.sqrt(det))


def _steady_or_divergent(A, D, C, Gamma, sign, scale, name, kw):
    """steady_riccati with divergence diagnosis instead of an exception.

    Returns (value, converged, note).  On non-convergence, diagonal
    entries still growing between the mid and final iterate are set to
    +inf; anything else is left at the final iterate for inspection.
    """
    try:
        res = steady_riccati(A, D, C, Gamma, sign, **kw)
        return res.value, True, None
    except NoConvergence as exc:
        V = np.array(exc.final, dtype=float)
        mid = np.asarray(exc.mid, dtype=float)
        runaway = []
        for i in range(V.shape[0]):
            if not np.isfinite(V[i, i]) or (
                V[i, i] > _GROWTH_FACTOR * abs(mid[i, i])
                and V[i, i] > _GROWTH_SCALE * scale
            ):
                V[i, i] = np.inf
                runaway.append(i)
        if runaway:
            note = f"{name}: no stationary point; divergent axes {tuple(runaway)}"
        else:
            note = f"{name}: no stationary point within horizon (residual {exc.residual:.3e})"
        return V, False, note


def steady_report(system, *, dt=0.01, tol=1e-10, consec=100, max_horizon=1e4):
    """Stationary report for one system.

    The true and filtered variances come from forward Riccati marching,
    the retrodictive information from backward marching started at zero,
    and the smoothed/SWV variances from the usual combinations.  No
    exception is raised for non-stationary systems; see the report's
    ``stationary`` flag and ``notes``.
    """
    M = system.dim
    hbar = system.hbar
    kw = dict(dt=dt, tol=tol, consec=consec, max_horizon=max_horizon)
    scale = max(1.0, hbar)
    C_all, G_all = system.stacked_channels()

    v_t, t_ok, t_note = _steady_or_divergent(
        system.A, system.D, C_all, G_all, +1, scale, "true variance", kw)
    v_f, f_ok, f_note = _steady_or_divergent(
        system.A, system.D, system.C_o, system.Gamma_o, +1, scale, "filtered variance", kw)
    notes = [n for n in (t_note, f_note) if n]

    ctc = system.C_o.T @ system.C_o
    lam_r = np.full((M, M), np.nan)
    abar_hurwitz = False
    closed_loop_hurwitz = False
    if t_ok:
        abar = system.A - system.Gamma_o.T @ system.C_o - v_t @ ctc
        abar_hurwitz = is_hurwitz(abar)
        ku = kick(v_t, system.C_u, system.Gamma_u, +1)
        try:
            lam_r = steady_riccati(abar.T, ctc, ku.T, np.zeros_like(ku.T), +1,
                                   V0=np.zeros((M, M)), **kw).value
        except NoConvergence as exc:
            notes.append(f"retrodictive information: no stationary point "
                         f"(residual {exc.residual:.3e})")
    if f_ok:
        closed_loop = system.A - system.Gamma_o.T @ system.C_o - v_f @ ctc
        closed_loop_hurwitz = is_hurwitz(closed_loop)

    stationary = t_ok and f_ok and np.all(np.isfinite(lam_r))
    eye = np.eye(M)
    v_s = np.full((M, M), np.nan)
    v_swv = np.full((M, M), np.nan)
    if stationary:
        vh_f = v_f - v_t
        try:
            v_s = _sym(np.linalg.solve(eye + vh_f @ lam_r, vh_f)) + v_t
            t_mat = eye - lam_r @ v_t
            lam_cl = np.linalg.solve(t_mat, lam_r)
            v_swv = _sym(np.linalg.solve(eye + v_f @ lam_cl, v_f))
        except np.linalg.LinAlgError:
            notes.append("smoothed/SWV combination singular at stationarity")
            stationary = False
    else:
        # an axis the filter cannot pin down stays divergent under smoothing
        for i in range(M):
            if not np.isfinite(v_f[i, i]):
                v_s[i, i] = np.inf
                v_swv[i, i] = np.inf

    p_t = _purity_or_zero(v_t, hbar)
    p_f = _purity_or_zero(v_f, hbar)
    p_s = _purity_or_zero(v_s, hbar)
    p_swv = _purity_or_zero(v_swv, hbar)
    rpr_defined = bool(stationary and 0.0 < p_f < 1.0 - 1e-9)
    rpr = float((p_s - p_f) / (1.0 - p_f)) if rpr_defined else float("nan")

    return SteadyStateReport(
        v_t=v_t, v_f=v_f, lam_r=lam_r, v_s=v_s, v_swv=v_swv,
        p_t=p_t, p_f=p_f, p_s=p_s, p_swv=p_swv,
        rpr=rpr, rpr_defined=rpr_defined,
        abar_hurwitz=abar_hurwitz, closed_loop_hurwitz=closed_loop_hurwitz,
        stationary=bool(stationary), hbar=hbar, notes=tuple(notes),
    )


@dataclass(frozen=True)
class AsymptoticPrediction:
    """Closed-form predictions for one efficiency regime.

    ``values`` maps quantity names to numbers or matrices, ``formulas``
    to the algebraic expressions they came from.
    """

    regime: str
    values: dict
    formulas: dict


def low_efficiency_formulas(theta_o, eta_o, hbar=1.0):
    """Leading-order stationary matrices and purities as eta_o -> 0.

    Valid for the on-threshold OPO away from theta_o = +-pi/2.  The
    retrodictive variance has divergent p-entries at theta_o = 0 (a
    q-quadrature record carries no information about the damped
    quadrature backwards in time); those entries come back as +inf.
    """
    theta_o = float(theta_o)
    eta_o = float(eta_o)
    if not 0.0 < eta_o < 1.0:
        raise ValueError(f"eta_o must lie in (0, 1), got {eta_o:g}")
    c = np.cos(theta_o)
    s = np.sin(theta_o)
    if abs(c) < 1e-6:
        raise DegeneratePhase(
            f"theta_o = {theta_o:g} gives no q-quadrature information; "
            "the low-efficiency expansion does not exist")
    # the stationary equations fix the sign of the q-p correlations:
    # positive for the filter, negative for the retrofilter, flipping
    # with the quadrant of the homodyne phase
    sg = float(np.sign(s * c)) if s != 0.0 else 0.0
    root = eta_o ** -0.5
    half = hbar / 2.0
    v_f = half * np.array([
        [root / abs(c), sg * 0.5 * abs(s) * eta_o ** 0.5],
        [sg * 0.5 * abs(s) * eta_o ** 0.5, 0.5],
    ])
    if s == 0.0:
        v_r = half * np.array([[root / abs(c), np.inf], [np.inf, np.inf]])
    else:
        v_r = half * np.array([
            [root / abs(c), -sg * 2.0 * root / abs(s)],
            [-sg * 2.0 * root / abs(s), 2.0 / (s * s * eta_o)],
        ])
    # the SWV combination cancels the filter's and retrofilter's q-p
    # correlations at leading order, leaving an off-diagonal of order eta_o
    v_swv = half * np.array([
        [0.5 * root / abs(c), 0.0],
        [0.0, 0.5],
    ])
    p_f = float(np.sqrt(2.0 * abs(c)) * eta_o ** 0.25)
    p_swv = float(2.0 * np.sqrt(abs(c)) * eta_o ** 0.25)
    return AsymptoticPrediction(
        regime="low-efficiency",
        values={
            "V_F": v_f, "V_R": v_r, "V_SWV": v_swv,
            "P_F": p_f, "P_SWV": p_swv, "P_SWV_over_P_F": float(np.sqrt(2.0)),
        },
        formulas={
            "V_F": "(hbar/2) [[|sec t| e^-1/2, (1/2)|sin t| e^1/2], [., 1/2]]",
            "V_R": "(hbar/2) [[|sec t| e^-1/2, -2|csc t| e^-1/2], [., 2 csc^2 t e^-1]]",
            "V_SWV": "(hbar/2) [[(1/2)|sec t| e^-1/2, O(e)], [., 1/2]]",
            "P_F": "sqrt(2 |cos theta_o|) eta_o^{1/4}",
            "P_SWV": "2 sqrt(|cos theta_o|) eta_o^{1/4}",
            "P_SWV_over_P_F": "sqrt(2)",
        },
    )


def high_efficiency_Q(system, *, dt=0.01, tol=1e-10, consec=100, max_horizon=1e4):
    """Filtered-minus-true variance gap from the linearized fixed-point equation.

    Solves -Abar Q - Q Abar^T = K+_u[V_T] K+_u[V_T]^T at the stationary
    true variance; the right-hand side, and hence Q, carries an overall
    factor of the unobserved efficiency.  Raises NotHurwitz when Abar is
    not strictly stable.
    """
    kw = dict(dt=dt, tol=tol, consec=consec, max_horizon=max_horizon)
    C_all, G_all = system.stacked_channels()
    v_t = steady_riccati(system.A, system.D, C_all, G_all, +1, **kw).value
    ctc = system.C_o.T @ system.C_o
    abar = system.A - system.Gamma_o.T @ system.C_o - v_t @ ctc
    ku = kick(v_t, system.C_u, system.Gamma_u, +1)
    return solve_lyapunov(abar, ku @ ku.T)


@dataclass(frozen=True)
class HighEfficiencyFit:
    """Least-squares slope of RPR against eta_u, with residuals."""

    eta_u: np.ndarray
    rpr: np.ndarray
    slope: float
    max_relative_residual: float
    excluded: tuple = ()


def rpr_high_efficiency_check(base, eta_u_values, **steady_kw):
    """Fit RPR = c * eta_u over a set of small unobserved efficiencies.

    ``base`` is either OPOParams (rebuilt with eta_o = 1 - eta_u at each
    point) or a callable eta_u -> LGQSystem for other families.  Points
    with undefined RPR (a pure filtered state at eta_u = 0) are excluded
    from the fit and reported.
    """
    eta_u_values = [float(e) for e in eta_u_values]
    if any(e > 0.1 + 1e-12 for e in eta_u_values):
        raise ValueError("rpr_high_efficiency_check expects eta_u values <= 0.1")
    if callable(base):
        make = base
    else:
        def make(eu):
            return build_opo(OPOParams(theta_o=base.theta_o, theta_u=base.theta_u,
                                       eta_o=1.0 - eu, eta_u=eu, hbar=base.hbar))
    used, rprs, excluded = [], [], []
    for eu in eta_u_values:
        rep = steady_report(make(eu), **steady_kw)
        if rep.rpr_defined and np.isfinite(rep.rpr):
            used.append(eu)
            rprs.append(rep.rpr)
        else:
            excluded.append(eu)
    eta = np.asarray(used, dtype=float)
    rpr = np.asarray(rprs, dtype=float)
    if eta.size == 0:
        return HighEfficiencyFit(eta, rpr, float("nan"), float("nan"), tuple(excluded))
    slope = float(np.sum(rpr * eta) / np.sum(eta * eta))
    resid = float(np.max(np.abs(rpr - slope * eta) / np.maximum(np.abs(rpr), 1e-300)))
    return HighEfficiencyFit(eta, rpr, slope, resid, tuple(excluded))
