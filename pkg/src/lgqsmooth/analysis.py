"""Figure-level computations on top of the estimation and steady-state layers.

Stationary sweeps tabulate purities and the recovered-purity ratio over
homodyne phase pairs or over the observed efficiency; snapshot_states
collects every conditioned state at one instant together with its
one-standard-deviation Wigner contour; mc_consistency checks the error
covariance laws of the filter and smoother against a simulated ensemble.

Sweep cells and trajectory batches are independent work items.  Both
entry points accept a ``workers`` count and aggregate results keyed by
cell / batch index, so the output is identical however the work is
scheduled.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass

import numpy as np

from . import _core
from .errors import ShapeMismatch, SingularCovariance
from .estimation import (
    _info_mean_pass,
    _mean_pass,
    _retro_information_path,
    _sym,
    run_estimation,
)
from .model import GaussianState, OPOParams, build_opo, check_physical, wigner_contour
from .steady import steady_report
from .trajectory import (
    _CH_OBSERVED,
    _CH_UNOBSERVED,
    TimeGrid,
    _channel_rng,
    _euler_coefficients,
    detect_divergent_diagonals,
    true_cov_half_grid,
    unconditioned_variance,
)

__all__ = [
    "SweepResult",
    "StateSnapshot",
    "MCReport",
    "sweep_rpr",
    "efficiency_scan",
    "snapshot_states",
    "mc_consistency",
]

logger = logging.getLogger(__name__)

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SweepResult:
    """Tabulated stationary quantities over a parameter grid.

    axes maps axis name to its 1-D grid; values maps quantity name to an
    array indexed by the meshed axes in axis order.  RPR entries are NaN
    wherever the ratio is undefined (pure or non-stationary filter).
    optimal_theta_u is the per-theta_o refined argmax of the RPR for the
    phase sweep, None for efficiency scans.
    """

    axes: dict
    values: dict
    optimal_theta_u: np.ndarray = None  # type: ignore[assignment]


@dataclass(frozen=True)
class StateSnapshot:
    """One labelled state at the snapshot time.

    contour is an (n, dim) array of points on the one-standard-deviation
    Wigner ellipse; when some axes are flagged divergent it degrades to a
    two-point segment along the single remaining axis (other coordinates
    NaN) or to None when no usable axis remains.
    """

    label: str
    state: GaussianState
    contour: np.ndarray = None  # type: ignore[assignment]
    divergent_axes: tuple = ()


@dataclass(frozen=True)
class MCReport:
    """Ensemble comparison of empirical and predicted error covariances.

    expected_* hold the haloed covariances V_F - V_T and V_S - V_T at the
    probe times; empirical_* the centered sample covariances of the
    estimation errors.  rel_error_* is the worst entry mismatch relative
    to the largest expected entry at that probe (NaN when the expected
    matrix vanishes).  A probe passes when the worst mismatch is within
    tolerance * scale or below the abs_floor numerical allowance; the
    latter is what the everything-observed limit relies on, where the
    expected error covariance is exactly zero.
    """

    n_traj: int
    seed: int
    probe_times: np.ndarray
    expected_filtered: np.ndarray
    expected_smoothed: np.ndarray
    empirical_filtered: np.ndarray
    empirical_smoothed: np.ndarray
    rel_error_filtered: np.ndarray
    rel_error_smoothed: np.ndarray
    tolerance: float
    abs_floor: float
    passed: bool
    trace_ordering: np.ndarray


def _parallel_map(fn, tasks, workers):
    # results come back keyed by task index, never by completion order
    if workers is None:
        workers = os.cpu_count() or 1
    workers = int(workers)
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    from concurrent.futures import ProcessPoolExecutor

    chunk = max(1, len(tasks) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=chunk))


def _swv_physical(report):
    if not np.all(np.isfinite(report.v_swv)):
        return False
    return bool(check_physical(report.v_swv, report.hbar))


def _steady_cell(task):
    theta_o, theta_u, eta_o, kw = task
    params = OPOParams(theta_o=theta_o, theta_u=theta_u, eta_o=eta_o)
    rep = steady_report(build_opo(params), **dict(kw))
    return rep.p_f, rep.p_s, rep.p_swv, rep.rpr, _swv_physical(rep)


def _rpr_value(theta_o, theta_u, eta_o, kw):
    rep = steady_report(build_opo(OPOParams(theta_o=theta_o, theta_u=theta_u,
                                            eta_o=eta_o)), **dict(kw))
    return rep.rpr if np.isfinite(rep.rpr) else -np.inf


def _golden_max(f, lo, hi, xtol):
    # golden-section search for a single interior maximum of f on [lo, hi]
    a, b = float(lo), float(hi)
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > xtol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def sweep_rpr(eta_o, grid_n, *, workers=1, refine=True, **steady_kw):
    """Stationary RPR over a square (theta_o, theta_u) phase grid.

    Grid points sit half a cell inside (-pi/2, pi/2) on both axes; the
    exact endpoints carry no q information, so the filter has no
    stationary state there.  Every cell runs steady_report at the given
    eta_o (extra keyword arguments are forwarded to it).  For each
    theta_o row the best theta_u is located by grid argmax followed by
    golden-section refinement to 1e-3 rad over the bracketing cells;
    rows with no defined RPR get NaN.
    """
    grid_n = int(grid_n)
    if grid_n < 8:
        raise ValueError(f"grid_n must be at least 8, got {grid_n}")
    h = np.pi / grid_n
    thetas = np.linspace(-np.pi / 2 + h / 2, np.pi / 2 - h / 2, grid_n)
    kw = tuple(sorted(steady_kw.items()))
    tasks = [(float(to), float(tu), float(eta_o), kw) for to in thetas for tu in thetas]
    rows = _parallel_map(_steady_cell, tasks, workers)
    cols = list(zip(*rows))
    shape = (grid_n, grid_n)
    values = {
        "P_F": np.array(cols[0]).reshape(shape),
        "P_S": np.array(cols[1]).reshape(shape),
        "P_SWV": np.array(cols[2]).reshape(shape),
        "RPR": np.array(cols[3]).reshape(shape),
        "physical_SWV": np.array(cols[4], dtype=bool).reshape(shape),
    }
    rpr = values["RPR"]
    optimal = np.full(grid_n, np.nan)
    for i in range(grid_n):
        if not np.any(np.isfinite(rpr[i])):
            continue
        j = int(np.nanargmax(rpr[i]))
        if refine:
            lo = thetas[max(j - 1, 0)]
            hi = thetas[min(j + 1, grid_n - 1)]
            optimal[i] = _golden_max(
                lambda tu: _rpr_value(thetas[i], tu, eta_o, kw), lo, hi, 1e-3)
        else:
            optimal[i] = thetas[j]
    return SweepResult(axes={"theta_o": thetas, "theta_u": thetas.copy()},
                       values=values, optimal_theta_u=optimal)


def efficiency_scan(theta_o, theta_u, eta_grid, *, workers=1, fit_window=0.1,
                    **steady_kw):
    """Stationary purities and RPR across observed efficiencies.

    Adds two comparison columns: PF_asym, the small-efficiency prediction
    sqrt(2 |cos theta_o|) eta_o^(1/4), and RPR_fit, the one-parameter law
    RPR = c (1 - eta_o) with c fitted through the origin on the points
    with 1 - eta_o <= fit_window (NaN column when no point qualifies).
    Filtered purity is expected to grow with eta_o; a decrease is logged
    as a finding, never clipped.
    """
    eta = np.asarray(eta_grid, dtype=np.float64)
    if eta.ndim != 1 or eta.size == 0:
        raise ValueError("eta_grid must be a nonempty 1-D sequence")
    if np.any(eta <= 0.0) or np.any(eta >= 1.0):
        raise ValueError("eta_grid values must lie strictly inside (0, 1)")
    kw = tuple(sorted(steady_kw.items()))
    tasks = [(float(theta_o), float(theta_u), float(e), kw) for e in eta]
    rows = _parallel_map(_steady_cell, tasks, workers)
    cols = list(zip(*rows))
    p_f = np.array(cols[0])
    rpr = np.array(cols[3])
    order = np.argsort(eta)
    drops = np.nonzero(np.diff(p_f[order]) < -1e-9)[0]
    if drops.size:
        logger.warning("filtered purity decreases with eta_o on %d interval(s) "
                       "of the scan grid", int(drops.size))
    eta_u = 1.0 - eta
    fit_mask = (eta_u <= fit_window) & (eta_u > 0.0) & np.isfinite(rpr)
    if np.any(fit_mask):
        slope = float(np.sum(rpr[fit_mask] * eta_u[fit_mask])
                      / np.sum(eta_u[fit_mask] ** 2))
        rpr_fit = slope * eta_u
    else:
        rpr_fit = np.full_like(eta, np.nan)
    values = {
        "P_F": p_f,
        "P_S": np.array(cols[1]),
        "P_SWV": np.array(cols[2]),
        "RPR": rpr,
        "physical_SWV": np.array(cols[4], dtype=bool),
        "PF_asym": np.sqrt(2.0 * abs(np.cos(theta_o))) * eta ** 0.25,
        "RPR_fit": rpr_fit,
    }
    return SweepResult(axes={"eta_o": eta}, values=values)


def _contour_or_segment(state, divergent, n_contour):
    M = state.mean.shape[0]
    keep = [i for i in range(M) if i not in set(divergent)]
    if len(keep) == M:
        try:
            return wigner_contour(state, n_contour)
        except SingularCovariance:
            return None
    if len(keep) == 1:
        i = keep[0]
        s = float(np.sqrt(state.cov[i, i]))
        seg = np.full((2, M), np.nan)
        seg[0, i] = state.mean[i] - s
        seg[1, i] = state.mean[i] + s
        return seg
    return None


def _snapshot(label, mean, cov, hbar, divergent, n_contour):
    state = GaussianState(mean=np.asarray(mean, dtype=np.float64),
                          cov=np.asarray(cov, dtype=np.float64),
                          hbar=hbar, label=label)
    contour = _contour_or_segment(state, divergent, n_contour)
    return StateSnapshot(label=label, state=state, contour=contour,
                         divergent_axes=tuple(int(i) for i in divergent))


def snapshot_states(system, record, t, *, trajectory=None, run=None, x0=None,
                    n_contour=64):
    """Every conditioned state of the system at one instant, with contours.

    Runs the estimation pipeline on the record (or reuses a prior ``run``)
    and returns StateSnapshots for the unconditioned, filtered, smoothed,
    true (when its trajectory is supplied) and SWV states at the grid time
    nearest t.  The unconditioned covariance may have runaway components;
    those axes are flagged and dropped from the contour instead of
    failing the whole snapshot.
    """
    grid = record.grid
    k = grid.index_of(t)
    if run is None:
        run = run_estimation(system, record)
    M = system.dim
    x0 = np.zeros(M) if x0 is None else np.asarray(x0, dtype=np.float64)
    if x0.shape != (M,):
        raise ShapeMismatch(f"x0 must have shape ({M},), got {x0.shape}")
    vu = unconditioned_variance(system, grid=grid)
    xu = np.linalg.matrix_power(np.eye(M) + system.A * grid.dt, k) @ x0
    divergent = detect_divergent_diagonals(vu[: k + 1])
    hbar = system.hbar
    out = [
        _snapshot("unconditioned", xu, vu[k], hbar, divergent, n_contour),
        _snapshot("filtered", run.filtered.means[k], run.filtered.cov[k],
                  hbar, (), n_contour),
        _snapshot("smoothed", run.smoother.means[k], run.smoother.cov[k],
                  hbar, (), n_contour),
    ]
    if trajectory is not None:
        if trajectory.grid != grid:
            raise ShapeMismatch("trajectory grid does not match the record grid")
        out.append(_snapshot("true", trajectory.means[k], trajectory.cov[k],
                             hbar, (), n_contour))
    out.append(_snapshot("SWV", run.smoother.swv_means[k],
                         run.smoother.swv_cov[k], hbar, (), n_contour))
    return out


def _mc_batch(task):
    (system, P_T, Q_T, kick_f, lam, abar_t2, dbar_full, Ko2, vh_f, S_p,
     probe_idx, seed, batch, B, n, dt) = task
    M = system.dim
    L_o = system.C_o.shape[0]
    L_u = system.C_u.shape[0]
    sdt = np.sqrt(dt)
    dw_o = _channel_rng(seed, _CH_OBSERVED, batch).standard_normal((n, B, L_o)) * sdt
    dw_u = _channel_rng(seed, _CH_UNOBSERVED, batch).standard_normal((n, B, L_u)) * sdt
    x0b = np.zeros((B, M))
    xt = _core.affine_forward(P_T, Q_T, np.concatenate([dw_o, dw_u], axis=2), x0b)
    ydt = xt[:-1] @ system.C_o.T * dt + dw_o
    xf = _mean_pass(system.A, system.C_o, kick_f, ydt, x0b, dt)
    z = _info_mean_pass(abar_t2, dbar_full, lam, Ko2, system.C_o.T, ydt, dt)
    P = len(probe_idx)
    sum_f = np.zeros((P, M))
    sum_s = np.zeros((P, M))
    ss_f = np.zeros((P, M, M))
    ss_s = np.zeros((P, M, M))
    for i, kidx in enumerate(probe_idx):
        ef = xt[kidx] - xf[kidx]
        rhs = xf[kidx] + z[kidx] @ vh_f[kidx].T
        es = xt[kidx] - np.linalg.solve(S_p[i], rhs.T).T
        sum_f[i] = ef.sum(axis=0)
        sum_s[i] = es.sum(axis=0)
        ss_f[i] = ef.T @ ef
        ss_s[i] = es.T @ es
    return sum_f, sum_s, ss_f, ss_s


def mc_consistency(system, n_traj, seed, *, grid=None, batch_size=500,
                   probes=(0.25, 0.5, 0.75), tolerance=0.05, abs_floor=None,
                   V0=None, workers=1):
    """Ensemble check of the filter and smoother error-covariance laws.

    Simulates n_traj true trajectories, runs the filter and the smoother
    on each observed record, and compares the sample covariance of the
    errors <x>_T - <x>_F and <x>_T - <x>_S against V_F - V_T and
    V_S - V_T at the given fractions of the horizon.  A probe passes
    when every entry mismatch is within tolerance times the largest
    expected entry, or below abs_floor outright (default 10 dt, the
    discretization allowance; it is what keeps the criterion meaningful
    when the expected error covariance vanishes identically).  The
    default 5% tolerance is calibrated for n_traj around 1e4.

    Trajectories are drawn in batches of batch_size; batch b uses the
    substream pair (seed, channel, b), so the result is reproducible for
    fixed (seed, batch_size) no matter how batches are scheduled.
    """
    n_traj = int(n_traj)
    if n_traj < 1000:
        raise ValueError(f"n_traj must be at least 1000 for a covariance check, got {n_traj}")
    grid = grid or TimeGrid()
    n, dt = grid.n_steps, grid.dt
    M = system.dim
    if abs_floor is None:
        abs_floor = 10.0 * dt
    V0 = system.vacuum() if V0 is None else np.asarray(V0, dtype=np.float64)
    span = grid.t_final - grid.t0
    probe_idx = [grid.index_of(grid.t0 + float(p) * span) for p in probes]
    probe_times = grid.times[probe_idx]

    # covariance-side objects are record-independent: one integration each
    vt_half = true_cov_half_grid(system, V0, grid)
    vt = vt_half[::2]
    cov_f = _core.rk4_cov_grid(system.A, system.D, system.C_o,
                               system.Gamma_o.T, V0, dt, n)
    kick_f = cov_f @ system.C_o.T + system.Gamma_o.T
    lam, abar_t, dbar_full, Ko = _retro_information_path(system, vt_half, dt, n)
    vh_f = cov_f - vt
    eye = np.eye(M)
    S_p = np.array([eye + vh_f[k] @ lam[k] for k in probe_idx])
    expected_f = vh_f[probe_idx]
    expected_s = np.array([_sym(np.linalg.solve(S_p[i], vh_f[probe_idx[i]]))
                           for i in range(len(probe_idx))])
    P_T, Q_T = _euler_coefficients(system, vt, dt)
    abar_t2 = abar_t[::2]
    Ko2 = Ko[::2]

    tasks = []
    done = 0
    batch = 0
    while done < n_traj:
        B = min(int(batch_size), n_traj - done)
        tasks.append((system, P_T, Q_T, kick_f, lam, abar_t2, dbar_full, Ko2,
                      vh_f, S_p, probe_idx, int(seed), batch, B, n, dt))
        done += B
        batch += 1
    parts = _parallel_map(_mc_batch, tasks, workers)

    P = len(probe_idx)
    sum_f = np.zeros((P, M))
    sum_s = np.zeros((P, M))
    ss_f = np.zeros((P, M, M))
    ss_s = np.zeros((P, M, M))
    for pf, ps, qf, qs in parts:
        sum_f += pf
        sum_s += ps
        ss_f += qf
        ss_s += qs
    mean_f = sum_f / n_traj
    mean_s = sum_s / n_traj
    emp_f = (ss_f - n_traj * mean_f[:, :, None] * mean_f[:, None, :]) / (n_traj - 1)
    emp_s = (ss_s - n_traj * mean_s[:, :, None] * mean_s[:, None, :]) / (n_traj - 1)

    scale_f = np.max(np.abs(expected_f), axis=(1, 2))
    scale_s = np.max(np.abs(expected_s), axis=(1, 2))
    err_f = np.max(np.abs(emp_f - expected_f), axis=(1, 2))
    err_s = np.max(np.abs(emp_s - expected_s), axis=(1, 2))
    with np.errstate(divide="ignore", invalid="ignore"):
        rel_f = np.where(scale_f > 0.0, err_f / scale_f, np.nan)
        rel_s = np.where(scale_s > 0.0, err_s / scale_s, np.nan)
    ok_f = (err_f <= tolerance * scale_f) | (err_f <= abs_floor)
    ok_s = (err_s <= tolerance * scale_s) | (err_s <= abs_floor)
    ok = np.all(ok_f) and np.all(ok_s)
    traces = np.trace(emp_s, axis1=1, axis2=2) < np.trace(emp_f, axis1=1, axis2=2)
    return MCReport(n_traj=n_traj, seed=int(seed), probe_times=probe_times,
                    expected_filtered=expected_f, expected_smoothed=expected_s,
                    empirical_filtered=emp_f, empirical_smoothed=emp_s,
                    rel_error_filtered=rel_f, rel_error_smoothed=rel_s,
                    tolerance=float(tolerance), abs_floor=float(abs_floor),
                    passed=bool(ok), trace_ordering=traces)
