"""True-state trajectories and measurement records.

The true state of a partially observed system is the Gaussian conditioned
on records from every channel.  Its covariance V_T is record-independent
and follows the Riccati flow with both channels' kicks subtracted; the mean
is a linear stochastic recursion driven by the per-channel Wiener
increments, discretized by explicit Euler on the same grid that stores the
record increments

    y_r dt = C_r <x>_T dt + dw_r .

Covariances are integrated with RK4.  Noise is drawn from counter-based
streams keyed by (seed, channel, substream): the observed channel's draws
do not depend on the unobserved channel's substream, so resampling the
unobserved noise leaves the observed noise sequence untouched.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _core
from .errors import ShapeMismatch

__all__ = [
    "TimeGrid",
    "MeasurementRecord",
    "TrueTrajectory",
    "integrate_true_cov",
    "true_cov_half_grid",
    "simulate_true",
    "records_from_trajectory",
    "unconditioned_variance",
    "detect_divergent_diagonals",
]

# channel indices for the RNG substreams
_CH_OBSERVED = 0
_CH_UNOBSERVED = 1


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_k = t0 + k*dt, k = 0..n_steps."""

    t0: float = 0.0
    t_final: float = 10.0
    dt: float = 1e-3

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"dt must be positive and finite, got {self.dt}")
        if not self.t_final > self.t0:
            raise ValueError(f"t_final must exceed t0, got [{self.t0}, {self.t_final}]")
        n = (self.t_final - self.t0) / self.dt
        if abs(n - round(n)) > 1e-6:
            raise ValueError(f"grid span {self.t_final - self.t0:g} is not a whole number of steps of {self.dt:g}")

    @property
    def n_steps(self):
        return int(round((self.t_final - self.t0) / self.dt))

    @property
    def times(self):
        return self.t0 + self.dt * np.arange(self.n_steps + 1)

    def index_of(self, t):
        """Nearest grid index to time t; t must lie inside the grid."""
        k = int(round((t - self.t0) / self.dt))
        if k < 0 or k > self.n_steps:
            raise ValueError(f"time {t:g} is outside the grid [{self.t0:g}, {self.t_final:g}]")
        return k


@dataclass
class MeasurementRecord:
    """Per-step record increments y_r dt; the unobserved record is optional."""

    grid: TimeGrid
    y_o_dt: np.ndarray
    y_u_dt: Optional[np.ndarray] = None

    def __post_init__(self):
        self.y_o_dt = np.asarray(self.y_o_dt, dtype=np.float64)
        n = self.grid.n_steps
        if self.y_o_dt.ndim != 2 or self.y_o_dt.shape[0] != n:
            raise ShapeMismatch(f"y_o_dt must be (n_steps, L_o) = ({n}, *), got {self.y_o_dt.shape}")
        if self.y_u_dt is not None:
            self.y_u_dt = np.asarray(self.y_u_dt, dtype=np.float64)
            if self.y_u_dt.ndim != 2 or self.y_u_dt.shape[0] != n:
                raise ShapeMismatch(f"y_u_dt must be (n_steps, L_u) = ({n}, *), got {self.y_u_dt.shape}")


@dataclass
class TrueTrajectory:
    """Sampled true-state moments plus the seed data that generated them."""

    grid: TimeGrid
    means: np.ndarray
    cov: np.ndarray
    seed: int
    u_substream: int = 0


def _channel_rng(seed, channel, substream=0):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence((int(seed), channel, int(substream)))))


def integrate_true_cov(system, V0=None, grid=None):
    """V_T on the grid: RK4 on the Riccati flow with both channels' kicks."""
    grid = grid or TimeGrid()
    V0 = system.vacuum() if V0 is None else np.asarray(V0, dtype=np.float64)
    C, Gamma = system.stacked_channels()
    return _core.rk4_cov_grid(system.A, system.D, C, Gamma.T, V0, grid.dt, grid.n_steps)


def true_cov_half_grid(system, V0=None, grid=None):
    """V_T sampled at half-steps (2*n_steps + 1 points) for use as a
    time-dependent coefficient in other RK4 integrations."""
    grid = grid or TimeGrid()
    V0 = system.vacuum() if V0 is None else np.asarray(V0, dtype=np.float64)
    C, Gamma = system.stacked_channels()
    return _core.rk4_cov_grid(system.A, system.D, C, Gamma.T, V0, grid.dt / 2.0, 2 * grid.n_steps)


def _euler_coefficients(system, vt_path, dt):
    # P_k = I + A dt, Q_k = [K+_o, K+_u] at the left endpoint of each step
    n = vt_path.shape[0] - 1
    M = system.dim
    Ko = vt_path[:-1] @ system.C_o.T + system.Gamma_o.T
    Ku = vt_path[:-1] @ system.C_u.T + system.Gamma_u.T
    P = np.broadcast_to(np.eye(M) + system.A * dt, (n, M, M))
    Q = np.concatenate([Ko, Ku], axis=2)
    return P, Q


def simulate_true(system, grid=None, *, x0=None, V0=None, seed=0, u_substream=0):
    """Sample one true-state trajectory and its measurement records.

    Returns (TrueTrajectory, MeasurementRecord) with both channels'
    records filled in.  The covariance pass is deterministic; the mean is
    an explicit-Euler recursion driven by dw_o, dw_u ~ N(0, dt I) drawn
    from independent per-channel streams derived from ``seed``.
    """
    grid = grid or TimeGrid()
    M = system.dim
    x0 = np.zeros(M) if x0 is None else np.asarray(x0, dtype=np.float64)
    if x0.shape != (M,):
        raise ShapeMismatch(f"x0 must have shape ({M},), got {x0.shape}")
    vt = integrate_true_cov(system, V0, grid)
    n = grid.n_steps
    sdt = np.sqrt(grid.dt)
    dw_o = _channel_rng(seed, _CH_OBSERVED).standard_normal((n, system.C_o.shape[0])) * sdt
    dw_u = _channel_rng(seed, _CH_UNOBSERVED, u_substream).standard_normal((n, system.C_u.shape[0])) * sdt
    P, Q = _euler_coefficients(system, vt, grid.dt)
    means = _core.affine_forward(P, Q, np.concatenate([dw_o, dw_u], axis=1), x0)
    y_o_dt = means[:-1] @ system.C_o.T * grid.dt + dw_o
    y_u_dt = means[:-1] @ system.C_u.T * grid.dt + dw_u
    traj = TrueTrajectory(grid=grid, means=means, cov=vt, seed=int(seed), u_substream=int(u_substream))
    record = MeasurementRecord(grid=grid, y_o_dt=y_o_dt, y_u_dt=y_u_dt)
    return traj, record


def records_from_trajectory(system, traj):
    """Regenerate the records of a stored trajectory from its seed data.

    Redraws the noise streams and rebuilds y_r dt = C_r <x>_T dt + dw_r from
    the stored means; reproduces the records of simulate_true exactly.
    """
    grid = traj.grid
    n = grid.n_steps
    sdt = np.sqrt(grid.dt)
    dw_o = _channel_rng(traj.seed, _CH_OBSERVED).standard_normal((n, system.C_o.shape[0])) * sdt
    dw_u = _channel_rng(traj.seed, _CH_UNOBSERVED, traj.u_substream).standard_normal((n, system.C_u.shape[0])) * sdt
    y_o_dt = traj.means[:-1] @ system.C_o.T * grid.dt + dw_o
    y_u_dt = traj.means[:-1] @ system.C_u.T * grid.dt + dw_u
    return MeasurementRecord(grid=grid, y_o_dt=y_o_dt, y_u_dt=y_u_dt)


def unconditioned_variance(system, V0=None, grid=None):
    """Covariance of the state conditioned on nothing: dV/dt = A V + V A^T + D.

    No stationary limit need exist (an undamped quadrature grows without
    bound); use detect_divergent_diagonals on the result to identify
    runaway components.
    """
    grid = grid or TimeGrid()
    V0 = system.vacuum() if V0 is None else np.asarray(V0, dtype=np.float64)
    M = system.dim
    empty_C = np.zeros((0, M))
    return _core.rk4_cov_grid(system.A, system.D, empty_C, empty_C.T, V0, grid.dt, grid.n_steps)


def detect_divergent_diagonals(path, rel_tol=1e-3, abs_tol=1e-6):
    """Indices of diagonal entries that are still growing at the end of a
    covariance path and whose growth rate is not decaying.

    Compares the increase over the last two quarters of the path: a
    component is flagged when both increments are significant and the later
    one has not shrunk to less than half the earlier one (linear growth
    keeps them equal; exponential relaxation collapses the second).
    """
    path = np.asarray(path)
    n = path.shape[0] - 1
    if n < 4:
        return []
    diag = path[:, np.arange(path.shape[1]), np.arange(path.shape[1])]
    q2, q3, q4 = diag[n // 2], diag[3 * n // 4], diag[n]
    first = q3 - q2
    second = q4 - q3
    scale = np.maximum(np.abs(q4), 1.0)
    out = []
    for i in range(diag.shape[1]):
        significant = second[i] > abs_tol + rel_tol * scale[i]
        sustained = first[i] > 0 and second[i] > 0.5 * first[i]
        if significant and sustained:
            out.append(i)
    return out
