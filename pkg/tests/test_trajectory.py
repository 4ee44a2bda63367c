"""True-state sampling, record regeneration, and noise-stream isolation."""

import numpy as np
import pytest

from lgqsmooth.errors import ShapeMismatch
from lgqsmooth.model import OPOParams, build_opo, check_physical
from lgqsmooth.trajectory import (
    MeasurementRecord,
    TimeGrid,
    detect_divergent_diagonals,
    integrate_true_cov,
    records_from_trajectory,
    simulate_true,
    true_cov_half_grid,
    unconditioned_variance,
)


class TestTimeGrid:
    def test_basic(self):
        g = TimeGrid(0.0, 1.0, 0.1)
        assert g.n_steps == 10
        assert np.allclose(g.times, np.arange(11) * 0.1)

    def test_index_of(self):
        g = TimeGrid(0.0, 2.0, 1e-3)
        assert g.index_of(0.0) == 0
        assert g.index_of(1.0) == 1000
        assert g.index_of(2.0) == 2000
        with pytest.raises(ValueError):
            g.index_of(2.5)
        with pytest.raises(ValueError):
            g.index_of(-0.1)

    def test_validation(self):
        with pytest.raises(ValueError):
            TimeGrid(0.0, 1.0, -0.1)
        with pytest.raises(ValueError):
            TimeGrid(1.0, 0.5, 0.1)
        with pytest.raises(ValueError):
            TimeGrid(0.0, 1.05, 0.1)  # not a whole number of steps


class TestTrueCovariance:
    def test_stays_physical(self, opo_asym, short_grid):
        vt = integrate_true_cov(opo_asym, grid=short_grid)
        for k in (0, 500, 2000):
            assert check_physical(vt[k], hbar=opo_asym.hbar)

    def test_relaxes_to_stationary(self, opo_asym):
        vt = integrate_true_cov(opo_asym, grid=TimeGrid(0.0, 8.0, 1e-3))
        assert np.max(np.abs(vt[-1] - vt[-50])) < 1e-10

    def test_perfect_detection_keeps_vacuum_pure(self):
        # eta_o + eta_u = 1 on the OPO keeps a pure state pure: starting at
        # vacuum the true covariance satisfies det V = (hbar/2)^2 throughout
        sys_ = build_opo(OPOParams(theta_o=0.3, theta_u=-0.9, eta_o=0.4))
        vt = integrate_true_cov(sys_, grid=TimeGrid(0.0, 1.0, 1e-3))
        dets = np.linalg.det(vt)
        assert np.max(np.abs(dets - 0.25)) < 1e-9

    def test_half_grid_interleaves(self, opo_asym, short_grid):
        vt = integrate_true_cov(opo_asym, grid=short_grid)
        vh = true_cov_half_grid(opo_asym, grid=short_grid)
        assert vh.shape[0] == 2 * short_grid.n_steps + 1
        # whole-step samples agree with the plain-grid integration
        assert np.max(np.abs(vh[::2] - vt)) < 1e-10


class TestSimulate:
    def test_shapes(self, opo_asym, short_grid):
        traj, record = simulate_true(opo_asym, short_grid, seed=3)
        n = short_grid.n_steps
        assert traj.means.shape == (n + 1, 2)
        assert traj.cov.shape == (n + 1, 2, 2)
        assert record.y_o_dt.shape == (n, 1)
        assert record.y_u_dt.shape == (n, 1)

    def test_deterministic_in_seed(self, opo_asym, short_grid):
        t1, r1 = simulate_true(opo_asym, short_grid, seed=12)
        t2, r2 = simulate_true(opo_asym, short_grid, seed=12)
        assert np.array_equal(t1.means, t2.means)
        assert np.array_equal(r1.y_o_dt, r2.y_o_dt)
        t3, _ = simulate_true(opo_asym, short_grid, seed=13)
        assert not np.array_equal(t1.means, t3.means)

    def test_record_consistency(self, opo_asym, short_grid):
        # the record is signal plus noise; subtracting the signal leaves
        # increments with the statistics of dw ~ N(0, dt)
        traj, record = simulate_true(opo_asym, short_grid, seed=5)
        dw = record.y_o_dt - traj.means[:-1] @ opo_asym.C_o.T * short_grid.dt
        n = short_grid.n_steps
        assert abs(np.mean(dw)) < 4.0 * np.sqrt(short_grid.dt / n)
        assert np.var(dw) == pytest.approx(short_grid.dt, rel=0.1)

    def test_records_regenerate_exactly(self, opo_asym, short_grid):
        traj, record = simulate_true(opo_asym, short_grid, seed=21, u_substream=4)
        again = records_from_trajectory(opo_asym, traj)
        assert np.array_equal(again.y_o_dt, record.y_o_dt)
        assert np.array_equal(again.y_u_dt, record.y_u_dt)

    def test_observed_noise_isolated_from_u_substream(self, opo_asym, short_grid):
        # resampling the unobserved channel must not touch the observed
        # channel's noise draws (only the means they ride on)
        dt = short_grid.dt
        t1, r1 = simulate_true(opo_asym, short_grid, seed=2, u_substream=0)
        t2, r2 = simulate_true(opo_asym, short_grid, seed=2, u_substream=9)
        dw1 = r1.y_o_dt - t1.means[:-1] @ opo_asym.C_o.T * dt
        dw2 = r2.y_o_dt - t2.means[:-1] @ opo_asym.C_o.T * dt
        # recovery of dw from y - C x dt cancels in floating point, so the
        # comparison is to rounding, far below the sqrt(dt) draw scale
        assert np.max(np.abs(dw1 - dw2)) < 1e-14
        assert not np.array_equal(t1.means, t2.means)

    def test_x0_validation(self, opo_asym, short_grid):
        with pytest.raises(ShapeMismatch):
            simulate_true(opo_asym, short_grid, x0=np.zeros(3))

    def test_covariance_is_record_independent(self, opo_asym, short_grid):
        t1, _ = simulate_true(opo_asym, short_grid, seed=1)
        t2, _ = simulate_true(opo_asym, short_grid, seed=999)
        assert np.array_equal(t1.cov, t2.cov)


class TestRecordContainer:
    def test_shape_validation(self, short_grid):
        n = short_grid.n_steps
        with pytest.raises(ShapeMismatch):
            MeasurementRecord(grid=short_grid, y_o_dt=np.zeros((n - 1, 1)))
        with pytest.raises(ShapeMismatch):
            MeasurementRecord(grid=short_grid, y_o_dt=np.zeros((n, 1)),
                              y_u_dt=np.zeros((n + 2, 1)))

    def test_unobserved_optional(self, short_grid):
        rec = MeasurementRecord(grid=short_grid, y_o_dt=np.zeros((short_grid.n_steps, 1)))
        assert rec.y_u_dt is None


class TestUnconditioned:
    def test_flow(self, opo_default):
        # undamped quadrature accumulates diffusion linearly, the damped one
        # relaxes to hbar/4
        grid = TimeGrid(0.0, 4.0, 1e-3)
        vu = unconditioned_variance(opo_default, grid=grid)
        t = grid.times
        assert np.max(np.abs(vu[:, 0, 0] - (0.5 + t))) < 1e-9
        assert vu[-1, 1, 1] == pytest.approx(0.25, abs=1e-6)
        assert np.max(np.abs(vu[:, 0, 1])) < 1e-12

    def test_divergence_detector(self, opo_default):
        grid = TimeGrid(0.0, 4.0, 1e-3)
        vu = unconditioned_variance(opo_default, grid=grid)
        assert detect_divergent_diagonals(vu) == [0]

    def test_detector_ignores_relaxation(self):
        # a decaying approach to a large stationary value is not divergence
        t = np.linspace(0.0, 10.0, 200)
        path = np.zeros((200, 2, 2))
        path[:, 0, 0] = 50.0 * (1.0 - np.exp(-2.0 * t))
        path[:, 1, 1] = 1.0
        assert detect_divergent_diagonals(path) == []

    def test_detector_short_path(self):
        assert detect_divergent_diagonals(np.zeros((3, 2, 2))) == []
