"""Phase/efficiency sweeps, state snapshots, and the ensemble harness."""

import numpy as np
import pytest

from lgqsmooth.analysis import (
    efficiency_scan,
    mc_consistency,
    snapshot_states,
    sweep_rpr,
)
from lgqsmooth.errors import ShapeMismatch
from lgqsmooth.model import OPOParams, build_opo
from lgqsmooth.trajectory import TimeGrid, simulate_true


@pytest.fixture(scope="module")
def small_sweep():
    return sweep_rpr(0.5, 8)


class TestSweepRPR:
    def test_grid_size_validated(self):
        with pytest.raises(ValueError):
            sweep_rpr(0.5, 4)

    def test_axes_inset_half_cell(self, small_sweep):
        thetas = small_sweep.axes["theta_o"]
        h = np.pi / 8
        assert thetas[0] == pytest.approx(-np.pi / 2 + h / 2)
        assert thetas[-1] == pytest.approx(np.pi / 2 - h / 2)
        assert np.array_equal(small_sweep.axes["theta_u"], thetas)

    def test_shapes_and_types(self, small_sweep):
        for name in ("P_F", "P_S", "P_SWV", "RPR"):
            assert small_sweep.values[name].shape == (8, 8)
        assert small_sweep.values["physical_SWV"].dtype == bool

    def test_rpr_positive_everywhere(self, small_sweep):
        rpr = small_sweep.values["RPR"]
        assert np.all(np.isfinite(rpr))
        assert np.min(rpr) > 0.0

    def test_filtered_purity_ignores_theta_u(self, small_sweep):
        p_f = small_sweep.values["P_F"]
        assert np.max(p_f.max(axis=1) - p_f.min(axis=1)) == 0.0

    def test_sign_flip_symmetry(self, small_sweep):
        # reflecting both homodyne phases is a symmetry of the OPO
        rpr = small_sweep.values["RPR"]
        assert np.max(np.abs(rpr - rpr[::-1, ::-1])) < 1e-12
        opt = small_sweep.optimal_theta_u
        assert np.max(np.abs(opt + opt[::-1])) < 2e-3

    def test_smoothing_beats_filtering(self, small_sweep):
        assert np.all(small_sweep.values["P_S"] >=
                      small_sweep.values["P_F"] - 1e-9)

    def test_unrefined_optimum_is_grid_point(self):
        res = sweep_rpr(0.5, 8, refine=False)
        thetas = res.axes["theta_u"]
        for v in res.optimal_theta_u:
            assert np.min(np.abs(thetas - v)) < 1e-15


class TestEfficiencyScan:
    def test_validation(self):
        with pytest.raises(ValueError):
            efficiency_scan(0.5, 0.2, np.array([[0.1, 0.2]]))
        with pytest.raises(ValueError):
            efficiency_scan(0.5, 0.2, [])
        with pytest.raises(ValueError):
            efficiency_scan(0.5, 0.2, [0.0, 0.5])
        with pytest.raises(ValueError):
            efficiency_scan(0.5, 0.2, [0.5, 1.0])

    def test_scan_columns(self):
        eta = np.geomspace(1e-4, 0.99, 12)
        res = efficiency_scan(np.pi / 6, 0.2, eta)
        assert np.array_equal(res.axes["eta_o"], eta)
        assert res.optimal_theta_u is None
        p_f = res.values["P_F"]
        assert np.all(np.diff(p_f) > -1e-9)
        expect = np.sqrt(2.0 * np.cos(np.pi / 6)) * eta ** 0.25
        assert np.allclose(res.values["PF_asym"], expect, rtol=1e-12)
        # the linear RPR law anchors on the small eta_u points and is
        # near-exact there
        eta_u = 1.0 - eta
        mask = eta_u <= 0.1
        assert np.any(mask)
        rel = np.abs(res.values["RPR"] - res.values["RPR_fit"])[mask] / res.values["RPR"][mask]
        assert np.max(rel) < 0.02

    def test_fit_column_nan_without_anchor_points(self):
        res = efficiency_scan(np.pi / 6, 0.2, [0.2, 0.4, 0.6])
        assert np.all(np.isnan(res.values["RPR_fit"]))
        assert np.all(np.isfinite(res.values["RPR"]))


class TestSnapshots:
    def test_labels_and_contours(self, opo_asym, short_grid, asym_run):
        traj, record, run = asym_run
        snaps = snapshot_states(opo_asym, record, 1.0, trajectory=traj, run=run)
        assert [s.label for s in snaps] == [
            "unconditioned", "filtered", "smoothed", "true", "SWV"]
        by_label = {s.label: s for s in snaps}
        # the undamped quadrature has no stationary unconditioned variance
        assert by_label["unconditioned"].divergent_axes == (0,)
        seg = by_label["unconditioned"].contour
        assert seg.shape == (2, 2)
        assert np.all(np.isnan(seg[:, 0])) and np.all(np.isfinite(seg[:, 1]))
        for label in ("filtered", "smoothed", "true", "SWV"):
            assert by_label[label].contour.shape == (64, 2)
            assert by_label[label].divergent_axes == ()

    def test_covariance_area_ordering(self, opo_asym, asym_run):
        traj, record, run = asym_run
        snaps = snapshot_states(opo_asym, record, 1.0, trajectory=traj, run=run)
        det = {s.label: np.linalg.det(s.state.cov) for s in snaps}
        assert det["true"] <= det["smoothed"] + 1e-12
        assert det["smoothed"] <= det["filtered"] + 1e-12
        # the SWV pseudo-state is tighter than the purest real state
        assert det["SWV"] < det["true"]

    def test_true_state_needs_matching_grid(self, opo_asym, asym_run):
        traj, record, run = asym_run
        other, _ = simulate_true(opo_asym, TimeGrid(0.0, 1.0, 1e-3), seed=1)
        with pytest.raises(ShapeMismatch):
            snapshot_states(opo_asym, record, 0.5, trajectory=other, run=run)

    def test_without_trajectory(self, opo_asym, asym_run):
        _, record, run = asym_run
        snaps = snapshot_states(opo_asym, record, 1.0, run=run)
        assert [s.label for s in snaps] == [
            "unconditioned", "filtered", "smoothed", "SWV"]

    def test_final_time_smoother_collapses(self, opo_asym, short_grid, asym_run):
        _, record, run = asym_run
        snaps = snapshot_states(opo_asym, record, short_grid.t_final, run=run)
        by_label = {s.label: s for s in snaps}
        assert np.allclose(by_label["smoothed"].state.cov,
                           by_label["filtered"].state.cov, atol=1e-12)

    def test_x0_validated(self, opo_asym, asym_run):
        _, record, run = asym_run
        with pytest.raises(ShapeMismatch):
            snapshot_states(opo_asym, record, 1.0, run=run, x0=np.zeros(5))


class TestMCConsistency:
    def test_n_traj_validated(self, opo_default):
        with pytest.raises(ValueError):
            mc_consistency(opo_default, 500, seed=0)

    def test_probe_outside_grid_rejected(self, opo_default):
        with pytest.raises(ValueError):
            mc_consistency(opo_default, 1000, seed=0,
                           grid=TimeGrid(0.0, 1.0, 1e-3), probes=(1.5,))

    def test_small_ensemble(self, opo_default):
        rep = mc_consistency(opo_default, 2000, seed=11,
                             grid=TimeGrid(0.0, 1.0, 1e-3))
        assert rep.n_traj == 2000
        assert np.array_equal(rep.probe_times, [0.25, 0.5, 0.75])
        for emp in (rep.empirical_filtered, rep.empirical_smoothed):
            assert emp.shape == (3, 2, 2)
            assert np.allclose(emp, np.swapaxes(emp, -1, -2))
        # 2000 trajectories put the sample covariance within a few percent
        assert np.nanmax(rep.rel_error_filtered) < 0.2
        assert np.nanmax(rep.rel_error_smoothed) < 0.2
        # smoothing reduces the total error variance once the retrodictive
        # information has accumulated; the earliest probe's gap is within
        # sampling noise at this ensemble size
        assert rep.trace_ordering[1:].all()
        # the stored verdict is exactly the documented rule
        err_f = np.max(np.abs(rep.empirical_filtered - rep.expected_filtered), axis=(1, 2))
        err_s = np.max(np.abs(rep.empirical_smoothed - rep.expected_smoothed), axis=(1, 2))
        scale_f = np.max(np.abs(rep.expected_filtered), axis=(1, 2))
        scale_s = np.max(np.abs(rep.expected_smoothed), axis=(1, 2))
        ok = (np.all((err_f <= rep.tolerance * scale_f) | (err_f <= rep.abs_floor))
              and np.all((err_s <= rep.tolerance * scale_s) | (err_s <= rep.abs_floor)))
        assert rep.passed == ok

    def test_deterministic_and_scheduling_independent(self, opo_default):
        grid = TimeGrid(0.0, 1.0, 1e-3)
        a = mc_consistency(opo_default, 1000, seed=3, grid=grid, batch_size=300)
        b = mc_consistency(opo_default, 1000, seed=3, grid=grid, batch_size=300)
        c = mc_consistency(opo_default, 1000, seed=3, grid=grid, batch_size=300,
                           workers=2)
        for other in (b, c):
            assert np.array_equal(a.empirical_filtered, other.empirical_filtered)
            assert np.array_equal(a.empirical_smoothed, other.empirical_smoothed)

    def test_fully_observed_limit_uses_floor(self):
        # with every photon observed the filter is exact: the expected
        # error covariance vanishes and only the numerical floor applies
        sys_ = build_opo(OPOParams(theta_o=0.9, eta_o=1.0))
        rep = mc_consistency(sys_, 1000, seed=4, grid=TimeGrid(0.0, 1.0, 1e-3))
        assert np.max(np.abs(rep.expected_filtered)) < 1e-9
        assert np.max(np.abs(rep.empirical_filtered)) < 1e-9
        assert rep.passed


def test_sweep_worker_determinism():
    a = efficiency_scan(np.pi / 6, 0.2, np.geomspace(1e-3, 0.9, 6), workers=1)
    b = efficiency_scan(np.pi / 6, 0.2, np.geomspace(1e-3, 0.9, 6), workers=2)
    for name in ("P_F", "P_S", "P_SWV", "RPR"):
        assert np.array_equal(a.values[name], b.values[name])
