"""Filter/retrofilter/smoother passes and their cross-route identities."""

import numpy as np
import pytest

from lgqsmooth.errors import IdentityViolation, ShapeMismatch
from lgqsmooth.estimation import (
    classical_filter,
    classical_retrofilter,
    classical_smoother,
    haloed_retrofilter,
    lgq_smoother,
    quantum_filter,
    run_estimation,
    swv_state,
)
from lgqsmooth.model import OPOParams, build_opo
from lgqsmooth.trajectory import MeasurementRecord, TimeGrid, simulate_true

from conftest import random_classical_embedding


class TestClassicalEmbedding:
    """The quantum pipeline with zero true covariance must reproduce an
    independent classical implementation exactly (same flows, different
    numerical routes: solves versus explicit inversions)."""

    @pytest.mark.parametrize("dim", [2, 4])
    def test_all_passes_agree(self, dim):
        rng = np.random.default_rng(100 + dim)
        system, E, P0 = random_classical_embedding(rng, dim)
        grid = TimeGrid(0.0, 2.0, 1e-3)
        zero = np.zeros((dim, dim))
        _, record = simulate_true(system, grid, seed=31, V0=zero)
        run = run_estimation(system, record, V0=P0, VT0=zero)
        assert np.max(np.abs(run.vt)) < 1e-12

        cf = classical_filter(system.A, E, system.C_o, system.Gamma_o, record, V0=P0)
        assert np.max(np.abs(run.filtered.cov - cf.cov)) < 1e-12
        assert np.max(np.abs(run.filtered.means - cf.means)) < 1e-12

        cr = classical_retrofilter(system.A, E, system.C_o, system.Gamma_o, record)
        assert np.max(np.abs(run.retro.lam - cr.lam)) < 1e-12
        assert np.max(np.abs(run.retro.z - cr.z)) < 1e-12

        xs, vs = classical_smoother(cf, cr)
        assert np.max(np.abs(run.smoother.cov - vs)) < 1e-10
        assert np.max(np.abs(run.smoother.means - xs)) < 1e-10

    def test_swv_collapses_to_smoother(self):
        # with no true covariance to subtract the SWV combination and the
        # smoother are the same formula
        rng = np.random.default_rng(8)
        system, _, P0 = random_classical_embedding(rng, 2)
        grid = TimeGrid(0.0, 1.0, 1e-3)
        zero = np.zeros((2, 2))
        _, record = simulate_true(system, grid, seed=5, V0=zero)
        run = run_estimation(system, record, V0=P0, VT0=zero)
        assert np.max(np.abs(run.smoother.swv_cov - run.smoother.cov)) < 1e-10
        assert np.max(np.abs(run.smoother.swv_means - run.smoother.means)) < 1e-10


class TestQuantumFilter:
    def test_dual_route_check_runs(self, opo_asym, short_grid):
        _, record = simulate_true(opo_asym, short_grid, seed=7)
        out = quantum_filter(opo_asym, record, verify=True)
        assert out.cov.shape == (short_grid.n_steps + 1, 2, 2)

    def test_dual_route_check_can_fail(self, opo_asym, short_grid):
        # an unattainable tolerance must raise, not pass silently
        _, record = simulate_true(opo_asym, short_grid, seed=7)
        with pytest.raises(IdentityViolation) as exc:
            quantum_filter(opo_asym, record, identity_tol=1e-18)
        assert exc.value.max_error > 1e-18

    def test_record_width_checked(self, opo_asym, short_grid):
        record = MeasurementRecord(grid=short_grid,
                                   y_o_dt=np.zeros((short_grid.n_steps, 2)))
        with pytest.raises(ShapeMismatch):
            quantum_filter(opo_asym, record)

    def test_initial_conditions_propagate(self, opo_asym, short_grid):
        _, record = simulate_true(opo_asym, short_grid, seed=7)
        x0 = np.array([0.4, -1.2])
        out = quantum_filter(opo_asym, record, x0=x0, verify=False)
        assert np.array_equal(out.means[0], x0)
        assert np.array_equal(out.cov[0], opo_asym.vacuum())

    def test_fully_observed_filter_tracks_truth(self, short_grid):
        # with every photon in the observed channel there is nothing left
        # to be uncertain about: V_F = V_T and the filtered mean rides the
        # true mean exactly (up to integrator rounding)
        sys_ = build_opo(OPOParams(theta_o=0.9, eta_o=1.0))
        traj, record = simulate_true(sys_, short_grid, seed=17)
        out = quantum_filter(sys_, record)
        assert np.max(np.abs(out.cov - traj.cov)) < 1e-12
        assert np.max(np.abs(out.means - traj.means)) < 1e-9

    def test_innovations_are_white(self, asym_run):
        _, _, run = asym_run
        innov = run.filtered.innovations[:, 0]
        n = innov.shape[0]
        dt = run.grid.dt
        assert abs(np.mean(innov)) < 4.0 * np.sqrt(dt / n)
        assert np.var(innov) == pytest.approx(dt, rel=0.1)
        rho = np.corrcoef(innov[:-1], innov[1:])[0, 1]
        assert abs(rho) < 4.0 / np.sqrt(n)


class TestHaloedRetrofilter:
    def test_terminal_condition(self, asym_run):
        _, _, run = asym_run
        assert np.array_equal(run.retro.lam[-1], np.zeros((2, 2)))
        assert np.array_equal(run.retro.z[-1], np.zeros(2))

    def test_information_matrix_psd(self, asym_run):
        _, _, run = asym_run
        assert np.min(np.linalg.eigvalsh(run.retro.lam)) > -1e-9

    def test_explicit_moments(self, asym_run):
        # cov_r = Lam^{-1} - V_T on the well-conditioned stretch, NaN at the
        # terminal point where Lam = 0
        _, _, run = asym_run
        k = run.grid.n_steps // 2
        lam, cov_r, vt = run.retro.lam[k], run.retro.cov_r[k], run.vt[k]
        assert np.allclose(lam @ (cov_r + vt), np.eye(2), atol=1e-9)
        z, mean = run.retro.z[k], run.retro.means[k]
        assert np.allclose(lam @ mean, z, atol=1e-9)
        assert np.all(np.isnan(run.retro.cov_r[-1]))

    def test_dual_route_verification(self, opo_asym, short_grid):
        _, record = simulate_true(opo_asym, short_grid, seed=7)
        out = haloed_retrofilter(opo_asym, record, verify=True)
        assert out.verify_error is not None
        assert out.verify_error < 1e-6
        with pytest.raises(IdentityViolation):
            haloed_retrofilter(opo_asym, record, verify_tol=1e-18)


class TestSmoother:
    def test_reduces_to_filter_at_endpoints(self, asym_run):
        _, _, run = asym_run
        f, s = run.filtered, run.smoother
        # final time: no future record left
        assert np.max(np.abs(s.cov[-1] - f.cov[-1])) < 1e-12
        assert np.max(np.abs(s.means[-1] - f.means[-1])) < 1e-12
        assert np.max(np.abs(s.swv_cov[-1] - f.cov[-1])) < 1e-12
        # initial time: filter and true state share V0, so Vh_F(0) = 0 and
        # the smoothed covariance is pinned at the shared initial value
        assert np.max(np.abs(s.cov[0] - f.cov[0])) < 1e-12
        assert np.max(np.abs(s.means[0] - f.means[0])) < 1e-12

    def test_smoothing_shrinks_covariance(self, asym_run):
        # V_S <= V_F in the matrix order; the improvement is close to
        # rank-1 (one observed quadrature), so strictness is on the top
        # eigenvalue only
        _, _, run = asym_run
        gap = run.filtered.cov - run.smoother.cov
        eigs = np.linalg.eigvalsh(gap)
        assert np.min(eigs) > -1e-9
        k = run.grid.n_steps // 2
        assert np.max(eigs[k]) > 1e-3

    def test_purity_ordering(self, asym_run):
        _, _, run = asym_run
        assert np.all(run.purity_smoothed >= run.purity_filtered - 1e-9)
        assert np.nanmax(run.purity_smoothed) <= 1.0 + 1e-9

    def test_true_state_stays_pure(self, asym_run):
        # eta_o + eta_u = 1 with a vacuum start: no information leaks, the
        # true state remains pure along the whole trajectory
        _, _, run = asym_run
        assert np.max(np.abs(run.purity_true - 1.0)) < 1e-9

    def test_smoothed_state_is_physical(self, asym_run):
        _, _, run = asym_run
        assert run.physical_smoothed.all()
        assert run.physical_smoothed.dtype == bool
        assert run.physical_swv.shape == (run.grid.n_steps + 1,)

    def test_swv_matches_standalone(self, asym_run):
        _, _, run = asym_run
        means, cov = swv_state(run.filtered, run.retro)
        assert np.array_equal(means, run.smoother.swv_means)
        assert np.array_equal(cov, run.smoother.swv_cov)

    def test_smoother_tracks_truth_better(self, opo_asym, short_grid):
        # averaged over several records the smoothed mean sits closer to
        # the true trajectory than the filtered mean
        err_f = err_s = 0.0
        for seed in range(6):
            traj, record = simulate_true(opo_asym, short_grid, seed=40 + seed)
            run = run_estimation(opo_asym, record, verify=False)
            err_f += np.mean(np.sum((run.filtered.means - traj.means) ** 2, axis=1))
            err_s += np.mean(np.sum((run.smoother.means - traj.means) ** 2, axis=1))
        assert err_s < err_f


class TestRunEstimation:
    def test_verify_flag_changes_nothing(self, opo_asym, short_grid):
        _, record = simulate_true(opo_asym, short_grid, seed=7)
        a = run_estimation(opo_asym, record, verify=True)
        b = run_estimation(opo_asym, record, verify=False)
        assert np.array_equal(a.filtered.cov, b.filtered.cov)
        assert np.array_equal(a.smoother.means, b.smoother.means)
        assert b.retro.verify_error is None

    def test_tolerance_forwarding(self, opo_asym, short_grid):
        _, record = simulate_true(opo_asym, short_grid, seed=7)
        with pytest.raises(IdentityViolation):
            run_estimation(opo_asym, record, filter_tol=1e-18)
        with pytest.raises(IdentityViolation):
            run_estimation(opo_asym, record, retro_tol=1e-18)


def test_lgq_smoother_works_without_vt():
    # classical objects carry no true covariance; the smoother treats that
    # as V_T = 0 rather than failing
    rng = np.random.default_rng(3)
    system, E, P0 = random_classical_embedding(rng, 2)
    grid = TimeGrid(0.0, 0.5, 1e-3)
    _, record = simulate_true(system, grid, seed=1, V0=np.zeros((2, 2)))
    cf = classical_filter(system.A, E, system.C_o, system.Gamma_o, record, V0=P0)
    cr = classical_retrofilter(system.A, E, system.C_o, system.Gamma_o, record)
    out = lgq_smoother(cf, cr)
    xs, vs = classical_smoother(cf, cr)
    assert np.max(np.abs(out.cov - vs)) < 1e-10
    assert np.max(np.abs(out.means - xs)) < 1e-10
