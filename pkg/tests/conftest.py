import numpy as np
import pytest

from lgqsmooth.estimation import _noise_factor, run_estimation
from lgqsmooth.model import LGQSystem, OPOParams, build_opo
from lgqsmooth.trajectory import TimeGrid, simulate_true


@pytest.fixture(scope="session")
def opo_default():
    return build_opo(OPOParams())


@pytest.fixture(scope="session")
def opo_asym():
    # strong q/p asymmetry; the standing example for trajectory-level tests
    return build_opo(OPOParams(theta_o=np.pi / 3, theta_u=0.2, eta_o=0.5))


@pytest.fixture(scope="session")
def short_grid():
    return TimeGrid(0.0, 2.0, 1e-3)


@pytest.fixture(scope="session")
def asym_run(opo_asym, short_grid):
    """One simulated trajectory plus its full estimation pipeline."""
    traj, record = simulate_true(opo_asym, short_grid, seed=7)
    return traj, record, run_estimation(opo_asym, record)


def random_hurwitz(rng, dim, margin=0.5):
    A = rng.standard_normal((dim, dim))
    shift = np.max(np.linalg.eigvals(A).real) + margin + rng.uniform(0.0, 1.0)
    return A - shift * np.eye(dim)


def random_classical_embedding(rng, dim, n_obs=1):
    """A random classical LG model and its zero-true-variance quantum embedding.

    The joint process/measurement noise covariance is drawn PSD and the
    measurement block whitened, so D - Gamma^T Gamma >= 0 by the Schur
    complement.  The quantum system carries the observed channel as-is and
    hides the leftover diffusion in an unobserved channel with C_u = 0,
    which pins the true covariance at zero when started there.
    """
    A = random_hurwitz(rng, dim)
    G0 = rng.standard_normal((dim + n_obs, dim + n_obs + 2))
    J = G0 @ G0.T
    D = J[:dim, :dim]
    R = J[dim:, dim:]
    w, U = np.linalg.eigh(R)
    R_isqrt = U @ np.diag(1.0 / np.sqrt(w)) @ U.T
    Gamma = R_isqrt @ J[dim:, :dim]
    E = _noise_factor(D, "D")
    F = _noise_factor(D - Gamma.T @ Gamma, "leftover diffusion")
    system = LGQSystem(A=A, D=D, C_o=rng.standard_normal((n_obs, dim)),
                       C_u=np.zeros((dim, dim)), Gamma_o=Gamma, Gamma_u=F.T)
    L0 = rng.standard_normal((dim, dim + 1))
    P0 = L0 @ L0.T + 0.1 * np.eye(dim)
    return system, E, P0
