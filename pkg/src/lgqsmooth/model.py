"""Linear Gaussian quantum system definitions.

A system of N bosonic modes is described by the quadrature vector
x = (q_1, p_1, ..., q_N, p_N)^T with [q_j, p_j] = i*hbar.  Gaussian states
are (mean, covariance) pairs whose Wigner function is a Gaussian; a
covariance V describes a valid quantum state iff

    V + i*(hbar/2)*Sigma >= 0,

with Sigma the block-diagonal symplectic form ([[0, 1], [-1, 0]] per mode,
Sigma^2 = -I).  For one mode this is equivalent to det V >= hbar^2/4 (with
V positive semidefinite), saturated exactly by pure states.

Dynamics are linear with additive Gaussian noise: drift A, diffusion D, and
for each monitored channel r a measurement matrix C_r and a measurement-
noise correlation Gamma_r.  Conditional covariances evolve by Riccati flows
built from the kick K^{+/-}[V] = V C_r^T +/- Gamma_r^T; those flows live in
the trajectory and estimation modules.  Here we define the containers, the
physicality and purity diagnostics, and the standard example: an on-
threshold optical parametric oscillator (OPO) monitored by two homodyne
detections at phases theta_o (observed) and theta_u (unobserved) with
efficiencies eta_o, eta_u,

    A = diag(0, -2),  D = hbar*I,
    C_r = 2*sqrt(eta_r/hbar) * (cos(theta_r), sin(theta_r)),
    Gamma_r = -(hbar/2) * C_r,

in units of the OPO decay rate and with eta_o + eta_u <= 1.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidEfficiency, NonFiniteValue, ShapeMismatch, SingularCovariance

__all__ = [
    "STATE_LABELS",
    "LGQSystem",
    "GaussianState",
    "OPOParams",
    "build_opo",
    "kick",
    "check_physical",
    "purity",
    "wigner_contour",
    "symplectic_form",
    "system_to_dict",
    "system_from_dict",
]

STATE_LABELS = ("true", "filtered", "retrofiltered-effect", "smoothed", "SWV", "unconditioned")

_SIGMA_BLOCK = np.array([[0.0, 1.0], [-1.0, 0.0]])


def symplectic_form(n_modes):
    """Block-diagonal symplectic form for n_modes modes (antisymmetric, squares to -I)."""
    sigma = np.zeros((2 * n_modes, 2 * n_modes))
    for j in range(n_modes):
        sigma[2 * j : 2 * j + 2, 2 * j : 2 * j + 2] = _SIGMA_BLOCK
    return sigma


def _as_matrix(a, shape, name):
    a = np.asarray(a, dtype=np.float64)
    if a.shape != shape:
        raise ShapeMismatch(f"{name} must have shape {shape}, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFiniteValue(f"{name} contains non-finite entries")
    return a


@dataclass
class LGQSystem:
    """Drift/diffusion/measurement matrices of a linear Gaussian quantum system.

    A: (M, M) drift.  D: (M, M) symmetric PSD diffusion.  C_o, Gamma_o:
    (L_o, M) observed-channel measurement and noise-correlation matrices;
    C_u, Gamma_u likewise for the unobserved channel (either L may be 0).
    """

    A: np.ndarray
    D: np.ndarray
    C_o: np.ndarray
    C_u: np.ndarray
    Gamma_o: np.ndarray
    Gamma_u: np.ndarray
    hbar: float = 1.0

    def __post_init__(self):
        A = np.asarray(self.A, dtype=np.float64)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ShapeMismatch(f"A must be square, got {A.shape}")
        M = A.shape[0]
        if M % 2 != 0 or M == 0:
            raise ShapeMismatch(f"dimension must be a positive even number of quadratures, got {M}")
        self.A = _as_matrix(A, (M, M), "A")
        self.D = _as_matrix(self.D, (M, M), "D")
        if np.max(np.abs(self.D - self.D.T)) > 1e-12 * (1.0 + np.max(np.abs(self.D))):
            raise ShapeMismatch("D must be symmetric")
        C_o = np.atleast_2d(np.asarray(self.C_o, dtype=np.float64))
        C_u = np.atleast_2d(np.asarray(self.C_u, dtype=np.float64))
        self.C_o = _as_matrix(C_o, (C_o.shape[0], M), "C_o")
        self.C_u = _as_matrix(C_u, (C_u.shape[0], M), "C_u")
        self.Gamma_o = _as_matrix(np.atleast_2d(np.asarray(self.Gamma_o, dtype=np.float64)), self.C_o.shape, "Gamma_o")
        self.Gamma_u = _as_matrix(np.atleast_2d(np.asarray(self.Gamma_u, dtype=np.float64)), self.C_u.shape, "Gamma_u")
        self.hbar = float(self.hbar)
        if not (np.isfinite(self.hbar) and self.hbar > 0):
            raise ValueError(f"hbar must be positive and finite, got {self.hbar}")

    @property
    def dim(self):
        return self.A.shape[0]

    @property
    def n_modes(self):
        return self.A.shape[0] // 2

    @property
    def sigma(self):
        return symplectic_form(self.n_modes)

    def stacked_channels(self):
        """(C, Gamma) with the observed rows stacked above the unobserved rows."""
        return (np.vstack([self.C_o, self.C_u]), np.vstack([self.Gamma_o, self.Gamma_u]))

    def vacuum(self):
        return (self.hbar / 2.0) * np.eye(self.dim)


@dataclass
class GaussianState:
    """A Gaussian (mean, covariance) pair with a role label.

    The label records what the moments condition on; "retrofiltered-effect"
    and "SWV" states need not satisfy the physicality bound.
    """

    mean: np.ndarray
    cov: np.ndarray
    hbar: float = 1.0
    label: str = "true"

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.cov = np.asarray(self.cov, dtype=np.float64)
        if self.mean.ndim != 1:
            raise ShapeMismatch(f"mean must be a vector, got shape {self.mean.shape}")
        M = self.mean.shape[0]
        if self.cov.shape != (M, M):
            raise ShapeMismatch(f"cov must be ({M}, {M}), got {self.cov.shape}")
        if self.label not in STATE_LABELS:
            raise ValueError(f"unknown state label {self.label!r}; expected one of {STATE_LABELS}")


@dataclass
class OPOParams:
    """Homodyne phases and efficiencies for the on-threshold OPO example.

    eta_u defaults to 1 - eta_o (every photon not seen by the observer is
    collected by the unobserved channel).  The default phases are the
    documented operating point used throughout the CLI: at theta_o = pi/6
    the stationary SWV purity crosses 1 near eta_o ~ 0.07.
    """

    theta_o: float = np.pi / 6
    theta_u: float = 0.2
    eta_o: float = 0.5
    eta_u: float = field(default=None)  # type: ignore[assignment]
    hbar: float = 1.0

    def __post_init__(self):
        if self.eta_u is None:
            self.eta_u = 1.0 - float(self.eta_o)
        for name in ("theta_o", "theta_u", "eta_o", "eta_u", "hbar"):
            setattr(self, name, float(getattr(self, name)))
        if not (np.isfinite(self.eta_o) and np.isfinite(self.eta_u)):
            raise InvalidEfficiency("efficiencies must be finite")
        if self.eta_o < 0 or self.eta_u < 0:
            raise InvalidEfficiency(f"efficiencies must be non-negative, got eta_o={self.eta_o}, eta_u={self.eta_u}")
        if self.eta_o + self.eta_u > 1.0 + 1e-12:
            raise InvalidEfficiency(f"eta_o + eta_u = {self.eta_o + self.eta_u:g} exceeds 1")
        if self.hbar <= 0 or not np.isfinite(self.hbar):
            raise ValueError(f"hbar must be positive and finite, got {self.hbar}")


def _homodyne_row(theta, eta, hbar):
    return 2.0 * np.sqrt(eta / hbar) * np.array([[np.cos(theta), np.sin(theta)]])


def build_opo(params):
    """LGQSystem for the on-threshold OPO monitored by two homodyne channels."""
    if not isinstance(params, OPOParams):
        params = OPOParams(**params)
    hbar = params.hbar
    C_o = _homodyne_row(params.theta_o, params.eta_o, hbar)
    C_u = _homodyne_row(params.theta_u, params.eta_u, hbar)
    return LGQSystem(
        A=np.diag([0.0, -2.0]),
        D=hbar * np.eye(2),
        C_o=C_o,
        C_u=C_u,
        Gamma_o=-(hbar / 2.0) * C_o,
        Gamma_u=-(hbar / 2.0) * C_u,
        hbar=hbar,
    )


def kick(V, C, Gamma, sign):
    """Measurement kick K^{+/-}[V] = V C^T +/- Gamma^T, shape (M, L)."""
    if sign not in (1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign}")
    V = np.asarray(V, dtype=np.float64)
    C = np.atleast_2d(np.asarray(C, dtype=np.float64))
    Gamma = np.atleast_2d(np.asarray(Gamma, dtype=np.float64))
    if V.shape[-1] != C.shape[1] or C.shape != Gamma.shape:
        raise ShapeMismatch(f"incompatible shapes V {V.shape}, C {C.shape}, Gamma {Gamma.shape}")
    return V @ C.T + sign * Gamma.T


def check_physical(cov, hbar=1.0, tol=1e-9):
    """Whether cov + i*(hbar/2)*Sigma is positive semidefinite (min eig >= -tol)."""
    cov = np.asarray(cov, dtype=np.float64)
    M = cov.shape[0]
    if cov.shape != (M, M) or M % 2 != 0:
        raise ShapeMismatch(f"cov must be square with even dimension, got {cov.shape}")
    if not np.all(np.isfinite(cov)):
        return False
    H = cov + 1j * (hbar / 2.0) * symplectic_form(M // 2)
    return bool(np.min(np.linalg.eigvalsh(H)) >= -tol)


def purity(state, hbar=None):
    """Purity (hbar/2)^N / sqrt(det V) of a Gaussian state.

    Accepts a GaussianState or a bare covariance matrix (then hbar is
    required).  Raises SingularCovariance when det V <= 0.
    """
    if isinstance(state, GaussianState):
        cov, hbar = state.cov, state.hbar
    else:
        cov = np.asarray(state, dtype=np.float64)
        if hbar is None:
            raise ValueError("hbar is required when passing a bare covariance")
    if not np.all(np.isfinite(cov)):
        raise NonFiniteValue("covariance contains non-finite entries")
    n_modes = cov.shape[0] // 2
    det = np.linalg.det(cov)
    if det <= 0.0:
        raise SingularCovariance(f"covariance determinant {det:.3e} is not positive")
    return float((hbar / 2.0) ** n_modes / np.sqrt(det))


def wigner_contour(state, n_points=64):
    """Points on the one-standard-deviation Wigner ellipse of a state.

    Returns (n_points, dim) samples mean + chol(V) @ (cos phi, sin phi, ...)
    at angles uniform in the parameter phi.  Only the first two quadratures
    are swept for multimode states.
    """
    if n_points < 3:
        raise ValueError(f"n_points must be at least 3, got {n_points}")
    cov = state.cov
    try:
        L = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise SingularCovariance("covariance is not positive definite") from None
    phi = 2.0 * np.pi * np.arange(n_points) / n_points
    circle = np.zeros((state.mean.shape[0], n_points))
    circle[0] = np.cos(phi)
    circle[1] = np.sin(phi)
    return (state.mean[:, None] + L @ circle).T


def system_to_dict(system):
    """JSON-ready dict of the system matrices."""
    return {
        "A": system.A.tolist(),
        "D": system.D.tolist(),
        "C_o": system.C_o.tolist(),
        "C_u": system.C_u.tolist(),
        "Gamma_o": system.Gamma_o.tolist(),
        "Gamma_u": system.Gamma_u.tolist(),
        "hbar": system.hbar,
    }


def system_from_dict(data):
    """Build an LGQSystem from a dict: either explicit matrices (keys A, D,
    C_o, C_u, Gamma_o, Gamma_u, hbar) or {"opo": {theta_o, theta_u, eta_o,
    eta_u, hbar}}."""
    if "opo" in data:
        return build_opo(OPOParams(**data["opo"]))
    required = {"A", "D", "C_o", "C_u", "Gamma_o", "Gamma_u"}
    missing = required - set(data)
    if missing:
        raise ValueError(f"system definition is missing keys: {sorted(missing)}")
    return LGQSystem(
        A=np.array(data["A"], dtype=np.float64),
        D=np.array(data["D"], dtype=np.float64),
        C_o=np.array(data["C_o"], dtype=np.float64),
        C_u=np.array(data["C_u"], dtype=np.float64),
        Gamma_o=np.array(data["Gamma_o"], dtype=np.float64),
        Gamma_u=np.array(data["Gamma_u"], dtype=np.float64),
        hbar=float(data.get("hbar", 1.0)),
    )
