"""Quantum state smoothing for linear Gaussian quantum systems.

Simulation of partially observed Gaussian trajectories, closed-form
filtered / retrofiltered / smoothed state estimation, and steady-state
purity-recovery analysis, with a compiled integration core and a
pure-numpy fallback (see lgqsmooth._core.BACKEND).
"""

from ._core import BACKEND
from .errors import (
    DegeneratePhase,
    IdentityViolation,
    InvalidEfficiency,
    LgqError,
    NoConvergence,
    NonFiniteValue,
    NotHurwitz,
    ShapeMismatch,
    Singular,
    SingularCombination,
    SingularCovariance,
    SingularHaloedVariance,
)
from .model import (
    GaussianState,
    LGQSystem,
    OPOParams,
    build_opo,
    check_physical,
    kick,
    purity,
    symplectic_form,
    system_from_dict,
    system_to_dict,
    wigner_contour,
)
from .trajectory import (
    MeasurementRecord,
    TimeGrid,
    TrueTrajectory,
    integrate_true_cov,
    records_from_trajectory,
    simulate_true,
    unconditioned_variance,
)
from .estimation import (
    EstimationRun,
    FilterOutput,
    RetrofilterOutput,
    SmootherOutput,
    classical_filter,
    classical_retrofilter,
    classical_smoother,
    haloed_retrofilter,
    lgq_smoother,
    quantum_filter,
    run_estimation,
    swv_state,
)
from .linalg import is_hurwitz, is_psd, regularized_inverse, solve_lyapunov, steady_riccati
from .steady import (
    AsymptoticPrediction,
    HighEfficiencyFit,
    SteadyStateReport,
    high_efficiency_Q,
    low_efficiency_formulas,
    rpr_high_efficiency_check,
    steady_report,
)
from .analysis import (
    MCReport,
    StateSnapshot,
    SweepResult,
    efficiency_scan,
    mc_consistency,
    snapshot_states,
    sweep_rpr,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "__version__",
    # errors
    "LgqError", "ShapeMismatch", "NotHurwitz", "Singular", "SingularCovariance",
    "SingularHaloedVariance", "SingularCombination", "NoConvergence",
    "NonFiniteValue", "InvalidEfficiency", "IdentityViolation", "DegeneratePhase",
    # model
    "LGQSystem", "GaussianState", "OPOParams", "build_opo", "kick",
    "check_physical", "purity", "wigner_contour", "symplectic_form",
    "system_to_dict", "system_from_dict",
    # trajectory
    "TimeGrid", "MeasurementRecord", "TrueTrajectory", "integrate_true_cov",
    "simulate_true", "records_from_trajectory", "unconditioned_variance",
    # estimation
    "FilterOutput", "RetrofilterOutput", "SmootherOutput", "EstimationRun",
    "classical_filter", "classical_retrofilter", "classical_smoother",
    "quantum_filter", "haloed_retrofilter", "lgq_smoother", "swv_state",
    "run_estimation",
    # linalg
    "solve_lyapunov", "is_hurwitz", "is_psd", "regularized_inverse", "steady_riccati",
    # steady state and asymptotics
    "SteadyStateReport", "AsymptoticPrediction", "HighEfficiencyFit",
    "steady_report", "low_efficiency_formulas", "high_efficiency_Q",
    "rpr_high_efficiency_check",
    # sweeps, snapshots, ensembles
    "SweepResult", "StateSnapshot", "MCReport", "sweep_rpr", "efficiency_scan",
    "snapshot_states", "mc_consistency",
]
