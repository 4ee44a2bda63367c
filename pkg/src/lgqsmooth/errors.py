"""Exception types shared across the package."""


class LgqError(Exception):
    """Base class for all errors raised by this package."""


class ShapeMismatch(LgqError):
    """Array arguments have inconsistent or invalid shapes."""


class NotHurwitz(LgqError):
    """A matrix required to be Hurwitz has an eigenvalue with Re >= 0."""


class Singular(LgqError):
    """A linear system or matrix inversion is singular beyond tolerance."""


class SingularCovariance(Singular):
    """A covariance matrix is singular or indefinite where it must not be."""


class SingularHaloedVariance(Singular):
    """The filtered-minus-true covariance cannot be combined (singular)."""


class SingularCombination(Singular):
    """A filter/retrofilter moment combination is singular."""


class NoConvergence(LgqError):
    """Time-marching failed to reach a stationary point within the horizon.

    Carries the final iterate and diagnostics so callers can distinguish
    slow convergence from genuine divergence.
    """

    def __init__(self, message, final=None, residual=None, mid=None, steps=None):
        super().__init__(message)
        self.final = final
        self.residual = residual
        self.mid = mid
        self.steps = steps


class NonFiniteValue(LgqError):
    """A computation produced NaN or infinity."""


class InvalidEfficiency(LgqError):
    """Measurement efficiencies must satisfy 0 <= eta and eta_o + eta_u <= 1."""


class IdentityViolation(LgqError):
    """Two mathematically equivalent computations disagreed beyond tolerance."""

    def __init__(self, message, max_error=None):
        super().__init__(message)
        self.max_error = max_error


class DegeneratePhase(LgqError):
    """A closed-form asymptotic expression is degenerate at this phase."""
