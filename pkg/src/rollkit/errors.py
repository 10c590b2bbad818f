"""Exception types shared across the package."""


class RollkitError(Exception):
    """Base class for all package errors."""


class DomainError(RollkitError, ValueError):
    """An angle lies outside the interval where a quantity is defined."""


class SingularityError(RollkitError):
    """Integration reached the Euler-angle chart boundary (sin(theta) too small).

    ``state`` is the last valid state and ``partial`` the trajectory computed
    up to that point (may be ``None`` when raised by a pointwise evaluation).
    """

    def __init__(self, message, state=None, partial=None):
        super().__init__(message)
        self.state = state
        self.partial = partial


class IntegrationError(RollkitError):
    """Step failure of an integrator (adaptive step rejected, drift exceeded, ...)."""

    def __init__(self, message, state=None, partial=None):
        super().__init__(message)
        self.state = state
        self.partial = partial


class ConstraintDriftError(IntegrationError):
    """Constraint residual |G qdot| grew past the hard limit."""


class ConfigError(RollkitError, ValueError):
    """Invalid scene configuration."""
