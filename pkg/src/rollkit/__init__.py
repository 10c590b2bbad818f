"""Rubber rolling of axisymmetric bodies on a plane: geometry, reduced dynamics, reconstruction and checks."""

__version__ = "0.1.0"

from .coefficients import BodyParams, ReducedCoefficients, torus_defaults  # noqa: E402
from .errors import (ConfigError, ConstraintDriftError, DomainError, IntegrationError,  # noqa: E402
                     RollkitError, SingularityError)
from .geometry import SurfaceProfile, geometry  # noqa: E402
from .trajectory import Trajectory  # noqa: E402

__all__ = [
    "__version__", "BodyParams", "ReducedCoefficients", "torus_defaults", "SurfaceProfile",
    "geometry", "Trajectory", "RollkitError", "DomainError", "SingularityError",
    "IntegrationError", "ConstraintDriftError", "ConfigError",
]
