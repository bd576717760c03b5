"""Exception hierarchy shared by every module.

Each class carries a stable ``kind`` string used in the machine-readable
error JSON written by the command line interface.
"""


class CongestionWavesError(Exception):
    """Base class for all package errors."""

    kind = "error"


class InvalidParametersError(CongestionWavesError, ValueError):
    kind = "invalid-parameters"


class DomainError(CongestionWavesError, ValueError):
    """Raised when a coefficient is evaluated at ``v <= 1``."""

    kind = "domain-error"


class UnsupportedOrderError(CongestionWavesError, ValueError):
    kind = "unsupported-order"


class SizeMismatchError(CongestionWavesError, ValueError):
    kind = "size-mismatch"


class NonpositiveCoefficientError(CongestionWavesError, ValueError):
    kind = "nonpositive-coefficient"


class ResolutionError(CongestionWavesError, ValueError):
    kind = "resolution-error"


class SolverFailure(CongestionWavesError, RuntimeError):
    kind = "solver-failure"


class SingularPivotError(CongestionWavesError, ArithmeticError):
    kind = "singular-pivot"


class AdmissibilityError(CongestionWavesError, ValueError):
    kind = "admissibility-error"


class CongestionError(CongestionWavesError, ArithmeticError):
    """The specific volume reached the congested state ``v <= 1``.

    Attributes
    ----------
    t : float or None
        Time at which the violation was detected.
    xi : float or None
        Location of the smallest value.
    value : float or None
        Smallest value of ``v`` found.
    """

    kind = "congestion-error"

    def __init__(self, message, t=None, xi=None, value=None):
        super().__init__(message)
        self.t = t
        self.xi = xi
        self.value = value


class ConfigError(CongestionWavesError, ValueError):
    kind = "config-error"


class ConfigParseError(ConfigError):
    kind = "parse-error"


class ConfigValidationError(ConfigError):
    kind = "validation-error"


class BoundaryContaminationWarning(UserWarning):
    """The perturbation came within a few cells of the domain boundary."""


class DiagonalDominanceWarning(UserWarning):
    """A tridiagonal system is not strictly diagonally dominant."""
