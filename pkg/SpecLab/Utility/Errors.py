"""Exception classes shared by every SpecLab subpackage.

Each error also derives from the matching built-in (ValueError for bad
input, RuntimeError for numerical failure) so callers can catch either.
"""


class SpecLabError(Exception):
    pass


class ResolutionError(SpecLabError, ValueError):
    """The requested grid exceeds the configured node budget."""


class DegenerateDomainError(SpecLabError, ValueError):
    """A domain has no interior node or no measurable volume."""


class ParameterRangeError(SpecLabError, ValueError):
    pass


class OracleRangeError(SpecLabError, ValueError):
    """Bessel order or zero index outside the tabulated range."""


class OutsideReferenceBallError(SpecLabError, ValueError):
    pass


class SpacingMismatchError(SpecLabError, ValueError):
    pass


class ZeroVectorError(SpecLabError, ValueError):
    pass


class EmptyShellError(SpecLabError, ValueError):
    pass


class GridExtentError(SpecLabError, ValueError):
    pass


class InsufficientDataError(SpecLabError, ValueError):
    pass


class ConfigError(SpecLabError, ValueError):
    pass


class SolverFailure(SpecLabError, RuntimeError):
    """The eigensolver did not reach its tolerance.

    Args:
        message (str): what failed
        residuals (array-like): best residual norms reached, one per pair
    """

    def __init__(self, message, residuals=None) -> None:
        super().__init__(message)
        self.residuals = residuals


class DegenerateSpanError(SpecLabError, RuntimeError):
    def __init__(self, message, sigma_min=None) -> None:
        super().__init__(message)
        self.sigma_min = sigma_min
