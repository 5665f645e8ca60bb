"""Exception types shared across the package."""


class SphereModeError(Exception):
    """Base class for all package-specific errors."""


class ZeroVector(SphereModeError):
    """A vector with (near-)zero norm cannot be normalized."""


class UnsupportedDimension(SphereModeError):
    """Requested operation is not available for this ambient dimension."""


class DomainError(SphereModeError):
    """Argument outside the mathematical domain of the operation."""


class NoConvergence(SphereModeError):
    """An iterative numeric routine exhausted its budget."""


class TargetUnreachable(SphereModeError):
    """Calibration target lies outside the achievable range."""


class DegenerateMean(SphereModeError):
    """Sample mean too close to zero to define a direction."""


class DegenerateDenominator(SphereModeError):
    """Test-statistic denominator vanished (all mass at the poles)."""


class UnsupportedRegime(SphereModeError):
    """Operation not defined for this asymptotic regime."""


class ParseError(SphereModeError):
    """Malformed input data file."""

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class NormalizationError(SphereModeError):
    """Input row too far from unit length to accept."""

    def __init__(self, message, row=None, norm=None):
        super().__init__(message)
        self.row = row
        self.norm = norm


class ConfigError(SphereModeError):
    """Invalid experiment configuration."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key
