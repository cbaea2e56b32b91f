"""Exception hierarchy shared by all modules.

Two branches matter for the CLI exit-code contract: ``ValidationError``
(bad inputs or configuration, exit 2) and ``NumericError`` (a solver or
sampler failed at runtime, exit 3).
"""


class CtrwLabError(Exception):
    """Base class for all package errors."""


class ValidationError(CtrwLabError):
    """Invalid input, parameter, or configuration."""


class DomainError(ValidationError):
    """Evaluation point lies outside the operator's admissible domain."""


class ConfigurationError(ValidationError):
    """Inconsistent or malformed experiment configuration."""


class UnsupportedOrderError(ValidationError):
    """Spatial order alpha = 1 (or another unsupported order) requested."""


class UnsupportedInputError(ValidationError):
    """Input declares behaviour the numerics cannot handle (e.g. unknown tails)."""


class InsufficientResolutionError(ValidationError):
    """Sampled data is too coarse for the requested evaluation."""


class NumericError(CtrwLabError):
    """A numerical routine failed or refused to proceed."""


class GridResolutionError(NumericError):
    """Grid too coarse for the waiting-time mass split."""


class WindowError(NumericError):
    """Space window too small for the jump-kernel tail tolerance."""


class StabilityError(NumericError):
    """Explicit time step violates the marching stability bound."""


class InsufficientPathError(NumericError):
    """A simulated path did not reach the requested horizon."""
