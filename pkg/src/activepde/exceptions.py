"""Exception types raised across the package."""


class ActivePDEError(Exception):
    """Base class for all package errors."""


class ContractViolation(ActivePDEError, ValueError):
    """An input broke a documented precondition (shape, range, region)."""


class ConfigurationError(ActivePDEError, ValueError):
    pass


class DivergenceError(ActivePDEError, FloatingPointError):
    """Non-finite loss, residual or gradient encountered during training."""


class DegenerateDensityError(ActivePDEError):
    """A sampling density was identically zero on every proposal."""
