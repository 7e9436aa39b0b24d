"""Exception types shared across the toolkit."""


class DetAttackError(Exception):
    """Base class for all toolkit errors."""


class ConfigurationError(DetAttackError, ValueError):
    """Malformed or inconsistent input (shapes, dimensions, invalid tables)."""


class UndefinedConditionalError(DetAttackError, ValueError):
    """Conditioning on an event of probability zero."""


class InfeasibleError(DetAttackError):
    """An attack cannot be realised for the requested efficiencies."""

    def __init__(self, message, margin=None):
        super().__init__(message)
        self.margin = margin


class NumericalFailure(DetAttackError, RuntimeError):
    """The LP solver did not produce a certificate that re-validates."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals or {}
