"""Exception types raised across the package."""


class QsimError(Exception):
    """Base class for all package errors."""


class DomainError(QsimError, ValueError):
    """An argument lies outside the domain where a formula is defined."""


class NonconvergentQuadrature(QsimError, ArithmeticError):
    """Adaptive quadrature missed its tolerance and no divergence was recognized."""


class BracketFailure(QsimError, ArithmeticError):
    """The expected sign change for a bracketed root was not observed."""


class InfiniteMeanSuspected(QsimError):
    """Monte Carlo lineage samples hit the truncation cap, so the mean may be infinite."""

    def __init__(self, message, truncated_fraction):
        super().__init__(message)
        self.truncated_fraction = truncated_fraction


class ConfigError(QsimError, ValueError):
    """A run configuration failed validation."""
