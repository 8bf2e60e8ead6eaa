"""Exception types shared across the package."""

from __future__ import annotations


class TradeBargainError(Exception):
    """Base class for all package-specific errors."""


class ParameterDomainError(TradeBargainError, ValueError):
    """A parameter lies outside its admissible domain."""


class UnboundedMarkupError(TradeBargainError, ValueError):
    """Residual demand is too inelastic for a finite oligopoly markup (epsilon <= 1)."""


class InfeasibleOutsideOptionError(TradeBargainError, ValueError):
    """A generalized outside option leaves no gains from trade to split."""


class SingularSystemError(TradeBargainError, ValueError):
    """A pass-through linear system is singular and cannot be solved."""


class ConvergenceError(TradeBargainError, RuntimeError):
    """An iterative solver stopped before reaching its tolerance."""

    def __init__(self, message: str, residual: float | None = None, iterations: int | None = None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class DataSchemaError(TradeBargainError, ValueError):
    """Tabular input does not match the documented schema."""


class ConfigError(TradeBargainError, ValueError):
    """A run configuration is malformed or inconsistent."""
