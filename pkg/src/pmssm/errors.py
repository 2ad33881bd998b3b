"""Exception types shared across the package."""

from __future__ import annotations


class PMSSMError(Exception):
    """Base class for all package errors."""


class ConfigError(PMSSMError, ValueError):
    """Invalid experiment configuration."""


class DataError(PMSSMError, ValueError):
    """Malformed or unusable input data."""


class EstimateCollapsed(PMSSMError, FloatingPointError):
    """Every particle weight underflowed at some time step.

    Attributes
    ----------
    t : int
        1-based time index at which all weights were zero.
    """

    def __init__(self, t: int, message: str | None = None):
        self.t = int(t)
        super().__init__(message or f"all particle weights are zero at t={self.t}")


class UnsupportedOperation(PMSSMError, NotImplementedError):
    """The model does not provide what the requested operation needs."""
