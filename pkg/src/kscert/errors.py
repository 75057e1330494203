"""Exception types shared across the package."""

from __future__ import annotations


class KSCertError(Exception):
    """Base class for all package errors."""


class DomainError(KSCertError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class PositivityError(KSCertError):
    """A field lost the sign it is required to keep (n >= 0, c > 0)."""

    def __init__(self, message: str, step: int | None = None, cell: tuple | None = None):
        super().__init__(message)
        self.step = step
        self.cell = cell


class CflError(KSCertError):
    """The time step exceeds the positivity-preserving transport bound."""

    def __init__(self, message: str, step: int | None = None, cell: tuple | None = None):
        super().__init__(message)
        self.step = step
        self.cell = cell


class SolverError(KSCertError):
    """A linear solve did not reach its tolerance."""

    def __init__(self, message: str, iterations: int = 0, residual: float = float("nan"),
                 step: int | None = None, cell: tuple | None = None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual
        self.step = step
        self.cell = cell


class StrideError(KSCertError):
    """A space-time residual needs every time level but snapshots were decimated."""


class ConfigError(KSCertError):
    """Malformed or incomplete run configuration."""

    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        super().__init__(message)
        self.key = key
        self.line = line


class BlowUpError(KSCertError):
    """The density left any sensible range (max-norm blow-up or non-finite values)."""

    def __init__(self, message: str, step: int | None = None, cell: tuple | None = None):
        super().__init__(message)
        self.step = step
        self.cell = cell
