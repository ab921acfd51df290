"""Exception types raised across the package."""

from __future__ import annotations


class ValvediagError(Exception):
    """Base class for all package errors."""


class ConfigError(ValvediagError, ValueError):
    """A configuration document or value violates its schema."""


class NoConvergence(ValvediagError):
    """The steady-state Newton iteration exceeded its iteration budget."""


class SingularSystem(ValvediagError):
    """No open valve connects any chamber; chamber pressures are indeterminate."""


class OutOfRange(ValvediagError):
    """The steady-state solution has a chamber pressure outside the physical range."""


class ConflictingFaults(ValvediagError, ValueError):
    """Two injected faults target the same valve."""


class SimulationError(ValvediagError):
    """A sample could not be simulated; carries the offending sample index."""

    def __init__(self, sample_index: int, cause: Exception):
        self.sample_index = sample_index
        self.cause = cause
        super().__init__(f"sample {sample_index}: {cause}")


class NumericalFailure(ValvediagError):
    """The quantile-regression LP did not terminate within its iteration budget."""


class EmptyPeriod(ValvediagError, ValueError):
    """A sensing system was requested for a period with no samples."""


class TraceFormatError(ValvediagError, ValueError):
    """A trace CSV file could not be parsed; message carries the line number."""


class ReportFormatError(ValvediagError, ValueError):
    """A fault report document is malformed."""
