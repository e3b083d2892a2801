"""Exception taxonomy and process exit codes for lowrank_syk."""

# Standard Python Libraries
from enum import IntEnum
from typing import Optional


class ExitCode(IntEnum):
    """Process exit codes reported by the command-line tool."""

    SUCCESS = 0
    VALIDATION = 2
    CAPACITY = 3
    NUMERICAL = 4
    NON_CONVERGENCE = 5
    IO = 6


class LowRankSykError(Exception):
    """Base class for all errors raised by lowrank_syk."""

    exit_code: ExitCode = ExitCode.VALIDATION


class DomainError(LowRankSykError, ValueError):
    """A precondition of an operation was violated."""

    exit_code = ExitCode.VALIDATION


class ResolutionError(DomainError):
    """A spatial grid cannot resolve the requested modes."""


class SpeckleRejectedError(DomainError):
    """A speckle realization produced a detuning that is not far enough from zero."""


class TailMassError(DomainError):
    """A density grid is too narrow to hold the requested law."""


class CapacityError(LowRankSykError):
    """A problem size exceeds the configured capacity."""

    exit_code = ExitCode.CAPACITY


class NumericalError(LowRankSykError, ArithmeticError):
    """A numerical kernel failed or produced an invalid result."""

    exit_code = ExitCode.NUMERICAL


class NonConvergenceError(NumericalError):
    """A fixed-point iteration did not reach its tolerance."""

    exit_code = ExitCode.NON_CONVERGENCE

    def __init__(
        self,
        message: str,
        best_residual: float,
        iterations: int,
        suggested_mixing: Optional[float] = None,
    ):
        """Store the convergence diagnostics alongside the message."""
        super().__init__(message)
        self.best_residual = best_residual
        self.iterations = iterations
        self.suggested_mixing = suggested_mixing


class OutputError(LowRankSykError, OSError):
    """Run artifacts could not be written or read."""

    exit_code = ExitCode.IO
