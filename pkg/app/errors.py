"""Application error codes and the exception hierarchy shared by the CLI and the core."""

from __future__ import annotations

from enum import Enum


class ErrorCode(str, Enum):
    """Standardized error codes surfaced by the CLI."""

    CONFIG_ERROR = "config_error"
    SIZE_LIMIT_EXCEEDED = "size_limit_exceeded"
    DIMENSION_MISMATCH = "dimension_mismatch"
    NUMERICAL_ERROR = "numerical_error"
    IO_ERROR = "io_error"
    INTERNAL_ERROR = "internal_error"


class SimulationError(Exception):
    """Base class for every error raised on purpose by this package."""

    error_code: ErrorCode = ErrorCode.INTERNAL_ERROR

    def __init__(self, message: str, *, error_code: ErrorCode | None = None) -> None:
        super().__init__(message)
        if error_code is not None:
            self.error_code = error_code


class ConfigError(SimulationError, ValueError):
    """Invalid parameters, grids or config documents."""

    error_code = ErrorCode.CONFIG_ERROR


class SizeLimitError(SimulationError):
    """Dense realisation would exceed the configured number of sites."""

    error_code = ErrorCode.SIZE_LIMIT_EXCEEDED


class DimensionMismatchError(SimulationError, ValueError):
    error_code = ErrorCode.DIMENSION_MISMATCH


class NumericalError(SimulationError, ArithmeticError):
    """A numerical invariant failed (non-Hermitian trace, broken variational bound, ...)."""

    error_code = ErrorCode.NUMERICAL_ERROR


class OutputError(SimulationError, OSError):
    """Result files could not be written."""

    error_code = ErrorCode.IO_ERROR


def short_error_message(exc: BaseException, max_len: int = 300) -> str:
    """Return a concise, single-line message for logs and CLI output."""
    try:
        text = str(exc)
    except Exception:
        return exc.__class__.__name__
    line = next((ln.strip() for ln in text.splitlines() if ln.strip()), None)
    if not line:
        return exc.__class__.__name__
    if len(line) > max_len:
        line = line[:max_len] + "..."
    return line
