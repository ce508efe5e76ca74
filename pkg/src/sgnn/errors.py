"""Exception hierarchy shared across the engine.

The CLI maps these onto process exit codes: configuration and usage
problems exit 1, data problems exit 2, numeric faults exit 3.
"""


class SgnnError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(SgnnError):
    """Invalid or inconsistent configuration (exit code 1)."""


class GraphValidationError(SgnnError):
    """A graph or one of its components violates an invariant (exit code 2)."""


class DataFormatError(SgnnError):
    """A dataset file failed to parse or cross-check (exit code 2)."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NumericFault(SgnnError):
    """A non-finite value appeared in a numeric kernel (exit code 3)."""
