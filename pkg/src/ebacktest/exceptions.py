"""Exception hierarchy shared by every module of the package."""


class EBacktestError(Exception):
    """Base class for all package errors."""


class DomainError(EBacktestError, ValueError):
    """A loss or forecast lies outside the domain of the selected kernel."""

    def __init__(self, message, row=None):
        self.detail = message
        if row is not None:
            message = f"{message} (row {row})"
        super().__init__(message)
        self.row = row


class AlignmentError(EBacktestError, ValueError):
    """Loss and forecast series are not aligned on a common time index."""


class InvalidStep(EBacktestError, ArithmeticError):
    """A betting step would drive the wealth process negative."""


class FitError(EBacktestError, RuntimeError):
    """A model fit (GARCH or GPD) failed to produce a feasible estimate."""


class ConfigError(EBacktestError, ValueError):
    """Malformed scenario configuration or command-line input."""

    def __init__(self, message, line=None, key=None):
        parts = [message]
        if key is not None:
            parts.append(f"key {key!r}")
        if line is not None:
            parts.append(f"line {line}")
        super().__init__(": ".join(parts[:1]) + ("" if len(parts) == 1 else " [" + ", ".join(parts[1:]) + "]"))
        self.line = line
        self.key = key


class SchemaError(EBacktestError, ValueError):
    """A CSV file does not match its declared schema (unknown or missing columns)."""
