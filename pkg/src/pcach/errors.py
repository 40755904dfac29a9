"""Exception types shared across the package."""


class PCachError(Exception):
    """Base class for all package errors."""


class TraceParseError(PCachError, ValueError):
    """Malformed input line. Carries the 1-based line number when known."""

    def __init__(self, message, line_no=None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


class TraceValidationError(PCachError, ValueError):
    """A domain invariant was violated while building a value."""


class EmptyTraceError(PCachError, ValueError):
    """An operation that needs samples received none."""


class ParameterError(PCachError, ValueError):
    """An argument is outside its documented domain."""


class ConfigError(PCachError, ValueError):
    """A configuration object is inconsistent or unusable."""


class OrderingError(PCachError, ValueError):
    """Samples arrived out of chronological order."""


class FeatureError(PCachError, ValueError):
    """Feature extraction is impossible in the current state."""


class DegenerateDataError(PCachError, ValueError):
    """A training set cannot support fitting (e.g. single-label data)."""


class ModelError(PCachError, ValueError):
    """A model is empty or otherwise unusable for prediction."""


class DataError(PCachError, ValueError):
    """Input data is too short or otherwise unsuitable for the operation."""


class UndefinedRateError(PCachError, ZeroDivisionError):
    """A rate has a zero denominator; callers typically skip the item."""
