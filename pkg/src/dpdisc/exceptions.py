"""Exception and warning classes shared across the package."""


class DPDiscError(Exception):
    """Base class for all errors raised by dpdisc."""


class InvalidParameterError(DPDiscError, ValueError):
    pass


class EmptyDataError(DPDiscError, ValueError):
    pass


class BudgetOverspendError(DPDiscError):
    """Raised when the fractions drawn from a budget ledger exceed the total."""


class ExtractionFailedError(DPDiscError, RuntimeError):
    """The noisy histogram never exceeded the threshold (epsilon too small)."""


class OutOfRangeError(DPDiscError, ValueError):
    pass


class NoTargetError(DPDiscError, ValueError):
    pass


class FeatureExplosionError(DPDiscError, ValueError):
    pass


class UndefinedRatioError(DPDiscError, ZeroDivisionError):
    pass


class ConfigError(DPDiscError, ValueError):
    pass


class ParseError(DPDiscError, ValueError):
    """CSV parse failure; ``line`` is the 1-based line number in the file."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class DegenerateDataWarning(UserWarning):
    """Emitted when a statistic falls back because the data is degenerate."""
