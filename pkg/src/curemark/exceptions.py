"""Exception types shared across the package."""


class CuremarkError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(CuremarkError, ValueError):
    """Invalid configuration: dimension mismatches, bad partitions, bad options."""


class NumericError(CuremarkError, ArithmeticError):
    """A non-finite intermediate was produced during likelihood evaluation.

    ``index`` identifies the offending record (and ``draw`` the offending
    posterior draw, where applicable).
    """

    def __init__(self, message, index=None, draw=None):
        super().__init__(message)
        self.index = index
        self.draw = draw


class DataParseError(CuremarkError, ValueError):
    """Malformed input data file; carries the offending row/column."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class ProprietyError(CuremarkError, RuntimeError):
    """Posterior propriety conditions failed and the caller did not override."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class ModelKindError(CuremarkError, TypeError):
    """An operation was requested for an incompatible model kind."""
