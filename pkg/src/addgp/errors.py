"""Exception types raised across the package."""


class AddGPError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(AddGPError, ValueError):
    """An argument violates a precondition (shape, range, finiteness)."""


class InvalidDataError(AddGPError, ValueError):
    """A dataset cannot be modelled as given, e.g. a constant column."""


class NumericalFailureError(AddGPError, ArithmeticError):
    """A factorization failed even after jitter escalation.

    ``jitter_levels`` lists every absolute jitter that was tried, in order.
    """

    def __init__(self, message, jitter_levels=()):
        super().__init__(message)
        self.jitter_levels = tuple(jitter_levels)


class DataParseError(AddGPError, ValueError):
    """Base class for CSV loading problems."""


class MissingFileError(DataParseError, FileNotFoundError):
    pass


class NonNumericCellError(DataParseError):
    def __init__(self, message, row, column):
        super().__init__(message)
        self.row = row
        self.column = column


class EmptyTableError(DataParseError):
    pass


class ModelLoadError(AddGPError):
    """A persisted model is malformed or fails its likelihood checksum."""
