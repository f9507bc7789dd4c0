"""Exception types shared across the package."""


class DmlError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(DmlError, ValueError):
    pass


class UndefinedMetricError(DmlError, ValueError):
    pass


class DivergedTrainingError(DmlError, RuntimeError):
    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class UnsupportedFormatError(DmlError):
    pass


class ModelParseError(DmlError):
    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class SchemaError(DmlError, ValueError):
    """CSV content does not match the expected layout."""

    def __init__(self, message, row=None, column=None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.row = row
        self.column = column
