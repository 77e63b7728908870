"""Exception types shared across the package."""


class LGBError(Exception):
    """Base class for all errors raised by lgbanon."""


class InputError(LGBError, ValueError):
    """Malformed or inconsistent input (files, schema, mask, published directory).

    ``row`` and ``column`` locate the offending cell when known.
    """

    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class InfeasibleError(LGBError):
    """The requested (k, l) cannot be met on this table without suppression."""
