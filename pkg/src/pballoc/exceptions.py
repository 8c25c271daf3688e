"""Exception hierarchy.

Errors split into two families so the CLI can map them to exit codes:
``InputError`` (bad data or configuration, exit 2) and ``ComputeError``
(inputs were well-formed but the computation cannot proceed, exit 3).
"""


class PBAllocError(Exception):
    """Base class for every error raised by this package."""


class InputError(PBAllocError, ValueError):
    pass


class ComputeError(PBAllocError, ArithmeticError):
    pass


class StructuralError(InputError):
    """Dimensions, labels or entity hierarchies do not line up."""


class ConfigurationError(InputError):
    pass


class InvalidInput(InputError):
    pass


class InvalidPressure(InvalidInput):
    pass


class ParseError(InputError):
    """Malformed input file. Carries file/line/column context."""

    def __init__(self, message, path=None, line=None, column=None):
        self.path = None if path is None else str(path)
        self.line = line
        self.column = column
        where = []
        if self.path is not None:
            where.append(self.path)
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class ChecksumMismatch(InputError):
    pass


class DegenerateInput(ComputeError):
    """A normalising total is zero, so shares are undefined."""


class DegenerateEntity(ComputeError):
    """A single entity has data that makes its share or ratio undefined."""


class IncompleteUnit(ComputeError):
    """A watershed or ecoregion lacks the totals needed to size its SOS."""


class NonProductiveEconomy(ComputeError):
    """(I - A) is singular or its inverse is not non-negative."""

    def __init__(self, message, column_sums=None):
        self.column_sums = column_sums
        super().__init__(message)
