"""Exception types shared across the package."""

from __future__ import annotations


class FreqBSError(Exception):
    """Base class for all package errors."""


class ValidationError(FreqBSError, ValueError):
    """An input violates a documented invariant.

    ``field`` carries a dotted path to the offending entry when the error
    comes from a circuit document (e.g. ``components.2.pairs.0``).
    """

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        self.field = field
        self.line = line
        where = []
        if field is not None:
            where.append(f"at {field}")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class DimensionError(FreqBSError, ValueError):
    pass


class ClassificationError(FreqBSError, ValueError):
    """A state term cannot be mapped onto the requested qubit subsystem."""


class SingularityError(FreqBSError, ArithmeticError):
    pass
