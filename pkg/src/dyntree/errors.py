"""Exception hierarchy.

Every error is a ``ValueError`` so callers that only care about "bad input"
can catch that; the CLI maps any :class:`DynTreeError` to exit code 2 and
prints the class name, which is the invariant that was violated.
"""

from __future__ import annotations


class DynTreeError(ValueError):
    """Base class for all validation errors raised by this package."""

    def __init__(self, message: str, row: int | None = None, col: int | None = None):
        self.row = row
        self.col = col
        where = ""
        if row is not None and col is not None:
            where = f" at (row {row}, col {col})"
        elif row is not None:
            where = f" at (row {row})"
        super().__init__(f"{type(self).__name__}{where}: {message}")


class ShapeMismatch(DynTreeError):
    pass


class NonIncreasingViolation(DynTreeError):
    pass


class ProbabilityOutOfRange(DynTreeError):
    pass


class DuplicateTokenInRow(DynTreeError):
    pass


class VocabTooSmall(DynTreeError):
    pass


class NotADistribution(DynTreeError):
    pass


class InvalidBudget(DynTreeError):
    pass


class ExplosionCap(DynTreeError):
    pass


class MalformedCandidates(DynTreeError):
    pass


class PrefixClosureViolation(DynTreeError):
    pass


class RankOutOfRange(DynTreeError):
    pass


class AlignmentMismatch(DynTreeError):
    pass


class MissingCell(DynTreeError):
    pass


class BadParam(DynTreeError):
    pass
