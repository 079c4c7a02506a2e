"""Exception hierarchy shared by every pipeline stage."""

from __future__ import annotations


class CascadeError(ValueError):
    """Base class for all pipeline errors."""


class MalformedRecord(CascadeError):
    def __init__(self, line_no: int, reason: str) -> None:
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class NegativeValue(CascadeError):
    pass


class DuplicateTxId(CascadeError):
    pass


class NegativeFee(CascadeError):
    pass


class ConflictingClass(CascadeError):
    pass


class DuplicateAddress(CascadeError):
    pass


class InconsistentEntityLabel(CascadeError):
    pass


class UnknownAddress(CascadeError):
    pass


class EmptyFrame(CascadeError):
    pass


class SchemaMismatch(CascadeError):
    pass


class ClassTooSmall(CascadeError):
    pass


class UnknownEntity(CascadeError):
    pass


class LengthMismatch(CascadeError):
    pass


class BudgetTooSmall(CascadeError):
    pass
