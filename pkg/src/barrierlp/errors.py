"""Exception hierarchy shared by every stage of the compiler."""

from __future__ import annotations


class BarrierLPError(Exception):
    """Base class for all compiler errors."""


class SourceError(BarrierLPError):
    """A problem with user input, optionally tied to a source position."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.message = message
        self.line = line
        self.col = col
        where = f"{line}:{col}: " if line is not None else ""
        super().__init__(f"{where}{message}")


class ParseError(SourceError):
    pass


class TypeCheckError(SourceError):
    pass


class ResolveError(SourceError):
    pass


class ParamError(SourceError):
    pass


class SBTreeError(BarrierLPError):
    """Internal invariant violation while building or annotating the SB-tree."""


class TimeBoundError(BarrierLPError):
    """A time bound is out of range (overflow or below the feasible minimum)."""


class IntervalError(BarrierLPError):
    pass


class ConstructionError(BarrierLPError):
    """LP generation hit an inconsistency between the schedule and the program."""


class ExecutionError(BarrierLPError):
    """The reference interpreter could not complete a run."""


class WitnessError(BarrierLPError):
    """A trace visits a state the LP model has no variable for."""
