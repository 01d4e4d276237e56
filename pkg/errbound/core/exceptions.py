"""
errbound/core/exceptions.py

Purpose: Root of the toolkit's exception families

Each service declares its own subclass (GeometryError, FunctionError, ...)
so callers can catch one family or everything the toolkit raises.
"""


class ErrboundError(Exception):
    """Base class of every error raised by the toolkit."""
    pass


class ContractViolationError(ErrboundError, ValueError):
    """Inputs break an operation's precondition (dimensions, ranges)."""
    pass
