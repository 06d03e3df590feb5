"""Exception types shared across the package."""
from __future__ import annotations


class SparseCAError(Exception):
    """Base class for all package errors."""


class CapacityError(SparseCAError):
    """A computation would exceed a configured size or budget."""


class LengthError(SparseCAError):
    """A word or row is too short for the requested operation."""


class QuiescenceError(SparseCAError):
    """A local rule does not map the blank neighborhood to blank."""


class ParameterError(SparseCAError):
    """Invalid parameters for a construction."""


class PreconditionError(SparseCAError):
    """An input program lacks the structure an operation needs."""


class SearchError(SparseCAError):
    """A bounded search found no admissible point."""


class DecodeError(SparseCAError):
    """Bits or text could not be turned back into a program."""


class HaltedError(SparseCAError):
    """A halted machine was stepped."""


class OutOfSpaceFault(SparseCAError):
    """An agent head tried to leave its colony."""
