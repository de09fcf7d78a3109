"""
Exception hierarchy. Every error carries the CLI exit code it maps to.
"""

from typing import Any, Optional


class HauslabError(Exception):
    """Base class for all library errors."""

    exit_code = 1

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.details = details

    def to_dict(self) -> dict:
        return {"error": type(self).__name__, "message": str(self), **self.details}


class DomainError(HauslabError, ValueError):
    """A parameter is outside the operation's domain (eps <= 0, single-point space, ...)."""

    exit_code = 2


class MalformedInputError(HauslabError, ValueError):
    """An input file or matrix is malformed or violates the metric axioms."""

    exit_code = 2

    def __init__(self, message: str, field: Optional[str] = None, witness: Any = None, **details: Any):
        super().__init__(message, field=field, witness=witness, **details)
        self.field = field
        self.witness = witness


class CapacityError(HauslabError):
    """A space exceeds the configured point cap."""

    exit_code = 2


class AmbientMismatchError(HauslabError):
    """Operands live in different ambient spaces."""

    exit_code = 3


class NestingViolationError(HauslabError):
    """K_{n+1} is not contained in K_n for some n."""

    exit_code = 4

    def __init__(self, message: str, index: int, **details: Any):
        super().__init__(message, index=index, **details)
        self.index = index
