"""Exception types shared across the package."""

from __future__ import annotations


class ClparseError(Exception):
    """Base class for package-level errors."""


class UsageError(ClparseError):
    """A caller broke an operation's precondition (unknown variable,
    dead snapshot, malformed path, ...).  Distinct from inconsistency:
    the store is fine, the call was not."""


class InconsistencyError(ClparseError):
    """A mutation contradicted information already in the store
    (status clash, atom clash, over-saturated valency list)."""


class GrammarError(ClparseError):
    """A grammar file failed to load.  Carries the 1-based source line."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
