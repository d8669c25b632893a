"""Exception types shared across the toolkit.

DataError subclasses signal malformed or inconsistent input and map to CLI
exit code 1; ConfigError signals bad parameters or configuration and maps to
exit code 2.
"""

from __future__ import annotations


class DataError(Exception):
    """Base class for malformed or inconsistent input data."""


class FormatError(DataError):
    """A file (or one line of it) failed to parse."""

    def __init__(self, reason: str, *, source: str | None = None, line: int | None = None):
        self.reason = reason
        self.source = source
        self.line = line
        where = source if source is not None else "<input>"
        if line is not None:
            where = f"{where}:{line}"
        super().__init__(f"{where}: {reason}")


class DuplicateId(DataError):
    """The same product id appeared twice in a catalog."""


class UnknownLabel(DataError):
    """A relevance label outside E/S/C/I."""


class ConflictingDuplicate(DataError):
    """The same (query, product, split) judged twice with different labels."""


class RankGap(DataError):
    """Ranks of a run are not exactly 1..n."""


class DuplicateDoc(DataError):
    """The same product appeared twice in one query's run."""


class EmptyCatalog(DataError):
    """Tried to build an index over zero documents."""


class MismatchedQuerySets(DataError):
    """Paired comparison over two different query sets."""


class TooFewSamples(DataError):
    """Paired comparison needs at least two common queries."""


class UnparsableVerdict(DataError):
    """Validator reply did not start with yes or no."""


class BackendError(Exception):
    """Text-generation backend failed (transport or malformed response)."""


class ConfigError(Exception):
    """Invalid configuration or parameter value."""
