"""Exception hierarchy shared by all flick modules.

The CLI maps these onto exit codes: ArgumentError -> 2,
FormatError/DataError/SelectionError -> 3, NumericError -> 4.
"""

from __future__ import annotations


class FlickError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(FlickError):
    """A file does not conform to its declared format (bad magic, truncation, bad JSON)."""


class DataError(FlickError):
    """A file parses but its contents violate a data invariant (duplicates, NaN, empty)."""


class ArgumentError(FlickError):
    """An operation was called with out-of-domain arguments."""


class NumericError(FlickError):
    """A numeric failure (NaN/Inf loss) was detected during training."""


class SelectionError(FlickError):
    """Cluster selection is impossible (no rankable clusters)."""


class StageError(FlickError):
    """Wraps an error raised inside a pipeline stage with the stage tag."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause
