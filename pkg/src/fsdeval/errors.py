"""Exception hierarchy shared across the toolkit.

Config errors mean the caller asked for something incoherent (bad thresholds,
bad anchor ladder); data errors mean the inputs themselves are malformed.
The CLI maps the former to exit code 2 and the latter to exit code 3.
"""

from __future__ import annotations


class FsdevalError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(FsdevalError):
    """Invalid configuration: thresholds, grids, anchor ladders, weights."""


class ValidationError(FsdevalError):
    """Input data violates a documented invariant."""


class OverlapError(ValidationError):
    """Segments that must be pairwise disjoint overlap."""


class RangeError(ValidationError):
    """A segment lies outside the clip's frame range, or start > end."""


class EmptyLabelError(ValidationError):
    """A ground-truth segment carries an empty letter sequence."""


class EmptyTruthError(FsdevalError):
    """Letter accuracy is undefined against an empty reference sequence."""


class ShapeError(FsdevalError):
    """Array dimensions or symbol sets do not line up."""


class ZeroGtError(FsdevalError):
    """Precision-recall analysis is undefined with zero ground-truth segments."""


class PeakUndefinedError(FsdevalError):
    """An attention map has no strictly positive cell, so its peak is undefined."""


class ParseError(FsdevalError):
    """A data file could not be parsed; carries the offending location."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:" if line is None else f"{path}:{line}:"
        elif line is not None:
            where = f"line {line}:"
        super().__init__(f"{where} {message}" if where else message)
