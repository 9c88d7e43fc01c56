"""Core domain types: frame segments, labeled clips, and frame posteriors.

Frame indices are 0-based and segment endpoints are inclusive on both sides,
so a segment (3, 5) covers frames {3, 4, 5} and has length 3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyLabelError,
    OverlapError,
    RangeError,
    ShapeError,
    ValidationError,
)

# Letter inventory for ground-truth labels.  The two reserved symbols never
# appear inside a label: NO_LETTER marks non-fingerspelling regions in
# full-video sequences, BLANK is the CTC blank.
DEFAULT_ALPHABET = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"
NO_LETTER = "∅"
BLANK = "_"

# Column names for binary (fingerspelling vs not) posterior streams.
FS_SYMBOL = "FS"
NON_FS_SYMBOL = "NONFS"

# Tolerance for "rows sum to one" checks on posterior matrices.
ROW_SUM_TOL = 1e-6


# ---------------------------------------------------------------------------
# Segments
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Segment:
    """A temporal interval [start, end] with inclusive integer endpoints."""

    start: int
    end: int

    def __post_init__(self):
        if self.start < 0 or self.end < self.start:
            raise RangeError(f"invalid segment ({self.start}, {self.end})")

    @property
    def length(self) -> int:
        return self.end - self.start + 1


def segment_length(segment: Segment) -> int:
    """Number of frames covered by ``segment`` (inclusive endpoints)."""
    return segment.end - segment.start + 1


@dataclass(frozen=True)
class ScoredSegment:
    """A detected segment with a confidence score in [0, 1].

    Out-of-range or non-finite scores are rejected outright rather than
    clamped, so that upstream scoring bugs surface instead of being masked.
    """

    segment: Segment
    score: float

    def __post_init__(self):
        if not (isinstance(self.score, (int, float)) and math.isfinite(self.score)):
            raise ValidationError(f"score must be finite, got {self.score!r}")
        if not 0.0 <= self.score <= 1.0:
            raise ValidationError(f"score {self.score!r} outside [0, 1]")


@dataclass(frozen=True)
class LabeledSegment:
    """A segment carrying the letter sequence signed within it."""

    segment: Segment
    letters: str

    def __post_init__(self):
        if not self.letters:
            raise EmptyLabelError(
                f"segment ({self.segment.start}, {self.segment.end}) has no letters"
            )


# ---------------------------------------------------------------------------
# Clips
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Clip:
    """A video clip with its ground-truth fingerspelling segments.

    ``ground_truth`` is stored sorted by start frame; use ``validate_clip``
    to enforce the full set of invariants (range, disjointness, alphabet).
    """

    clip_id: str
    num_frames: int
    ground_truth: tuple[LabeledSegment, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if self.num_frames < 1:
            raise ValidationError(
                f"clip {self.clip_id!r}: num_frames must be >= 1, got {self.num_frames}"
            )
        object.__setattr__(self, "ground_truth", tuple(self.ground_truth))


def validate_clip(clip: Clip, alphabet: str = DEFAULT_ALPHABET) -> Clip:
    """Check all clip invariants and return the clip unchanged.

    Raises:
        RangeError: a segment extends outside [0, num_frames - 1].
        OverlapError: ground-truth segments share a frame or are unsorted.
        EmptyLabelError: a label is empty (raised at construction time).
        ValidationError: a label uses a letter outside ``alphabet``.
    """
    allowed = set(alphabet)
    prev: LabeledSegment | None = None
    for labeled in clip.ground_truth:
        seg = labeled.segment
        if seg.end >= clip.num_frames:
            raise RangeError(
                f"clip {clip.clip_id!r}: segment ({seg.start}, {seg.end}) exceeds "
                f"last frame {clip.num_frames - 1}"
            )
        if prev is not None:
            if seg.start <= prev.segment.end:
                if seg.start >= prev.segment.start or seg.end >= prev.segment.start:
                    raise OverlapError(
                        f"clip {clip.clip_id!r}: segments ({prev.segment.start}, "
                        f"{prev.segment.end}) and ({seg.start}, {seg.end}) overlap"
                    )
                raise ValidationError(
                    f"clip {clip.clip_id!r}: ground truth not sorted by start frame"
                )
        bad = set(labeled.letters) - allowed
        if bad:
            raise ValidationError(
                f"clip {clip.clip_id!r}: label {labeled.letters!r} uses symbols "
                f"outside the alphabet: {sorted(bad)}"
            )
        prev = labeled
    return clip


# ---------------------------------------------------------------------------
# Frame posteriors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FramePosteriors:
    """Per-frame probability rows over a declared symbol set.

    The symbol set is either the binary pair (FS_SYMBOL, NON_FS_SYMBOL) or a
    letter inventory extended with NO_LETTER and BLANK.  Rows must each sum
    to one within ROW_SUM_TOL.
    """

    clip_id: str
    symbols: tuple[str, ...]
    rows: np.ndarray

    def __post_init__(self):
        symbols = tuple(self.symbols)
        object.__setattr__(self, "symbols", symbols)
        if len(set(symbols)) != len(symbols):
            raise ValidationError(f"clip {self.clip_id!r}: duplicate posterior symbols")
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[1] != len(symbols):
            raise ShapeError(
                f"clip {self.clip_id!r}: posterior rows have shape {rows.shape}, "
                f"expected (T, {len(symbols)})"
            )
        if rows.size:
            if not np.all(np.isfinite(rows)) or rows.min() < 0.0 or rows.max() > 1.0:
                raise ValidationError(
                    f"clip {self.clip_id!r}: posterior entries must lie in [0, 1]"
                )
            sums = rows.sum(axis=1)
            off = np.abs(sums - 1.0)
            if off.max() > ROW_SUM_TOL:
                t = int(off.argmax())
                raise ValidationError(
                    f"clip {self.clip_id!r}: posterior row {t} sums to {sums[t]:.8f}"
                )
        rows.flags.writeable = False
        object.__setattr__(self, "rows", rows)

    @property
    def num_frames(self) -> int:
        return self.rows.shape[0]

    def column(self, symbol: str) -> np.ndarray:
        """The probability column for ``symbol``."""
        try:
            idx = self.symbols.index(symbol)
        except ValueError:
            raise ShapeError(
                f"clip {self.clip_id!r}: symbol {symbol!r} not among {self.symbols}"
            ) from None
        return self.rows[:, idx]

    def fingerspelling_probability(self) -> np.ndarray:
        """Per-frame probability of fingerspelling.

        Binary streams report the FS column directly; full letter posteriors
        report one minus the no-letter probability.
        """
        if FS_SYMBOL in self.symbols:
            return self.column(FS_SYMBOL)
        if NO_LETTER in self.symbols:
            return 1.0 - self.column(NO_LETTER)
        raise ShapeError(
            f"clip {self.clip_id!r}: symbol set carries neither "
            f"{FS_SYMBOL!r} nor {NO_LETTER!r}"
        )
