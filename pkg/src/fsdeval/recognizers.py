"""Pluggable letter recognizers and deterministic mock implementations.

Accuracy-based metrics need a recognizer: any callable mapping a clip and a
frame segment to a letter string.  This module fixes that contract and ships
three implementations — a perfect oracle that reads letters off the
ground-truth alignment, a seeded noisy wrapper with a controllable error
rate, and an adapter replaying transcripts recorded in a detections file.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from typing import Mapping, Protocol, Sequence

import numpy as np

from .errors import ConfigError, ValidationError
from .metrics import temporal_iou
from .model import DEFAULT_ALPHABET, Clip, ScoredSegment, Segment


class Recognizer(Protocol):
    """Callable contract: deterministic letters for a segment of a clip.

    Implementations must be pure for a fixed configuration and never emit
    reserved symbols; an empty string is a valid output.
    """

    def __call__(self, clip: Clip, segment: Segment) -> str: ...


def _best_ground_truth(clip: Clip, segment: Segment):
    """Ground-truth segment with maximal IoU, or None when nothing overlaps.

    Ties break toward the earlier ground-truth start, then lower index —
    the same convention the matching procedures use.
    """
    best = None
    best_iou = 0.0
    for labeled in clip.ground_truth:
        iou = temporal_iou(segment, labeled.segment)
        if iou > best_iou:
            best_iou = iou
            best = labeled
    return best


def oracle_recognize(clip: Clip, segment: Segment) -> str:
    """Read off the letters a perfectly aligned recognizer would produce.

    The ground-truth segment overlapping ``segment`` most is assigned a
    uniform letter-to-frame alignment: letter j of k occupies an equal
    sub-span, with midpoint start + (j + 0.5) * length / k.  The output is
    exactly the letters whose midpoints fall inside ``segment``; disjoint
    segments yield the empty string.
    """
    best = _best_ground_truth(clip, segment)
    if best is None:
        return ""
    gt = best.segment
    count = len(best.letters)
    kept = []
    for j, letter in enumerate(best.letters):
        midpoint = gt.start + (j + 0.5) * gt.length / count
        if segment.start <= midpoint < segment.end + 1:
            kept.append(letter)
    return "".join(kept)


def noisy_recognize(
    clip: Clip,
    segment: Segment,
    error_rate: float,
    seed: int = 0,
    alphabet: str = DEFAULT_ALPHABET,
) -> str:
    """Oracle output corrupted at a controlled expected rate.

    Each oracle letter is independently corrupted with probability
    ``error_rate``: substituted with a different letter (half the time) or
    deleted / prefixed with a spurious letter (a quarter each), so the
    expected letter accuracy on a full-coverage segment is about
    1 - error_rate.  The stream is seeded from (seed, clip_id, segment), so
    a fixed configuration reproduces byte-identical output regardless of
    call order.
    """
    if not 0.0 <= error_rate <= 1.0:
        raise ConfigError(f"error_rate must be in [0, 1], got {error_rate}")
    truth = oracle_recognize(clip, segment)
    if error_rate == 0.0 or not truth:
        return truth
    entropy = [seed, zlib.crc32(clip.clip_id.encode("utf-8")), segment.start, segment.end]
    rng = np.random.default_rng(np.random.SeedSequence(entropy))
    out: list[str] = []
    for letter in truth:
        if rng.random() >= error_rate:
            out.append(letter)
            continue
        op = rng.random()
        others = alphabet.replace(letter, "")
        if op < 0.5:
            out.append(others[rng.integers(len(others))])
        elif op < 0.75:
            pass
        else:
            out.append(others[rng.integers(len(others))])
            out.append(letter)
    return "".join(out)


@dataclass(frozen=True)
class OracleRecognizer:
    """Recognizer wrapper around :func:`oracle_recognize`."""

    def __call__(self, clip: Clip, segment: Segment) -> str:
        return oracle_recognize(clip, segment)


@dataclass(frozen=True)
class NoisyRecognizer:
    """Recognizer wrapper around :func:`noisy_recognize` with fixed settings."""

    error_rate: float
    seed: int = 0
    alphabet: str = DEFAULT_ALPHABET

    def __post_init__(self) -> None:
        if not 0.0 <= self.error_rate <= 1.0:
            raise ConfigError(f"error_rate must be in [0, 1], got {self.error_rate}")

    def __call__(self, clip: Clip, segment: Segment) -> str:
        return noisy_recognize(clip, segment, self.error_rate, self.seed, self.alphabet)


class ExternalRecognizer:
    """Replays transcripts recorded alongside detections.

    Built from a detections structure whose segments carry letters (the
    offline output of a real recognizer); looking up a segment that was
    never recorded is an error rather than a silent empty string.
    """

    def __init__(self, transcripts: Mapping[tuple[str, int, int], str]):
        self._transcripts = dict(transcripts)

    @classmethod
    def from_detections(
        cls,
        detections: Mapping[str, Sequence[tuple[ScoredSegment, str]]],
    ) -> ExternalRecognizer:
        transcripts: dict[tuple[str, int, int], str] = {}
        for clip_id, entries in detections.items():
            for scored, letters in entries:
                key = (clip_id, scored.segment.start, scored.segment.end)
                transcripts[key] = letters
        return cls(transcripts)

    def __call__(self, clip: Clip, segment: Segment) -> str:
        key = (clip.clip_id, segment.start, segment.end)
        try:
            return self._transcripts[key]
        except KeyError:
            raise ValidationError(
                f"no recorded transcript for segment ({segment.start}, {segment.end}) "
                f"of clip {clip.clip_id!r}"
            ) from None
