"""Maximum Sequence Accuracy: full-video letter sequences and the score
threshold sweep.

The reference sequence concatenates ground-truth labels with a single
no-letter symbol wherever uncovered frames precede, separate, or follow
segments.  The predicted sequence at threshold delta_f does the same over
the surviving detections after suppression.  MSA is the best corpus
accuracy over a grid of thresholds.

Corpus pooling sums per-clip edit distances over summed reference lengths
(micro average, the way WER tooling pools utterances); ``aggregate="macro"``
averages per-clip accuracies instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

from .errors import ConfigError, OverlapError, RangeError, ValidationError
from .model import NO_LETTER, Clip, LabeledSegment, ScoredSegment, Segment
from .sequences import edit_distance

Recognizer = Callable[[Clip, Segment], str]


def build_label_sequence(
    clip: Clip, segments: Sequence[LabeledSegment] | None = None
) -> str:
    """Concatenate segment labels with no-letter markers for uncovered gaps.

    ``segments`` defaults to the clip's ground truth; pass recognized
    detections to build the predicted sequence.  Segments must be sorted,
    disjoint, and inside the clip.
    """
    if segments is None:
        segments = clip.ground_truth
    parts = []
    cursor = 0  # first frame not yet accounted for
    for labeled in segments:
        seg = labeled.segment
        if seg.start < cursor:
            raise OverlapError(
                f"clip {clip.clip_id!r}: segment ({seg.start}, {seg.end}) overlaps "
                "or precedes an earlier one"
            )
        if seg.end >= clip.num_frames:
            raise RangeError(
                f"clip {clip.clip_id!r}: segment ({seg.start}, {seg.end}) exceeds "
                f"last frame {clip.num_frames - 1}"
            )
        if seg.start > cursor:
            parts.append(NO_LETTER)
        parts.append(labeled.letters)
        cursor = seg.end + 1
    if cursor < clip.num_frames:
        parts.append(NO_LETTER)
    return "".join(parts)


def select_detections(
    preds: Sequence[ScoredSegment],
    score_threshold: float,
    overlap_tolerance: float = 0.0,
) -> list[Segment]:
    """Suppress below-threshold detections, then greedily keep by score,
    discarding candidates that overlap an already-kept segment.

    With the default zero tolerance the output is pairwise disjoint.  A
    positive tolerance admits candidates whose IoU with every kept segment
    is at or below it, then trims overlapping frames from the lower-scored
    side so the result is still disjoint and usable for concatenation.
    """
    order = sorted(
        range(len(preds)),
        key=lambda i: (-preds[i].score, preds[i].segment.start, i),
    )
    kept: list[Segment] = []
    for i in order:
        if preds[i].score < score_threshold:
            continue
        seg = preds[i].segment
        if _admit(seg, kept, overlap_tolerance):
            kept.append(seg)
    if overlap_tolerance > 0.0:
        kept = _trim_overlaps(kept)
    return sorted(kept, key=lambda s: s.start)


def _admit(seg: Segment, kept: list[Segment], tolerance: float) -> bool:
    from .metrics import temporal_iou

    for k in kept:
        if k.start <= seg.end and seg.start <= k.end:
            if tolerance <= 0.0 or temporal_iou(seg, k) > tolerance:
                return False
    return True


def _trim_overlaps(kept_in_score_order: list[Segment]) -> list[Segment]:
    final: list[Segment] = []
    for seg in kept_in_score_order:
        s, e = seg.start, seg.end
        ok = True
        for f in final:
            if f.start <= e and s <= f.end:
                if f.start <= s and f.end >= e:
                    ok = False  # fully covered by a higher-scored segment
                elif f.start <= s:
                    s = f.end + 1
                elif f.end >= e:
                    e = f.start - 1
                else:
                    ok = False  # higher-scored segment strictly inside
            if not ok or s > e:
                ok = False
                break
        if ok:
            final.append(Segment(s, e))
    return final


# ---------------------------------------------------------------------------
# Threshold sweep
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClipSweepProfile:
    """Per-clip edit distance as a step function of the score threshold.

    ``breaks`` holds the clip's distinct detection scores in descending
    order; ``distances[j]`` is the distance for thresholds in
    (breaks[j], breaks[j-1]], with distances[0] covering thresholds above
    every score (empty selection).
    """

    breaks: tuple[float, ...]
    distances: tuple[int, ...]
    ref_len: int

    def distance_at(self, threshold: float) -> int:
        # number of breaks >= threshold, via scan (breaks are few)
        idx = 0
        for s in self.breaks:
            if s >= threshold:
                idx += 1
            else:
                break
        return self.distances[idx]


def clip_sweep_strings(
    clip: Clip,
    preds: Sequence[ScoredSegment],
    recognize: Recognizer,
    overlap_tolerance: float = 0.0,
) -> tuple[str, tuple[float, ...], list[str]]:
    """Reference sequence, descending distinct scores, and the predicted
    sequence for each selection regime (index 0 = empty selection).

    Greedy selection is incremental: lowering the threshold only ever adds
    lower-scored segments, so one pass with snapshots covers every regime.
    """
    ref = build_label_sequence(clip)
    order = sorted(
        range(len(preds)),
        key=lambda i: (-preds[i].score, preds[i].segment.start, i),
    )
    kept: list[Segment] = []
    breaks: list[float] = []
    hyps = [_sequence_for(clip, kept, recognize, overlap_tolerance)]
    i = 0
    while i < len(order):
        score = preds[order[i]].score
        while i < len(order) and preds[order[i]].score == score:
            seg = preds[order[i]].segment
            if _admit(seg, kept, overlap_tolerance):
                kept.append(seg)
            i += 1
        breaks.append(score)
        hyps.append(_sequence_for(clip, kept, recognize, overlap_tolerance))
    return ref, tuple(breaks), hyps


def _sequence_for(
    clip: Clip,
    kept_in_score_order: list[Segment],
    recognize: Recognizer,
    overlap_tolerance: float,
) -> str:
    segs = kept_in_score_order
    if overlap_tolerance > 0.0:
        segs = _trim_overlaps(segs)
    # Detections recognized as empty contribute no letters; their frames are
    # treated as uncovered so neighbouring no-letter regions merge.
    labeled = []
    for s in segs:
        text = recognize(clip, s)
        if text:
            labeled.append(LabeledSegment(s, text))
    labeled.sort(key=lambda l: l.segment.start)
    return build_label_sequence(clip, labeled)


def clip_sweep_profile(
    clip: Clip,
    preds: Sequence[ScoredSegment],
    recognize: Recognizer,
    overlap_tolerance: float = 0.0,
) -> ClipSweepProfile:
    ref, breaks, hyps = clip_sweep_strings(clip, preds, recognize, overlap_tolerance)
    distances = tuple(edit_distance(ref, h) for h in hyps)
    return ClipSweepProfile(breaks, distances, len(ref))


@dataclass(frozen=True)
class MsaResult:
    """Best corpus accuracy over the threshold grid.

    ``threshold`` is the largest grid value attaining the maximum;
    ``math.inf`` means suppressing every detection scored best.
    """

    value: float
    threshold: float
    aggregate: str
    curve: tuple[tuple[float, float], ...] | None = None


def sweep_profiles(
    profiles: Sequence[ClipSweepProfile],
    grid: Sequence[float] | None = None,
    aggregate: str = "pooled",
    keep_curve: bool = False,
) -> MsaResult:
    """Evaluate corpus accuracy over a threshold grid and take the max.

    The default grid is every distinct detection score plus one sentinel
    above all of them (the empty selection); by construction the accuracy
    only changes at score values, so this grid is complete.
    """
    if aggregate not in ("pooled", "macro"):
        raise ConfigError(f"aggregate must be 'pooled' or 'macro', got {aggregate!r}")
    if not profiles:
        raise ValidationError("MSA undefined over an empty corpus")
    if grid is None:
        candidates = sorted({s for p in profiles for s in p.breaks}, reverse=True)
        candidates.insert(0, math.inf)
    else:
        candidates = sorted(set(grid), reverse=True)
        if not candidates or any(math.isnan(c) for c in candidates):
            raise ConfigError("threshold grid must be non-empty and NaN-free")

    curve: list[tuple[float, float]] = []
    best_value = -math.inf
    best_threshold = math.inf
    if aggregate == "pooled":
        total_ref = sum(p.ref_len for p in profiles)
        events: list[tuple[float, int]] = []
        base = 0
        for p in profiles:
            base += p.distances[0]
            for j, s in enumerate(p.breaks):
                events.append((s, p.distances[j + 1] - p.distances[j]))
        events.sort(key=lambda e: -e[0])
        k = 0
        total = base
        for threshold in candidates:
            while k < len(events) and events[k][0] >= threshold:
                total += events[k][1]
                k += 1
            acc = 1.0 - total / total_ref
            curve.append((threshold, acc))
            if acc > best_value:
                best_value = acc
                best_threshold = threshold
    else:
        n = len(profiles)
        for threshold in candidates:
            acc_sum = 0.0
            for p in profiles:
                acc_sum += 1.0 - p.distance_at(threshold) / p.ref_len
            acc = acc_sum / n
            curve.append((threshold, acc))
            if acc > best_value:
                best_value = acc
                best_threshold = threshold
    return MsaResult(
        best_value,
        best_threshold,
        aggregate,
        tuple(reversed(curve)) if keep_curve else None,
    )


def msa(
    clips: Sequence[Clip],
    detections: Mapping[str, Sequence[ScoredSegment]],
    recognizer: Recognizer,
    grid: Sequence[float] | None = None,
    aggregate: str = "pooled",
    overlap_tolerance: float = 0.0,
    keep_curve: bool = False,
) -> MsaResult:
    """Maximum Sequence Accuracy over a detection-score threshold grid.

    Recognition is cached per distinct segment, so the sweep never calls
    the recognizer twice for the same span.
    """
    cache: dict[tuple[str, int, int], str] = {}

    def recognize(clip: Clip, seg: Segment) -> str:
        key = (clip.clip_id, seg.start, seg.end)
        if key not in cache:
            cache[key] = recognizer(clip, seg)
        return cache[key]

    profiles = [
        clip_sweep_profile(c, detections.get(c.clip_id, ()), recognize, overlap_tolerance)
        for c in clips
    ]
    return sweep_profiles(profiles, grid, aggregate, keep_curve)
