"""Segment-matching metrics: temporal IoU, greedy matching, PR curves, AP.

Matching is greedy in descending score order; each ground-truth segment can
be claimed at most once.  All tie-breaks are deterministic: equal match
quality prefers the ground truth with the lower start frame (then lower
index), and equal scores are ordered by earlier segment start, then input
order.  Corpus-level AP matches per clip and pools all predictions into a
single score-sorted precision-recall curve.
"""

from __future__ import annotations

from bisect import bisect_left
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError, ShapeError, ValidationError, ZeroGtError
from .model import Clip, FramePosteriors, ScoredSegment, Segment
from .sequences import letter_accuracy


def temporal_iou(a: Segment, b: Segment) -> float:
    """Intersection-over-union of two inclusive frame intervals."""
    inter = min(a.end, b.end) - max(a.start, b.start) + 1
    if inter <= 0:
        return 0.0
    union = max(a.end, b.end) - min(a.start, b.start) + 1
    return inter / union


def score_order(preds: Sequence[ScoredSegment]) -> list[int]:
    """Indices of ``preds`` by descending score, then start frame, then input order."""
    return sorted(
        range(len(preds)),
        key=lambda i: (-preds[i].score, preds[i].segment.start, i),
    )


@dataclass
class MatchResult:
    """Outcome of greedy matching for one clip.

    ``assignments`` maps prediction index -> ground-truth index, and
    ``qualities`` holds the quantity that was maximized (IoU or letter
    accuracy) for each matched prediction.
    """

    num_predictions: int
    num_ground_truth: int
    assignments: dict[int, int] = field(default_factory=dict)
    qualities: dict[int, float] = field(default_factory=dict)

    def __post_init__(self):
        used = list(self.assignments.values())
        if len(set(used)) != len(used):
            raise ValidationError("matching assigned one ground truth twice")

    def is_matched(self, pred_index: int) -> bool:
        return pred_index in self.assignments


def match_by_iou(
    preds: Sequence[ScoredSegment],
    ground_truth: Sequence[Segment],
    iou_threshold: float,
) -> MatchResult:
    """Greedy score-ordered matching requiring IoU strictly above threshold.

    Each prediction claims the unclaimed ground truth with the highest IoU
    among those with IoU > iou_threshold; already-claimed segments are
    skipped even if a later prediction overlaps them more.
    """
    if not 0.0 <= iou_threshold < 1.0:
        raise ConfigError(f"iou_threshold must lie in [0, 1), got {iou_threshold}")
    result = MatchResult(len(preds), len(ground_truth))
    taken = [False] * len(ground_truth)
    for i in score_order(preds):
        seg = preds[i].segment
        best_j = -1
        best_key: tuple[float, int, int] | None = None
        for j, gt in enumerate(ground_truth):
            if taken[j]:
                continue
            iou = temporal_iou(seg, gt)
            if iou > iou_threshold:
                key = (iou, -gt.start, -j)
                if best_key is None or key > best_key:
                    best_key = key
                    best_j = j
        if best_j >= 0:
            taken[best_j] = True
            result.assignments[i] = best_j
            result.qualities[i] = best_key[0]
    return result


def match_by_accuracy(
    preds: Sequence[ScoredSegment],
    recognized: Sequence[str],
    ground_truth: Sequence,
    acc_threshold: float,
    iou_threshold: float = 0.0,
) -> MatchResult:
    """Greedy matching by recognizer letter accuracy.

    A ground truth is a candidate when IoU > iou_threshold and the accuracy
    of ``recognized[i]`` against its label is strictly above acc_threshold;
    the candidate with the highest accuracy wins.  ``ground_truth`` entries
    are LabeledSegments; ``recognized`` is aligned with ``preds`` and is
    computed once per prediction, not per candidate pair.
    """
    if len(recognized) != len(preds):
        raise ShapeError(f"{len(preds)} predictions but {len(recognized)} recognized strings")
    if not 0.0 <= iou_threshold < 1.0:
        raise ConfigError(f"iou_threshold must lie in [0, 1), got {iou_threshold}")
    if acc_threshold > 1.0:
        raise ConfigError(f"acc_threshold must be <= 1, got {acc_threshold}")
    result = MatchResult(len(preds), len(ground_truth))
    taken = [False] * len(ground_truth)
    for i in score_order(preds):
        seg = preds[i].segment
        best_j = -1
        best_key: tuple[float, int, int] | None = None
        for j, labeled in enumerate(ground_truth):
            if taken[j]:
                continue
            if temporal_iou(seg, labeled.segment) <= iou_threshold:
                continue
            acc = letter_accuracy(labeled.letters, recognized[i])
            if acc > acc_threshold:
                key = (acc, -labeled.segment.start, -j)
                if best_key is None or key > best_key:
                    best_key = key
                    best_j = j
        if best_j >= 0:
            taken[best_j] = True
            result.assignments[i] = best_j
            result.qualities[i] = best_key[0]
    return result


# ---------------------------------------------------------------------------
# Precision-recall and average precision
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PRCurve:
    """(recall, precision) points from truncating predictions to top-m, m=1..M."""

    points: tuple[tuple[float, float], ...]
    num_ground_truth: int


def pr_curve(match_flags: Sequence[bool], num_ground_truth: int) -> PRCurve:
    """Precision-recall points over top-m truncations of score-ordered flags."""
    if num_ground_truth < 1:
        raise ZeroGtError("precision-recall undefined with zero ground-truth segments")
    points = []
    tp = 0
    for m, flag in enumerate(match_flags, 1):
        if flag:
            tp += 1
        points.append((tp / num_ground_truth, tp / m))
    return PRCurve(tuple(points), num_ground_truth)


def average_precision(
    curve: PRCurve,
    num_recall_levels: int = 100,
    include_zero_level: bool = False,
) -> float:
    """Interpolated AP: mean over recall levels of the best precision at or
    beyond each level, with the max over an empty set taken as 0.

    The default averages over levels 1/N .. N/N.  ``include_zero_level``
    adds recall level 0 and divides by N+1 instead, matching the other
    reading of the same formula.
    """
    if num_recall_levels < 1:
        raise ConfigError(f"num_recall_levels must be >= 1, got {num_recall_levels}")
    recalls = sorted(r for r, _ in curve.points)
    by_recall = sorted(curve.points)
    # suffix_best[k] = max precision among points with recall >= recalls[k]
    suffix_best = [0.0] * (len(by_recall) + 1)
    for k in range(len(by_recall) - 1, -1, -1):
        suffix_best[k] = max(by_recall[k][1], suffix_best[k + 1])
    start = 0 if include_zero_level else 1
    total = 0.0
    for i in range(start, num_recall_levels + 1):
        level = i / num_recall_levels
        idx = bisect_left(recalls, level)
        total += suffix_best[idx]
    return total / (num_recall_levels + 1 - start)


@dataclass(frozen=True)
class ApConfig:
    num_recall_levels: int = 100
    include_zero_level: bool = False


def _check_detections_keys(
    clips: Sequence[Clip], detections: Mapping[str, Sequence]
) -> None:
    known = {c.clip_id for c in clips}
    if len(known) != len(clips):
        raise ValidationError("duplicate clip_id in corpus")
    unknown = set(detections) - known
    if unknown:
        raise ValidationError(f"detections reference unknown clips: {sorted(unknown)[:5]}")


def _pooled_flags(entries: list[tuple[float, int, int, int, bool]]) -> list[bool]:
    """Sort (score, start, clip index, pred index, matched) into the global
    score order and return the matched flags."""
    entries.sort(key=lambda e: (-e[0], e[1], e[2], e[3]))
    return [e[4] for e in entries]


def ap_at_iou(
    clips: Sequence[Clip],
    detections: Mapping[str, Sequence[ScoredSegment]],
    iou_threshold: float,
    config: ApConfig = ApConfig(),
) -> float:
    """Corpus AP with IoU-based matching (per-clip matching, pooled curve)."""
    _check_detections_keys(clips, detections)
    entries: list[tuple[float, int, int, int, bool]] = []
    num_gt = 0
    for ci, clip in enumerate(clips):
        preds = detections.get(clip.clip_id, ())
        num_gt += len(clip.ground_truth)
        matched = match_by_iou(
            preds, [g.segment for g in clip.ground_truth], iou_threshold
        )
        for i, p in enumerate(preds):
            entries.append((p.score, p.segment.start, ci, i, matched.is_matched(i)))
    curve = pr_curve(_pooled_flags(entries), num_gt)
    return average_precision(curve, config.num_recall_levels, config.include_zero_level)


def ap_at_acc(
    clips: Sequence[Clip],
    detections: Mapping[str, Sequence[ScoredSegment]],
    recognized: Mapping[str, Sequence[str]],
    acc_threshold: float,
    iou_threshold: float = 0.0,
    config: ApConfig = ApConfig(),
) -> float:
    """Corpus AP with accuracy-based matching (IoU floor defaults to 0)."""
    _check_detections_keys(clips, detections)
    entries: list[tuple[float, int, int, int, bool]] = []
    num_gt = 0
    for ci, clip in enumerate(clips):
        preds = detections.get(clip.clip_id, ())
        num_gt += len(clip.ground_truth)
        matched = match_by_accuracy(
            preds,
            recognized.get(clip.clip_id, ()),
            clip.ground_truth,
            acc_threshold,
            iou_threshold,
        )
        for i, p in enumerate(preds):
            entries.append((p.score, p.segment.start, ci, i, matched.is_matched(i)))
    curve = pr_curve(_pooled_flags(entries), num_gt)
    return average_precision(curve, config.num_recall_levels, config.include_zero_level)


# ---------------------------------------------------------------------------
# Frame-level AP
# ---------------------------------------------------------------------------

def frame_probabilities_from_detections(
    clip: Clip, preds: Sequence[ScoredSegment]
) -> np.ndarray:
    """Per-frame probability: max score over proposals containing the frame."""
    probs = np.zeros(clip.num_frames)
    for p in preds:
        seg = p.segment
        if seg.end >= clip.num_frames:
            raise ValidationError(
                f"clip {clip.clip_id!r}: detection ({seg.start}, {seg.end}) exceeds "
                f"last frame {clip.num_frames - 1}"
            )
        span = probs[seg.start : seg.end + 1]
        np.maximum(span, p.score, out=span)
    return probs


def frame_level_ap(
    clips: Sequence[Clip],
    detections: Mapping[str, Sequence[ScoredSegment]] | None = None,
    frame_probabilities: Mapping[str, np.ndarray | FramePosteriors] | None = None,
    config: ApConfig = ApConfig(),
) -> float:
    """AP of per-frame fingerspelling classification over the whole corpus.

    Frames tied at the same probability enter the precision-recall curve
    together (one point per distinct probability), so a constant posterior
    yields the positive-frame fraction.
    """
    if (detections is None) == (frame_probabilities is None):
        raise ConfigError("provide exactly one of detections or frame_probabilities")
    prob_parts = []
    label_parts = []
    for clip in clips:
        if detections is not None:
            probs = frame_probabilities_from_detections(clip, detections.get(clip.clip_id, ()))
        else:
            got = frame_probabilities.get(clip.clip_id)
            if got is None:
                probs = np.zeros(clip.num_frames)
            else:
                probs = got.fingerspelling_probability() if isinstance(got, FramePosteriors) else np.asarray(got, dtype=np.float64)
            if probs.shape != (clip.num_frames,):
                raise ShapeError(
                    f"clip {clip.clip_id!r}: expected {clip.num_frames} frame "
                    f"probabilities, got shape {probs.shape}"
                )
            if probs.size and (probs.min() < 0.0 or probs.max() > 1.0):
                raise ValidationError(f"clip {clip.clip_id!r}: frame probabilities outside [0, 1]")
        labels = np.zeros(clip.num_frames, dtype=bool)
        for g in clip.ground_truth:
            labels[g.segment.start : g.segment.end + 1] = True
        prob_parts.append(probs)
        label_parts.append(labels)
    probs = np.concatenate(prob_parts) if prob_parts else np.zeros(0)
    labels = np.concatenate(label_parts) if label_parts else np.zeros(0, dtype=bool)
    total_pos = int(labels.sum())
    if total_pos == 0:
        raise ZeroGtError("frame-level AP undefined with no positive frames")
    order = np.argsort(-probs, kind="stable")
    sorted_probs = probs[order]
    tp = np.cumsum(labels[order])
    boundary = np.nonzero(np.diff(sorted_probs))[0]
    ends = np.concatenate([boundary, [probs.size - 1]])
    points = tuple(
        (tp[e] / total_pos, tp[e] / (e + 1)) for e in ends
    )
    curve = PRCurve(points, total_pos)
    return average_precision(curve, config.num_recall_levels, config.include_zero_level)
