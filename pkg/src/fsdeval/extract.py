"""Detection-side algorithms: posterior thresholding, temporal NMS, and
anchor-based proposal coding.

Two proposal sources are covered: superlevel-set runs of a per-frame
fingerspelling posterior (scored by mean posterior, pooled over a ladder of
thresholds), and fixed-length anchors refined by center/length offsets.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, ShapeError, ValidationError
from .metrics import temporal_iou
from .model import ScoredSegment, Segment

# Threshold ladder for pooling posterior runs, descending (0.9 .. 0.1).
DEFAULT_POOL_THRESHOLDS = tuple(round(0.9 - 0.1 * i, 1) for i in range(9))

# Anchor geometry: temporal stride and the length ladder spanning [8, 320].
DEFAULT_ANCHOR_STRIDE = 8
DEFAULT_ANCHOR_LENGTHS = (8, 12, 16, 24, 32, 48, 64, 96, 128, 192, 256, 320)
MIN_ANCHOR_LENGTH = 8
MAX_ANCHOR_LENGTH = 320

DEFAULT_NMS_THRESHOLD = 0.7
DEFAULT_POSITIVE_IOU = 0.7
DEFAULT_NEGATIVE_IOU = 0.3


def runs_from_posteriors(probs: np.ndarray, threshold: float) -> list[ScoredSegment]:
    """Maximal runs of frames with probability >= threshold, scored by the
    mean posterior over the run."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 1:
        raise ShapeError(f"expected a 1-D probability array, got shape {probs.shape}")
    if probs.size and (probs.min() < 0.0 or probs.max() > 1.0):
        raise ValidationError("frame probabilities must lie in [0, 1]")
    above = probs >= threshold
    if not above.any():
        return []
    padded = np.concatenate([[False], above, [False]])
    edges = np.nonzero(np.diff(padded.astype(np.int8)))[0]
    starts, ends = edges[0::2], edges[1::2] - 1
    return [
        ScoredSegment(Segment(int(s), int(e)), float(probs[s : e + 1].mean()))
        for s, e in zip(starts, ends)
    ]


def build_segment_pool(
    probs: np.ndarray,
    thresholds: Sequence[float] = DEFAULT_POOL_THRESHOLDS,
) -> list[ScoredSegment]:
    """Union of runs over a descending threshold ladder, deduplicated by span.

    A span found at several thresholds has the same mean-posterior score
    each time, so only the first occurrence is kept.
    """
    thresholds = tuple(thresholds)
    if not thresholds:
        raise ConfigError("threshold ladder must be non-empty")
    if any(not 0.0 < t < 1.0 for t in thresholds):
        raise ConfigError(f"pool thresholds must lie in (0, 1): {thresholds}")
    if any(b <= a for a, b in zip(thresholds[1:], thresholds)):
        raise ConfigError(f"pool thresholds must be strictly descending: {thresholds}")
    pool: list[ScoredSegment] = []
    seen: set[tuple[int, int]] = set()
    for t in thresholds:
        for run in runs_from_posteriors(probs, t):
            span = (run.segment.start, run.segment.end)
            if span not in seen:
                seen.add(span)
                pool.append(run)
    return pool


def nms(
    preds: Sequence[ScoredSegment],
    iou_threshold: float = DEFAULT_NMS_THRESHOLD,
) -> list[ScoredSegment]:
    """Greedy non-maximum suppression on 1-D segments.

    Keeps detections in descending score order, discarding any whose IoU
    with an already-kept detection strictly exceeds the threshold.  Output
    retains that order (score, then start frame, then input order).
    """
    if not 0.0 <= iou_threshold <= 1.0:
        raise ConfigError(f"iou_threshold must lie in [0, 1], got {iou_threshold}")
    order = sorted(
        range(len(preds)),
        key=lambda i: (-preds[i].score, preds[i].segment.start, i),
    )
    kept: list[ScoredSegment] = []
    for i in order:
        seg = preds[i].segment
        if all(temporal_iou(seg, k.segment) <= iou_threshold for k in kept):
            kept.append(preds[i])
    return kept


def cull(
    pool: Sequence[ScoredSegment],
    score_threshold: float,
    nms_threshold: float = DEFAULT_NMS_THRESHOLD,
) -> list[ScoredSegment]:
    """Final proposal filtering: drop below-score detections, then NMS."""
    return nms([p for p in pool if p.score >= score_threshold], nms_threshold)


# ---------------------------------------------------------------------------
# Anchors
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Anchor:
    """A candidate interval of fixed ``length`` centered at ``center``.

    Centers sit at stride*j + stride/2, so anchors may extend beyond the
    clip; they are clipped only when offsets are decoded back to frames.
    """

    center: float
    length: int

    @property
    def start(self) -> float:
        return self.center - self.length / 2

    @property
    def end(self) -> float:
        return self.center + self.length / 2


def generate_anchors(
    num_frames: int,
    lengths: Sequence[int] = DEFAULT_ANCHOR_LENGTHS,
    stride: int = DEFAULT_ANCHOR_STRIDE,
) -> list[Anchor]:
    """All anchors for a clip: every length at every stride position."""
    if num_frames < 1:
        raise ConfigError(f"num_frames must be >= 1, got {num_frames}")
    if stride < 1:
        raise ConfigError(f"stride must be >= 1, got {stride}")
    lengths = tuple(lengths)
    if not lengths:
        raise ConfigError("anchor length ladder must be non-empty")
    if any(l < MIN_ANCHOR_LENGTH or l > MAX_ANCHOR_LENGTH for l in lengths):
        raise ConfigError(
            f"anchor lengths must lie in [{MIN_ANCHOR_LENGTH}, {MAX_ANCHOR_LENGTH}]: "
            f"{lengths}"
        )
    if list(lengths) != sorted(lengths):
        raise ConfigError(f"anchor lengths must be sorted ascending: {lengths}")
    positions = math.ceil(num_frames / stride)
    return [
        Anchor(stride * j + stride / 2, l)
        for j in range(positions)
        for l in lengths
    ]


def anchor_iou(anchor: Anchor, segment: Segment) -> float:
    """IoU between an anchor's continuous extent and a frame segment.

    The segment (s, t) occupies the continuous interval [s, t+1), so an
    anchor congruent with it scores exactly 1.
    """
    a0, a1 = anchor.start, anchor.end
    s0, s1 = float(segment.start), float(segment.end + 1)
    inter = min(a1, s1) - max(a0, s0)
    if inter <= 0.0:
        return 0.0
    union = max(a1, s1) - min(a0, s0)
    return inter / union


POSITIVE, NEGATIVE, IGNORE = "positive", "negative", "ignore"


@dataclass(frozen=True)
class AnchorLabel:
    """Training label for one anchor: positive with a matched ground truth,
    negative, or ignored (IoU between the two cutoffs)."""

    kind: str
    gt_index: int | None = None


def label_anchors(
    anchors: Sequence[Anchor],
    ground_truth: Sequence[Segment],
    positive_iou: float = DEFAULT_POSITIVE_IOU,
    negative_iou: float = DEFAULT_NEGATIVE_IOU,
) -> list[AnchorLabel]:
    """Positive iff best IoU >= positive_iou (matched to the argmax ground
    truth), negative iff best IoU <= negative_iou, otherwise ignored."""
    if not 0.0 <= negative_iou <= positive_iou <= 1.0:
        raise ConfigError(
            f"need 0 <= negative_iou <= positive_iou <= 1, got "
            f"({negative_iou}, {positive_iou})"
        )
    labels = []
    for anchor in anchors:
        best_iou = 0.0
        best_j = None
        for j, gt in enumerate(ground_truth):
            iou = anchor_iou(anchor, gt)
            if iou > best_iou:
                best_iou = iou
                best_j = j
        if best_j is not None and best_iou >= positive_iou:
            labels.append(AnchorLabel(POSITIVE, best_j))
        elif best_iou <= negative_iou:
            labels.append(AnchorLabel(NEGATIVE))
        else:
            labels.append(AnchorLabel(IGNORE))
    return labels


# ---------------------------------------------------------------------------
# Offset coding
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OffsetPair:
    """Center shift (in anchor lengths) and log length ratio."""

    dc: float
    dl: float


def encode_offsets(target: Segment, anchor: Anchor) -> OffsetPair:
    """Regression targets mapping ``anchor`` onto ``target``."""
    center = (target.start + target.end + 1) / 2
    length = target.end - target.start + 1
    return OffsetPair(
        (center - anchor.center) / anchor.length,
        math.log(length / anchor.length),
    )


def decode_center_length(offsets: OffsetPair, anchor: Anchor) -> tuple[float, float]:
    """Continuous (center, length) an offset pair maps the anchor to."""
    length = anchor.length * math.exp(offsets.dl)
    center = anchor.center + offsets.dc * anchor.length
    return center, length


def decode_offsets(
    offsets: OffsetPair, anchor: Anchor, num_frames: int | None = None
) -> Segment:
    """Apply offsets to an anchor and round to a frame segment.

    ``encode`` then ``decode`` reproduces the original segment exactly up
    to the half-frame rounding.  When ``num_frames`` is given the segment
    is clipped into [0, num_frames - 1].
    """
    center, length = decode_center_length(offsets, anchor)
    start = math.floor(center - length / 2 + 0.5)
    end = math.floor(center + length / 2 + 0.5) - 1
    if end < start:
        end = start
    if num_frames is not None:
        last = num_frames - 1
        start = min(max(start, 0), last)
        end = min(max(end, 0), last)
    elif start < 0:
        raise ValidationError(
            f"decoded segment ({start}, {end}) starts before frame 0; "
            "pass num_frames to clip"
        )
    return Segment(start, end)


# ---------------------------------------------------------------------------
# Detection loss
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DetectionLoss:
    classification: float
    regression: float

    @property
    def total(self) -> float:
        return self.classification + self.regression


def smooth_l1(x: float) -> float:
    """Huber-style penalty: quadratic below 1, linear above."""
    ax = abs(x)
    return 0.5 * x * x if ax < 1.0 else ax - 0.5


def detection_loss(
    pred_scores: Sequence[float],
    pred_offsets: Sequence[OffsetPair],
    labels: Sequence[AnchorLabel],
    anchors: Sequence[Anchor],
    ground_truth: Sequence[Segment],
) -> DetectionLoss:
    """Binary cross-entropy over positive and negative anchors plus mean
    smooth-L1 regression over positives (ignored anchors contribute to
    neither term).

    ``pred_scores`` are fingerspelling probabilities aligned with
    ``anchors``; regression targets are the encoded offsets of each
    positive anchor's matched ground truth.
    """
    n = len(anchors)
    if not (len(pred_scores) == len(pred_offsets) == len(labels) == n):
        raise ShapeError(
            f"misaligned inputs: {len(pred_scores)} scores, {len(pred_offsets)} "
            f"offsets, {len(labels)} labels, {n} anchors"
        )
    bce_terms = []
    reg_terms = []
    with np.errstate(divide="ignore"):
        for score, offsets, label, anchor in zip(pred_scores, pred_offsets, labels, anchors):
            if not 0.0 <= score <= 1.0:
                raise ValidationError(f"anchor score {score!r} outside [0, 1]")
            if label.kind == POSITIVE:
                bce_terms.append(float(-np.log(score)))
                target = encode_offsets(ground_truth[label.gt_index], anchor)
                reg_terms.append(smooth_l1(offsets.dc - target.dc) + smooth_l1(offsets.dl - target.dl))
            elif label.kind == NEGATIVE:
                bce_terms.append(float(-np.log(1.0 - score)))
    classification = sum(bce_terms) / len(bce_terms) if bce_terms else 0.0
    regression = sum(reg_terms) / len(reg_terms) if reg_terms else 0.0
    return DetectionLoss(classification, regression)
