"""Training objectives computed as pure functions.

Everything here returns plain floats (or small result records) from explicit
inputs: segment-level CTC recognition loss, the REINFORCE-style expected
letter-accuracy loss with its gradient coefficients, pose pseudo-label
heatmaps and the masked heatmap regression loss, the weighted loss
combination for both training stages, and the smoothed attention crop tube.
No gradients flow through this module; callers that need derivatives use the
returned coefficients.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    ConfigError,
    PeakUndefinedError,
    RangeError,
    ShapeError,
    ValidationError,
)
from .metrics import temporal_iou
from .model import Clip, FramePosteriors, LabeledSegment, Segment
from .sequences import ctc_forward_nll, letter_accuracy


def recognition_loss(clip: Clip, segment_posteriors: Sequence[FramePosteriors]) -> float:
    """Sum of CTC negative log-likelihoods over a clip's ground-truth segments.

    ``segment_posteriors[i]`` must cover exactly the frame span of the i-th
    ground-truth segment and its letters are used as the CTC target.
    """
    if len(segment_posteriors) != len(clip.ground_truth):
        raise ShapeError(
            f"expected {len(clip.ground_truth)} posterior blocks, "
            f"got {len(segment_posteriors)}"
        )
    total = 0.0
    for labeled, post in zip(clip.ground_truth, segment_posteriors):
        if post.num_frames != labeled.segment.length:
            raise ShapeError(
                f"posterior block has {post.num_frames} frames but segment "
                f"({labeled.segment.start},{labeled.segment.end}) spans "
                f"{labeled.segment.length}"
            )
        total += ctc_forward_nll(post, labeled.letters)
    return total


@dataclass(frozen=True)
class LerLossResult:
    """Value and REINFORCE coefficients of the expected letter-accuracy loss.

    ``indices`` are positions (into the proposal list passed in) of the
    selected top-scoring proposals, in descending-score processing order.
    ``probabilities[k]`` is the normalised score of proposal ``indices[k]``
    and ``coefficients[k]`` the multiplier of the score-gradient term for
    that proposal: ``-accuracy * probability``.
    """

    value: float
    indices: tuple[int, ...]
    probabilities: np.ndarray
    accuracies: np.ndarray
    coefficients: np.ndarray


def _fallback_accuracy(
    proposal: Segment,
    ground_truth: Sequence[LabeledSegment],
    recognized: str,
) -> float:
    """Accuracy of a proposal against its best-overlapping ground truth.

    Proposals overlapping no ground truth score 0: they contribute nothing
    to the loss, matching the convention that an unmatched proposal has no
    reference transcript.
    """
    best = -1.0
    chosen: LabeledSegment | None = None
    for gt in ground_truth:
        iou = temporal_iou(proposal, gt.segment)
        if iou > best:
            best = iou
            chosen = gt
    if chosen is None or best <= 0.0:
        return 0.0
    return letter_accuracy(chosen.letters, recognized)


def ler_loss(
    proposals: Sequence[Segment],
    scores: Sequence[float],
    recognized: Sequence[str],
    ground_truth: Sequence[LabeledSegment],
    top_m: int = 8,
) -> LerLossResult:
    """Expected negative letter accuracy over the top-scoring proposals.

    The ``top_m`` highest-scoring proposals are kept and their scores
    normalised into a distribution p_i = f_i / sum(f).  The loss is
    -sum_i p_i * Acc_i where Acc_i compares the recognised letters of
    proposal i against the ground-truth segment it overlaps most (accuracy
    0 when it overlaps none).  Scores here are raw detector confidences:
    any non-negative reals, not necessarily in [0, 1].

    Returns the loss together with the per-proposal coefficients
    -Acc_i * p_i used by the score-function gradient estimate.
    """
    if top_m < 1:
        raise ConfigError(f"top_m must be >= 1, got {top_m}")
    if not (len(proposals) == len(scores) == len(recognized)):
        raise ShapeError(
            f"proposals, scores and recognized must align: "
            f"{len(proposals)}/{len(scores)}/{len(recognized)}"
        )
    if len(proposals) == 0:
        raise ValidationError("ler_loss requires at least one proposal")
    for value in scores:
        if not math.isfinite(value) or value < 0.0:
            raise ValidationError(f"proposal scores must be finite and >= 0, got {value!r}")

    order = sorted(
        range(len(proposals)),
        key=lambda i: (-scores[i], proposals[i].start, i),
    )[:top_m]
    raw = np.asarray([scores[i] for i in order], dtype=np.float64)
    total_score = float(raw.sum())
    if total_score == 0.0:
        raise ValidationError("all selected proposal scores are zero")

    acc = np.asarray(
        [_fallback_accuracy(proposals[i], ground_truth, recognized[i]) for i in order],
        dtype=np.float64,
    )
    probabilities = raw / total_score
    # Dividing the weighted sum once keeps e.g. the all-accuracy-one case
    # at exactly -1.0 instead of accumulating per-term rounding.
    value = -float((raw * acc).sum()) / total_score
    coefficients = -acc * probabilities
    return LerLossResult(
        value=value,
        indices=tuple(order),
        probabilities=probabilities,
        accuracies=acc,
        coefficients=coefficients,
    )


@dataclass(frozen=True)
class Keypoint:
    """A 2-D keypoint: ``x`` is the column, ``y`` the row, plus a confidence."""

    x: float
    y: float
    confidence: float


def keypoints_to_heatmaps(
    keypoints: Sequence[Sequence[Keypoint]],
    map_height: int,
    map_width: int,
    sigma: float = 2.0,
    confidence_threshold: float = 0.5,
) -> tuple[np.ndarray, np.ndarray]:
    """Render per-frame keypoints into Gaussian pseudo heatmaps plus a mask.

    Returns ``(maps, mask)`` with ``maps`` of shape (frames, points, H, W)
    and boolean ``mask`` of shape (frames, points).  A keypoint is kept only
    when its confidence is strictly above ``confidence_threshold``; dropped
    keypoints produce an all-zero map and a False mask entry so downstream
    losses skip them.  Kept keypoints render as an isotropic Gaussian with
    standard deviation ``sigma`` and peak value exactly 1 at the (possibly
    fractional) keypoint position.
    """
    if map_height < 1 or map_width < 1:
        raise ConfigError(f"map dims must be positive, got {map_height}x{map_width}")
    if sigma <= 0.0:
        raise ConfigError(f"sigma must be positive, got {sigma}")
    num_frames = len(keypoints)
    num_points = len(keypoints[0]) if num_frames else 0
    for t, frame in enumerate(keypoints):
        if len(frame) != num_points:
            raise ShapeError(
                f"frame {t} has {len(frame)} keypoints, expected {num_points}"
            )

    maps = np.zeros((num_frames, num_points, map_height, map_width), dtype=np.float64)
    mask = np.zeros((num_frames, num_points), dtype=bool)
    rows = np.arange(map_height, dtype=np.float64)[:, None]
    cols = np.arange(map_width, dtype=np.float64)[None, :]
    denom = 2.0 * sigma * sigma
    for t, frame in enumerate(keypoints):
        for p, kp in enumerate(frame):
            if not kp.confidence > confidence_threshold:
                continue
            if not (0.0 <= kp.x <= map_width - 1 and 0.0 <= kp.y <= map_height - 1):
                raise RangeError(
                    f"keypoint ({kp.x}, {kp.y}) outside map {map_height}x{map_width}"
                )
            mask[t, p] = True
            maps[t, p] = np.exp(-((rows - kp.y) ** 2 + (cols - kp.x) ** 2) / denom)
    return maps, mask


def pose_loss(predicted: np.ndarray, pseudo: np.ndarray, mask: np.ndarray) -> float:
    """Masked squared-error heatmap regression loss.

    Sums, over every frame/keypoint pair whose mask entry is set, the squared
    per-pixel difference between predicted and pseudo heatmaps.  The sum is
    intentionally unnormalised.
    """
    predicted = np.asarray(predicted, dtype=np.float64)
    pseudo = np.asarray(pseudo, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    if predicted.shape != pseudo.shape:
        raise ShapeError(f"heatmap shapes differ: {predicted.shape} vs {pseudo.shape}")
    if predicted.ndim != 4 or mask.shape != predicted.shape[:2]:
        raise ShapeError(
            f"expected maps (T, P, H, W) with mask (T, P); "
            f"got {predicted.shape} and {mask.shape}"
        )
    diff = (predicted - pseudo) ** 2
    per_map = diff.sum(axis=(2, 3))
    return float(per_map[mask].sum())


@dataclass(frozen=True)
class LossWeights:
    """Relative weights of the recognition, letter-error and pose terms."""

    recognition: float = 1.0
    letter_error: float = 1.0
    pose: float = 1.0

    def __post_init__(self) -> None:
        for name in ("recognition", "letter_error", "pose"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0.0:
                raise ConfigError(f"loss weight {name} must be finite and >= 0, got {value!r}")


def combine_losses(
    detection: float,
    recognition: float,
    letter_error: float,
    pose_global: float,
    pose_local: float | None = None,
    weights: LossWeights = LossWeights(),
    second_stage: bool = False,
) -> float:
    """Weighted total training loss.

    First stage: detection + w_rec*rec + w_ler*ler + w_pose*pose_global.
    Second stage replaces the pose term with w_pose*(pose_global + pose_local)
    and therefore requires ``pose_local``.
    """
    if second_stage:
        if pose_local is None:
            raise ConfigError("second_stage requires pose_local")
        pose_term = weights.pose * (pose_global + pose_local)
    else:
        pose_term = weights.pose * pose_global
    return (
        detection
        + weights.recognition * recognition
        + weights.letter_error * letter_error
        + pose_term
    )


@dataclass(frozen=True)
class AttentionMap:
    """A non-negative 2-D attention grid plus the frame size it describes."""

    grid: np.ndarray
    frame_height: int
    frame_width: int

    def __post_init__(self) -> None:
        grid = np.asarray(self.grid, dtype=np.float64)
        if grid.ndim != 2 or grid.size == 0:
            raise ShapeError(f"attention grid must be non-empty 2-D, got shape {grid.shape}")
        if not np.all(np.isfinite(grid)) or np.any(grid < 0.0):
            raise ValidationError("attention grid entries must be finite and >= 0")
        if self.frame_height < 1 or self.frame_width < 1:
            raise ConfigError(
                f"frame dims must be positive, got {self.frame_height}x{self.frame_width}"
            )
        grid.setflags(write=False)
        object.__setattr__(self, "grid", grid)


@dataclass(frozen=True)
class BBox:
    """An axis-aligned box described by its center and side lengths."""

    center_row: float
    center_col: float
    height: float
    width: float


def _peak_center(attention: AttentionMap) -> tuple[float, float]:
    """Frame-coordinate center of the strongest attention cell."""
    grid = attention.grid
    flat = int(np.argmax(grid))
    if grid.ravel()[flat] <= 0.0:
        raise PeakUndefinedError("attention map has no positive peak")
    row, col = divmod(flat, grid.shape[1])
    row_scale = attention.frame_height / grid.shape[0]
    col_scale = attention.frame_width / grid.shape[1]
    return (row + 0.5) * row_scale, (col + 0.5) * col_scale


def attention_crop_tube(
    maps: Sequence[AttentionMap],
    size_fraction: float,
    window: int = 5,
) -> list[BBox]:
    """Crop boxes following the attention peak, smoothed along time.

    Each frame's raw box is centered on the argmax of its attention grid
    (scaled to frame coordinates) with sides ``size_fraction`` times the
    frame dimensions.  Centers are then averaged over a window of ``window``
    frames on each side, truncated at the sequence ends, and finally clipped
    so every box lies inside its frame.
    """
    if not 0.0 < size_fraction <= 1.0:
        raise ConfigError(f"size_fraction must be in (0, 1], got {size_fraction}")
    if window < 0:
        raise ConfigError(f"window must be >= 0, got {window}")
    if not maps:
        return []

    centers = np.asarray([_peak_center(m) for m in maps], dtype=np.float64)
    boxes: list[BBox] = []
    for n, attention in enumerate(maps):
        lo = max(0, n - window)
        hi = min(len(maps), n + window + 1)
        row, col = centers[lo:hi].mean(axis=0)
        height = size_fraction * attention.frame_height
        width = size_fraction * attention.frame_width
        row = min(max(row, height / 2.0), attention.frame_height - height / 2.0)
        col = min(max(col, width / 2.0), attention.frame_width - width / 2.0)
        boxes.append(BBox(center_row=row, center_col=col, height=height, width=width))
    return boxes
