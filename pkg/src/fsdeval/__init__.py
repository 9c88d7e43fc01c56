"""Evaluation toolkit for temporal fingerspelling detection.

Segment-level metrics (AP over IoU or letter-accuracy matching, maximum
sequence accuracy), sequence scoring (edit distance, CTC forward), frame
posterior to segment extraction with NMS and anchors, training-objective
formulas as pure functions, mock recognizers, and file I/O with a CLI.
"""

from __future__ import annotations

from .dataio import (
    ChunkResult,
    Detections,
    chunk_clip,
    parse_detections,
    parse_ground_truth,
    parse_keypoints,
    parse_posteriors,
    report_to_json,
    write_detections,
    write_ground_truth,
    write_posteriors,
    write_report,
)
from .errors import (
    ConfigError,
    EmptyLabelError,
    EmptyTruthError,
    FsdevalError,
    OverlapError,
    ParseError,
    PeakUndefinedError,
    RangeError,
    ShapeError,
    ValidationError,
    ZeroGtError,
)
from .evaluation import EvalOptions, EvalResult, run_evaluation
from .extract import (
    Anchor,
    AnchorLabel,
    DetectionLoss,
    OffsetPair,
    anchor_iou,
    build_segment_pool,
    cull,
    decode_offsets,
    detection_loss,
    encode_offsets,
    generate_anchors,
    label_anchors,
    nms,
    runs_from_posteriors,
)
from .losses import (
    AttentionMap,
    BBox,
    Keypoint,
    LerLossResult,
    LossWeights,
    attention_crop_tube,
    combine_losses,
    keypoints_to_heatmaps,
    ler_loss,
    pose_loss,
    recognition_loss,
)
from .metrics import (
    ApConfig,
    MatchResult,
    PRCurve,
    ap_at_acc,
    ap_at_iou,
    average_precision,
    frame_level_ap,
    match_by_accuracy,
    match_by_iou,
    pr_curve,
    temporal_iou,
)
from .model import (
    BLANK,
    DEFAULT_ALPHABET,
    NO_LETTER,
    Clip,
    FramePosteriors,
    LabeledSegment,
    ScoredSegment,
    Segment,
    segment_length,
    validate_clip,
)
from .msa import MsaResult, build_label_sequence, msa, select_detections
from .recognizers import (
    ExternalRecognizer,
    NoisyRecognizer,
    OracleRecognizer,
    Recognizer,
    noisy_recognize,
    oracle_recognize,
)
from .sequences import (
    CtcTarget,
    collapse_labels,
    ctc_forward_nll,
    edit_distance,
    edit_distances_batch,
    letter_accuracy,
    partial_alignment_loss,
)

__version__ = "0.1.0"

__all__ = [
    "Anchor",
    "AnchorLabel",
    "ApConfig",
    "AttentionMap",
    "BBox",
    "BLANK",
    "ChunkResult",
    "Clip",
    "ConfigError",
    "CtcTarget",
    "DEFAULT_ALPHABET",
    "DetectionLoss",
    "Detections",
    "EmptyLabelError",
    "EmptyTruthError",
    "EvalOptions",
    "EvalResult",
    "ExternalRecognizer",
    "FramePosteriors",
    "FsdevalError",
    "Keypoint",
    "LabeledSegment",
    "LerLossResult",
    "LossWeights",
    "MatchResult",
    "MsaResult",
    "NO_LETTER",
    "NoisyRecognizer",
    "OffsetPair",
    "OracleRecognizer",
    "OverlapError",
    "PRCurve",
    "ParseError",
    "PeakUndefinedError",
    "RangeError",
    "Recognizer",
    "ScoredSegment",
    "Segment",
    "ShapeError",
    "ValidationError",
    "ZeroGtError",
    "anchor_iou",
    "ap_at_acc",
    "ap_at_iou",
    "attention_crop_tube",
    "average_precision",
    "build_label_sequence",
    "build_segment_pool",
    "chunk_clip",
    "collapse_labels",
    "combine_losses",
    "ctc_forward_nll",
    "cull",
    "decode_offsets",
    "detection_loss",
    "edit_distance",
    "edit_distances_batch",
    "encode_offsets",
    "frame_level_ap",
    "generate_anchors",
    "keypoints_to_heatmaps",
    "label_anchors",
    "ler_loss",
    "letter_accuracy",
    "match_by_accuracy",
    "match_by_iou",
    "msa",
    "nms",
    "noisy_recognize",
    "oracle_recognize",
    "parse_detections",
    "parse_ground_truth",
    "parse_keypoints",
    "parse_posteriors",
    "partial_alignment_loss",
    "pose_loss",
    "pr_curve",
    "recognition_loss",
    "report_to_json",
    "run_evaluation",
    "runs_from_posteriors",
    "segment_length",
    "select_detections",
    "temporal_iou",
    "validate_clip",
    "write_detections",
    "write_ground_truth",
    "write_posteriors",
    "write_report",
]
