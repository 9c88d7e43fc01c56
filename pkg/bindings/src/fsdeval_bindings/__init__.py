"""Plain-record bindings over the fsdeval evaluation toolkit.

For training loops that want to score a checkpoint in-process: pass
corpora and detections as plain dicts (the same shapes as the JSONL file
formats), get back plain values.  Numbers are identical to the ``fsdeval``
CLI on the same inputs, and errors carry the same diagnostics.
"""

from __future__ import annotations

from .api import (
    CorpusHandle,
    ap_at_acc,
    ap_at_iou,
    ctc_forward_nll,
    edit_distance,
    evaluate,
    extract_segments,
    frame_level_ap,
    load_corpus,
    msa,
)
from .readers import read_detections, read_ground_truth, read_posteriors
from .records import (
    clip_from_record,
    clip_to_record,
    detections_from_records,
    segments_to_records,
)

__version__ = "0.1.0"

__all__ = [
    "CorpusHandle",
    "ap_at_acc",
    "ap_at_iou",
    "clip_from_record",
    "clip_to_record",
    "ctc_forward_nll",
    "detections_from_records",
    "edit_distance",
    "evaluate",
    "extract_segments",
    "frame_level_ap",
    "load_corpus",
    "msa",
    "read_detections",
    "read_ground_truth",
    "read_posteriors",
    "segments_to_records",
]
