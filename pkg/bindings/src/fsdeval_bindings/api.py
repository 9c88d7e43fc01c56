"""Evaluation entry points over plain records.

Thin forwarding onto the core package: records in, plain values or dicts
out, and none of the training-objective internals.  Every function is
stateless and blocking, so concurrent calls from multiple threads are
safe; results are numerically identical to the ``fsdeval`` CLI on the
same inputs.
"""

from __future__ import annotations

from collections.abc import Callable, Mapping, Sequence

import numpy as np

import fsdeval
from fsdeval import (
    Clip,
    ConfigError,
    Detections,
    EvalOptions,
    ExternalRecognizer,
    FramePosteriors,
    NoisyRecognizer,
    OracleRecognizer,
    ValidationError,
    build_segment_pool,
    cull,
)

from .records import clip_from_record, detections_from_records, segments_to_records

ClipRecords = Sequence[Mapping]
DetectionRecords = Sequence[Mapping]


class CorpusHandle:
    """A loaded, validated corpus: build once, score many detection sets."""

    def __init__(self, clips: Sequence[Clip]):
        seen: set[str] = set()
        for clip in clips:
            if clip.clip_id in seen:
                raise ValidationError(f"duplicate clip_id {clip.clip_id!r}")
            seen.add(clip.clip_id)
        self._clips = tuple(clips)

    @property
    def clips(self) -> tuple[Clip, ...]:
        return self._clips

    @property
    def num_clips(self) -> int:
        return len(self._clips)

    @property
    def num_ground_truth_segments(self) -> int:
        return sum(len(c.ground_truth) for c in self._clips)

    def clip_ids(self) -> list[str]:
        return [c.clip_id for c in self._clips]


def load_corpus(records: ClipRecords) -> CorpusHandle:
    return CorpusHandle([clip_from_record(r) for r in records])


def _clips(corpus: ClipRecords | CorpusHandle) -> tuple[Clip, ...]:
    if isinstance(corpus, CorpusHandle):
        return corpus.clips
    return load_corpus(corpus).clips


def _recognizer(
    spec: str | Callable | None,
    segments: dict,
    transcripts: dict,
):
    """Same specs the CLI accepts, or any ``(clip, segment) -> str`` callable."""
    if spec is None or spec == "none":
        return None
    if callable(spec):
        return spec
    if spec == "oracle":
        return OracleRecognizer()
    if spec == "external":
        loaded = Detections(segments=segments, transcripts=transcripts)
        return ExternalRecognizer.from_detections(loaded.with_letters())
    if isinstance(spec, str) and spec.startswith("noisy:"):
        parts = spec.split(":")
        if len(parts) not in (2, 3):
            raise ConfigError(f"noisy recognizer spec must be noisy:RATE[:SEED], got {spec!r}")
        try:
            rate = float(parts[1])
            seed = int(parts[2]) if len(parts) == 3 else 0
        except ValueError:
            raise ConfigError(f"bad noisy recognizer spec {spec!r}") from None
        return NoisyRecognizer(error_rate=rate, seed=seed)
    raise ConfigError(f"unknown recognizer {spec!r}")


def _options(options: Mapping | EvalOptions | None) -> EvalOptions:
    if options is None:
        return EvalOptions()
    if isinstance(options, EvalOptions):
        return options
    return EvalOptions(**dict(options))


def evaluate(
    corpus: ClipRecords | CorpusHandle,
    detections: DetectionRecords,
    options: Mapping | EvalOptions | None = None,
    recognizer: str | Callable | None = None,
) -> dict:
    """Full metric report as a plain dict; same numbers as the CLI ``eval``.

    ``options`` takes the CLI's evaluation settings as a mapping (for
    example ``{"iou_thresholds": (0.5,), "workers": 2}``).  ``recognizer``
    accepts the CLI specs (``"oracle"``, ``"noisy:RATE[:SEED]"``,
    ``"external"``) or a callable; without one the accuracy-based metrics
    are null, exactly as in the CLI.
    """
    clips = _clips(corpus)
    segments, transcripts = detections_from_records(detections)
    return fsdeval.run_evaluation(
        clips,
        segments,
        _recognizer(recognizer, segments, transcripts),
        _options(options),
    ).report


def msa(
    corpus: ClipRecords | CorpusHandle,
    detections: DetectionRecords,
    recognizer: str | Callable = "external",
    grid: Sequence[float] | None = None,
    aggregate: str = "pooled",
    overlap_tolerance: float = 0.0,
) -> dict:
    """Maximum sequence accuracy: ``{"value", "threshold", "aggregate"}``."""
    clips = _clips(corpus)
    segments, transcripts = detections_from_records(detections)
    result = fsdeval.msa(
        clips,
        segments,
        _recognizer(recognizer, segments, transcripts),
        grid=grid,
        aggregate=aggregate,
        overlap_tolerance=overlap_tolerance,
    )
    return {"value": result.value, "threshold": result.threshold, "aggregate": result.aggregate}


def ap_at_iou(
    corpus: ClipRecords | CorpusHandle,
    detections: DetectionRecords,
    iou_threshold: float,
) -> float:
    segments, _ = detections_from_records(detections)
    return fsdeval.ap_at_iou(_clips(corpus), segments, iou_threshold)


def ap_at_acc(
    corpus: ClipRecords | CorpusHandle,
    detections: DetectionRecords,
    acc_threshold: float,
    iou_floor: float = 0.0,
    recognizer: str | Callable = "external",
) -> float:
    clips = _clips(corpus)
    segments, transcripts = detections_from_records(detections)
    recognize = _recognizer(recognizer, segments, transcripts)
    by_id = {c.clip_id: c for c in clips}
    recognized = {
        clip_id: [recognize(by_id[clip_id], s.segment) for s in scored]
        for clip_id, scored in segments.items()
        if clip_id in by_id
    }
    return fsdeval.ap_at_acc(clips, segments, recognized, acc_threshold, iou_floor)


def frame_level_ap(
    corpus: ClipRecords | CorpusHandle,
    detections: DetectionRecords | None = None,
    posteriors: Sequence[Mapping] | None = None,
) -> float:
    """Frame-level AP from either detections or posterior records."""
    clips = _clips(corpus)
    if detections is not None:
        segments, _ = detections_from_records(detections)
        return fsdeval.frame_level_ap(clips, detections=segments)
    if posteriors is None:
        raise ConfigError("need detections or posteriors")
    blocks = {
        str(r["clip_id"]): FramePosteriors(
            clip_id=str(r["clip_id"]),
            symbols=tuple(r["symbols"]),
            rows=np.asarray(r["rows"], dtype=np.float64),
        )
        for r in posteriors
    }
    return fsdeval.frame_level_ap(clips, frame_probabilities=blocks)


def extract_segments(
    probabilities: Sequence[float],
    pool_thresholds: Sequence[float] | None = None,
    score_threshold: float = 0.0,
    nms_threshold: float | None = None,
) -> list[dict]:
    """Per-frame probabilities to scored segment records for one clip."""
    probs = np.asarray(probabilities, dtype=np.float64)
    pool = (
        build_segment_pool(probs)
        if pool_thresholds is None
        else build_segment_pool(probs, pool_thresholds)
    )
    kept = cull(pool, score_threshold) if nms_threshold is None else cull(
        pool, score_threshold, nms_threshold
    )
    return segments_to_records(kept)


def edit_distance(a: str, b: str) -> int:
    return fsdeval.edit_distance(a, b)


def ctc_forward_nll(
    rows: Sequence[Sequence[float]],
    symbols: Sequence[str],
    target: str,
) -> float:
    """Negative log-likelihood of ``target`` under per-frame posteriors.

    ``rows`` is one probability row per frame over ``symbols``, which must
    include the blank symbol ``_``.
    """
    posteriors = FramePosteriors(
        clip_id="<ctc>",
        symbols=tuple(symbols),
        rows=np.asarray(rows, dtype=np.float64),
    )
    return fsdeval.ctc_forward_nll(posteriors, target)
