"""Plain-dict record conversions.

Records mirror the file formats one-to-one: a clip record is
``{"clip_id", "num_frames", "segments": [{"start", "end", "letters"}]}``
and a detection record is
``{"clip_id", "segments": [{"start", "end", "score"[, "letters"]}]}``.
Validation is delegated to the core constructors, so both the rules and
the exception types are exactly those of the core file parsers.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence

from fsdeval import (
    Clip,
    LabeledSegment,
    ScoredSegment,
    Segment,
    ValidationError,
    validate_clip,
)


def clip_from_record(record: Mapping) -> Clip:
    segments = tuple(
        LabeledSegment(
            segment=Segment(start=int(entry["start"]), end=int(entry["end"])),
            letters=str(entry["letters"]),
        )
        for entry in record["segments"]
    )
    clip = Clip(
        clip_id=str(record["clip_id"]),
        num_frames=int(record["num_frames"]),
        ground_truth=segments,
    )
    return validate_clip(clip)


def clip_to_record(clip: Clip) -> dict:
    return {
        "clip_id": clip.clip_id,
        "num_frames": clip.num_frames,
        "segments": [
            {"start": gt.segment.start, "end": gt.segment.end, "letters": gt.letters}
            for gt in clip.ground_truth
        ],
    }


def detections_from_records(
    records: Sequence[Mapping],
) -> tuple[dict[str, list[ScoredSegment]], dict[str, list[str | None]]]:
    """Scored segments plus optional per-segment transcripts by clip id."""
    segments: dict[str, list[ScoredSegment]] = {}
    transcripts: dict[str, list[str | None]] = {}
    for record in records:
        clip_id = str(record["clip_id"])
        if clip_id in segments:
            raise ValidationError(f"duplicate clip_id {clip_id!r}")
        scored: list[ScoredSegment] = []
        letters: list[str | None] = []
        for entry in record["segments"]:
            scored.append(
                ScoredSegment(
                    segment=Segment(start=int(entry["start"]), end=int(entry["end"])),
                    score=float(entry["score"]),
                )
            )
            letters.append(None if "letters" not in entry else str(entry["letters"]))
        segments[clip_id] = scored
        transcripts[clip_id] = letters
    return segments, transcripts


def segments_to_records(segments: Sequence[ScoredSegment]) -> list[dict]:
    return [
        {"start": s.segment.start, "end": s.segment.end, "score": s.score}
        for s in segments
    ]
