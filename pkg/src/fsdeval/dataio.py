"""File formats, corpus loading, and clip chunking.

Three line-delimited text formats cover the toolkit's inputs: ground-truth
corpora and detections as JSON records (one per line), frame posteriors as a
plain-text block per clip, and keypoints as JSON records of per-frame
``[x, y, confidence]`` triples.  Exact field names live in
``docs/FORMATS.md``.  Parsing is strict: every record either loads into a
validated domain object or fails with a diagnostic carrying the file path
and line number.

Record-local problems (bad JSON, missing fields, a score outside [0, 1])
raise :class:`ParseError` pointing at the offending line; cross-record and
clip-level semantic problems (duplicate clip ids, overlapping ground truth)
raise the matching :class:`ValidationError` subclass.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigError, ParseError, ValidationError
from .losses import Keypoint
from .model import (
    DEFAULT_ALPHABET,
    Clip,
    FramePosteriors,
    LabeledSegment,
    ScoredSegment,
    Segment,
    validate_clip,
)

# ---------------------------------------------------------------------------
# ground truth


def _record_lines(path: Path) -> Iterable[tuple[int, str]]:
    """Yield (1-based line number, stripped text) for non-blank lines."""
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            text = raw.strip()
            if text:
                yield lineno, text


def _record_field(record: dict, key: str, path: Path, lineno: int):
    try:
        return record[key]
    except KeyError:
        raise ParseError(f"missing field {key!r}", path=str(path), line=lineno) from None


def _as_json(text: str, path: Path, lineno: int) -> dict:
    try:
        record = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}", path=str(path), line=lineno) from None
    if not isinstance(record, dict):
        raise ParseError("record must be a JSON object", path=str(path), line=lineno)
    return record


def parse_ground_truth(path: str | Path, alphabet: str = DEFAULT_ALPHABET) -> list[Clip]:
    """Load a ground-truth corpus file into validated clips."""
    path = Path(path)
    clips: list[Clip] = []
    seen: set[str] = set()
    for lineno, text in _record_lines(path):
        record = _as_json(text, path, lineno)
        clip_id = _record_field(record, "clip_id", path, lineno)
        num_frames = _record_field(record, "num_frames", path, lineno)
        raw_segments = _record_field(record, "segments", path, lineno)
        try:
            segments = tuple(
                LabeledSegment(
                    segment=Segment(start=int(entry["start"]), end=int(entry["end"])),
                    letters=str(entry["letters"]),
                )
                for entry in raw_segments
            )
            clip = Clip(clip_id=str(clip_id), num_frames=int(num_frames), ground_truth=segments)
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed record: {exc}", path=str(path), line=lineno) from None
        except ValidationError as exc:
            raise ParseError(str(exc), path=str(path), line=lineno) from None
        if clip.clip_id in seen:
            raise ValidationError(f"duplicate clip_id {clip.clip_id!r} at line {lineno}")
        seen.add(clip.clip_id)
        clips.append(validate_clip(clip, alphabet=alphabet))
    return clips


def write_ground_truth(path: str | Path, clips: Sequence[Clip]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for clip in clips:
            record = {
                "clip_id": clip.clip_id,
                "num_frames": clip.num_frames,
                "segments": [
                    {"start": gt.segment.start, "end": gt.segment.end, "letters": gt.letters}
                    for gt in clip.ground_truth
                ],
            }
            handle.write(json.dumps(record, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# detections


@dataclass(frozen=True)
class Detections:
    """Per-clip scored segments plus optional recorded transcripts.

    ``transcripts[clip_id][i]`` is the letters field of the i-th segment or
    None when absent; files written by real recognizers carry it, files of
    raw detector output usually do not.
    """

    segments: dict[str, list[ScoredSegment]]
    transcripts: dict[str, list[str | None]]

    def with_letters(self) -> dict[str, list[tuple[ScoredSegment, str]]]:
        """Segments paired with transcripts; error when any are missing."""
        out: dict[str, list[tuple[ScoredSegment, str]]] = {}
        for clip_id, scored in self.segments.items():
            letters = self.transcripts[clip_id]
            paired = []
            for seg, text in zip(scored, letters):
                if text is None:
                    raise ValidationError(
                        f"segment ({seg.segment.start}, {seg.segment.end}) of clip "
                        f"{clip_id!r} has no letters field"
                    )
                paired.append((seg, text))
            out[clip_id] = paired
        return out


def parse_detections(path: str | Path) -> Detections:
    """Load a detections file; scores outside [0, 1] are rejected."""
    path = Path(path)
    segments: dict[str, list[ScoredSegment]] = {}
    transcripts: dict[str, list[str | None]] = {}
    for lineno, text in _record_lines(path):
        record = _as_json(text, path, lineno)
        clip_id = str(_record_field(record, "clip_id", path, lineno))
        raw_segments = _record_field(record, "segments", path, lineno)
        if clip_id in segments:
            raise ValidationError(f"duplicate clip_id {clip_id!r} at line {lineno}")
        scored: list[ScoredSegment] = []
        letters: list[str | None] = []
        try:
            for entry in raw_segments:
                scored.append(
                    ScoredSegment(
                        segment=Segment(start=int(entry["start"]), end=int(entry["end"])),
                        score=float(entry["score"]),
                    )
                )
                letters.append(None if "letters" not in entry else str(entry["letters"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed record: {exc}", path=str(path), line=lineno) from None
        except ValidationError as exc:
            raise ParseError(str(exc), path=str(path), line=lineno) from None
        segments[clip_id] = scored
        transcripts[clip_id] = letters
    return Detections(segments=segments, transcripts=transcripts)


def write_detections(
    path: str | Path,
    detections: Mapping[str, Sequence[ScoredSegment]],
    transcripts: Mapping[str, Sequence[str | None]] | None = None,
) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for clip_id, scored in detections.items():
            letters: Sequence[str | None]
            letters = transcripts[clip_id] if transcripts is not None else [None] * len(scored)
            entries = []
            for seg, text in zip(scored, letters):
                entry: dict = {
                    "start": seg.segment.start,
                    "end": seg.segment.end,
                    "score": seg.score,
                }
                if text is not None:
                    entry["letters"] = text
                entries.append(entry)
            record = {"clip_id": clip_id, "segments": entries}
            handle.write(json.dumps(record, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# frame posteriors

# Format: a header line "> clip_id", a whitespace-separated symbol line,
# then one probability row per frame until the next header.


def parse_posteriors(path: str | Path) -> list[FramePosteriors]:
    path = Path(path)
    blocks: list[FramePosteriors] = []
    seen: set[str] = set()

    clip_id: str | None = None
    header_line = 0
    symbols: tuple[str, ...] = ()
    rows: list[list[float]] = []

    def flush() -> None:
        if clip_id is None:
            return
        if clip_id in seen:
            raise ValidationError(f"duplicate clip_id {clip_id!r} at line {header_line}")
        seen.add(clip_id)
        try:
            blocks.append(
                FramePosteriors(
                    clip_id=clip_id,
                    symbols=symbols,
                    rows=np.asarray(rows, dtype=np.float64).reshape(len(rows), len(symbols)),
                )
            )
        except ValidationError as exc:
            raise ParseError(str(exc), path=str(path), line=header_line) from None

    for lineno, text in _record_lines(path):
        if text.startswith(">"):
            flush()
            clip_id = text[1:].strip()
            header_line = lineno
            symbols = ()
            rows = []
            if not clip_id:
                raise ParseError("empty clip_id after '>'", path=str(path), line=lineno)
        elif clip_id is None:
            raise ParseError("expected '> clip_id' header", path=str(path), line=lineno)
        elif not symbols:
            symbols = tuple(text.split())
        else:
            fields = text.split()
            if len(fields) != len(symbols):
                raise ParseError(
                    f"expected {len(symbols)} probabilities, got {len(fields)}",
                    path=str(path),
                    line=lineno,
                )
            try:
                rows.append([float(field) for field in fields])
            except ValueError as exc:
                raise ParseError(str(exc), path=str(path), line=lineno) from None
    flush()
    return blocks


def write_posteriors(path: str | Path, blocks: Sequence[FramePosteriors]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for block in blocks:
            handle.write(f"> {block.clip_id}\n")
            handle.write(" ".join(block.symbols) + "\n")
            for row in block.rows:
                handle.write(" ".join(repr(float(v)) for v in row) + "\n")


# ---------------------------------------------------------------------------
# keypoints


def parse_keypoints(path: str | Path) -> dict[str, list[list[Keypoint]]]:
    """Load per-frame keypoint records: ``[x, y, confidence]`` triples.

    ``x`` is the column coordinate and ``y`` the row, matching the usual
    pose-estimator convention.
    """
    path = Path(path)
    out: dict[str, list[list[Keypoint]]] = {}
    for lineno, text in _record_lines(path):
        record = _as_json(text, path, lineno)
        clip_id = str(_record_field(record, "clip_id", path, lineno))
        frames = _record_field(record, "frames", path, lineno)
        if clip_id in out:
            raise ValidationError(f"duplicate clip_id {clip_id!r} at line {lineno}")
        try:
            out[clip_id] = [
                [Keypoint(x=float(x), y=float(y), confidence=float(c)) for x, y, c in frame]
                for frame in frames
            ]
        except (TypeError, ValueError) as exc:
            raise ParseError(f"malformed record: {exc}", path=str(path), line=lineno) from None
    return out


# ---------------------------------------------------------------------------
# chunking


@dataclass(frozen=True)
class ChunkResult:
    """Chunked clips plus the segments no chunk fully contains."""

    chunks: tuple[Clip, ...]
    spilled: tuple[LabeledSegment, ...]


def chunk_clip(clip: Clip, chunk_len: int = 300, overlap: int = 75) -> ChunkResult:
    """Split a clip into fixed-length overlapping chunks.

    Chunks start at multiples of ``chunk_len - overlap``; the final chunk is
    truncated at the clip end.  Every ground-truth segment is copied (with
    re-based frame indices) into each chunk that fully contains it, so a
    segment inside the overlap region appears twice.  Segments contained by
    no chunk — those straddling a chunk boundary — are returned in the spill
    list rather than silently dropped.
    """
    if overlap < 0 or overlap >= chunk_len:
        raise ConfigError(f"need 0 <= overlap < chunk_len, got {overlap} / {chunk_len}")

    starts = [0]
    while starts[-1] + chunk_len < clip.num_frames:
        starts.append(starts[-1] + chunk_len - overlap)

    chunks: list[Clip] = []
    contained: set[int] = set()
    for index, start in enumerate(starts):
        end = min(start + chunk_len, clip.num_frames) - 1
        inside = []
        for j, gt in enumerate(clip.ground_truth):
            if gt.segment.start >= start and gt.segment.end <= end:
                contained.add(j)
                inside.append(
                    LabeledSegment(
                        segment=Segment(
                            start=gt.segment.start - start,
                            end=gt.segment.end - start,
                        ),
                        letters=gt.letters,
                    )
                )
        chunks.append(
            Clip(
                clip_id=f"{clip.clip_id}#{index}",
                num_frames=end - start + 1,
                ground_truth=tuple(inside),
            )
        )
    spilled = tuple(
        gt for j, gt in enumerate(clip.ground_truth) if j not in contained
    )
    return ChunkResult(chunks=tuple(chunks), spilled=spilled)


# ---------------------------------------------------------------------------
# reports


def _json_safe(value):
    """Recursively replace non-JSON floats with strings ("inf", "nan")."""
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, float):
        if value != value:
            return "nan"
        if value == float("inf"):
            return "inf"
        if value == float("-inf"):
            return "-inf"
    return value


def report_to_json(report: dict) -> str:
    """Serialize a report deterministically (sorted keys, repr floats)."""
    return json.dumps(_json_safe(report), sort_keys=True, indent=2) + "\n"


def write_report(
    report: dict,
    out_dir: str | Path,
    curves: Mapping[str, tuple[tuple[str, str], Sequence[tuple[float, float]]]] | None = None,
) -> Path:
    """Write ``report.json`` plus one two-column TSV per named curve.

    ``curves`` maps a file stem to ((x label, y label), points).  Returns
    the path of the JSON report.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = out_dir / "report.json"
    with open(report_path, "w", encoding="utf-8") as handle:
        handle.write(report_to_json(report))
    for name, (labels, points) in (curves or {}).items():
        with open(out_dir / f"{name}.tsv", "w", encoding="utf-8") as handle:
            handle.write(f"{labels[0]}\t{labels[1]}\n")
            for x, y in points:
                handle.write(f"{float(x)!r}\t{float(y)!r}\n")
    return report_path
