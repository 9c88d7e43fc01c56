"""File-format readers returning plain records.

Parsing goes through the core parsers, so diagnostics (file, 1-based
line) and validation are identical to the CLI's; only the return shape
differs — dicts and lists instead of core dataclasses.
"""

from __future__ import annotations

from pathlib import Path

import fsdeval

from .records import clip_to_record


def read_ground_truth(path: str | Path) -> list[dict]:
    return [clip_to_record(clip) for clip in fsdeval.parse_ground_truth(path)]


def read_detections(path: str | Path) -> list[dict]:
    loaded = fsdeval.parse_detections(path)
    records = []
    for clip_id, scored in loaded.segments.items():
        entries = []
        for seg, letters in zip(scored, loaded.transcripts[clip_id]):
            entry = {"start": seg.segment.start, "end": seg.segment.end, "score": seg.score}
            if letters is not None:
                entry["letters"] = letters
            entries.append(entry)
        records.append({"clip_id": clip_id, "segments": entries})
    return records


def read_posteriors(path: str | Path) -> list[dict]:
    return [
        {
            "clip_id": block.clip_id,
            "symbols": list(block.symbols),
            "rows": block.rows.tolist(),
        }
        for block in fsdeval.parse_posteriors(path)
    ]
