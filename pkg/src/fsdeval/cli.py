"""Command-line interface.

Subcommands: ``eval`` (full metric report), ``extract-segments``
(posteriors to detections), ``nms``, ``chunk``, ``pr-curve`` (curve point
files), and ``losses`` (training-objective values from files).  Exit codes:
0 success, 2 configuration problems (bad flags or option values), 3 data
problems (unparseable or invalid input files).

Every run is deterministic: randomness only enters through the seed in a
``noisy`` recognizer spec, and reports are serialized with sorted keys, so
identical configuration and inputs give byte-identical outputs regardless
of worker count.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .dataio import (
    Detections,
    chunk_clip,
    parse_detections,
    parse_ground_truth,
    parse_posteriors,
    report_to_json,
    write_detections,
    write_ground_truth,
    write_report,
)
from .errors import ConfigError, FsdevalError
from .evaluation import EvalOptions, run_evaluation
from .extract import (
    DEFAULT_NMS_THRESHOLD,
    DEFAULT_POOL_THRESHOLDS,
    build_segment_pool,
    cull,
)
from .losses import ler_loss
from .model import Clip
from .recognizers import ExternalRecognizer, NoisyRecognizer, OracleRecognizer
from .sequences import partial_alignment_loss


def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise ConfigError(f"expected comma-separated numbers, got {text!r}") from None


def _resolve_workers(value: int | None) -> int:
    if value is not None:
        return value
    env = os.environ.get("FSDEVAL_WORKERS")
    if env is None:
        return 1
    try:
        return int(env)
    except ValueError:
        raise ConfigError(f"FSDEVAL_WORKERS must be an integer, got {env!r}") from None


def _build_recognizer(spec: str, detections: Detections | None):
    """Recognizer from a CLI spec: oracle | noisy:RATE[:SEED] | external | none."""
    if spec == "none":
        return None
    if spec == "oracle":
        return OracleRecognizer()
    if spec == "external":
        if detections is None:
            raise ConfigError("external recognizer requires a detections file")
        return ExternalRecognizer.from_detections(detections.with_letters())
    if spec.startswith("noisy:"):
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


def _eval_options(args: argparse.Namespace, keep_curves: bool) -> EvalOptions:
    return EvalOptions(
        iou_thresholds=_floats(args.iou_thresholds),
        acc_thresholds=_floats(args.acc_thresholds),
        acc_iou_floor=args.acc_iou_floor,
        num_recall_levels=args.recall_levels,
        include_zero_level=args.include_zero_level,
        msa_aggregate=args.msa_aggregate,
        msa_overlap_tolerance=args.msa_overlap_tolerance,
        frame_ap=not args.no_frame_ap,
        duration_breakdown=not args.no_duration_breakdown,
        keep_curves=keep_curves,
        workers=_resolve_workers(args.workers),
    )


def _add_eval_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--ground-truth", required=True, help="ground-truth corpus file")
    sub.add_argument("--detections", required=True, help="detections file")
    sub.add_argument(
        "--posteriors",
        help="frame posteriors file; when given, frame-level AP uses these "
        "instead of detection-derived probabilities",
    )
    sub.add_argument(
        "--recognizer",
        default="none",
        help="oracle | noisy:RATE[:SEED] | external | none (default none; "
        "accuracy metrics and MSA need a recognizer)",
    )
    sub.add_argument("--iou-thresholds", default="0.1,0.3,0.5")
    sub.add_argument("--acc-thresholds", default="0.0,0.2,0.4")
    sub.add_argument("--acc-iou-floor", type=float, default=0.0)
    sub.add_argument("--recall-levels", type=int, default=100)
    sub.add_argument(
        "--include-zero-level",
        action="store_true",
        help="average precision over recall levels 0..N instead of 1..N",
    )
    sub.add_argument("--msa-aggregate", choices=("pooled", "macro"), default="pooled")
    sub.add_argument("--msa-overlap-tolerance", type=float, default=0.0)
    sub.add_argument("--no-frame-ap", action="store_true")
    sub.add_argument("--no-duration-breakdown", action="store_true")
    sub.add_argument(
        "--workers",
        type=int,
        default=None,
        help="per-clip worker processes (default: FSDEVAL_WORKERS or 1)",
    )
    sub.add_argument("--out", required=True, help="output directory")


def _run_eval(args: argparse.Namespace, keep_curves: bool) -> int:
    options = _eval_options(args, keep_curves)
    clips = parse_ground_truth(args.ground_truth)
    detections = parse_detections(args.detections)
    recognizer = _build_recognizer(args.recognizer, detections)
    frame_probs = None
    if args.posteriors:
        frame_probs = {p.clip_id: p for p in parse_posteriors(args.posteriors)}
    extra = {
        "command": "pr-curve" if keep_curves else "eval",
        "inputs": {
            "ground_truth": str(args.ground_truth),
            "detections": str(args.detections),
            "posteriors": str(args.posteriors) if args.posteriors else None,
        },
        "recognizer": args.recognizer,
    }
    result = run_evaluation(
        clips,
        detections.segments,
        recognizer,
        options,
        frame_probabilities=frame_probs,
        extra_config=extra,
    )
    report_path = write_report(result.report, args.out, result.curves)
    metrics = result.report["metrics"]
    for name in ("ap_at_iou", "ap_at_acc"):
        block = metrics[name]
        if block is None:
            continue
        for threshold, value in block.items():
            shown = "n/a" if value is None else f"{value:.4f}"
            print(f"{name}[{threshold}] = {shown}")
    if metrics["msa"] is not None:
        print(f"msa = {metrics['msa']['value']:.4f} at threshold {metrics['msa']['threshold']}")
    if metrics["frame_ap"] is not None:
        print(f"frame_ap = {metrics['frame_ap']:.4f}")
    print(f"report written to {report_path}")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    return _run_eval(args, keep_curves=False)


def _cmd_pr_curve(args: argparse.Namespace) -> int:
    return _run_eval(args, keep_curves=True)


def _cmd_extract(args: argparse.Namespace) -> int:
    blocks = parse_posteriors(args.posteriors)
    thresholds = _floats(args.pool_thresholds) if args.pool_thresholds else DEFAULT_POOL_THRESHOLDS
    detections = {}
    for block in blocks:
        probs = block.fingerspelling_probability()
        pool = build_segment_pool(probs, thresholds)
        detections[block.clip_id] = cull(pool, args.score_threshold, args.nms_iou)
    write_detections(args.out, detections)
    total = sum(len(v) for v in detections.values())
    print(f"wrote {total} segments for {len(detections)} clips to {args.out}")
    return 0


def _cmd_nms(args: argparse.Namespace) -> int:
    from .extract import nms

    loaded = parse_detections(args.detections)
    kept_segments = {}
    kept_transcripts = {}
    for clip_id, scored in loaded.segments.items():
        kept = nms(scored, args.threshold)
        # transcripts follow their segments through suppression
        index_of = {id(s): i for i, s in enumerate(scored)}
        kept_segments[clip_id] = kept
        kept_transcripts[clip_id] = [
            loaded.transcripts[clip_id][index_of[id(s)]] for s in kept
        ]
    write_detections(args.out, kept_segments, kept_transcripts)
    total_in = sum(len(v) for v in loaded.segments.values())
    total_out = sum(len(v) for v in kept_segments.values())
    print(f"kept {total_out} of {total_in} segments")
    return 0


def _cmd_chunk(args: argparse.Namespace) -> int:
    clips = parse_ground_truth(args.ground_truth)
    chunks: list[Clip] = []
    spill_records = []
    for clip in clips:
        result = chunk_clip(clip, args.chunk_len, args.overlap)
        chunks.extend(result.chunks)
        for gt in result.spilled:
            spill_records.append(
                {
                    "clip_id": clip.clip_id,
                    "start": gt.segment.start,
                    "end": gt.segment.end,
                    "letters": gt.letters,
                }
            )
    write_ground_truth(args.out, chunks)
    if args.spill_out:
        import json

        with open(args.spill_out, "w", encoding="utf-8") as handle:
            for record in spill_records:
                handle.write(json.dumps(record, sort_keys=True) + "\n")
    print(
        f"wrote {len(chunks)} chunks from {len(clips)} clips to {args.out}; "
        f"{len(spill_records)} segments spilled"
    )
    return 0


def _cmd_losses(args: argparse.Namespace) -> int:
    clips = parse_ground_truth(args.ground_truth)
    report: dict = {"counts": {"clips": len(clips)}}

    if args.posteriors:
        blocks = {p.clip_id: p for p in parse_posteriors(args.posteriors)}
        total = 0.0
        per_clip = {}
        for clip in clips:
            block = blocks.get(clip.clip_id)
            if block is None:
                raise ConfigError(f"no posteriors for clip {clip.clip_id!r}")
            value = partial_alignment_loss(clip, block)
            per_clip[clip.clip_id] = value
            total += value
        report["partial_alignment_loss"] = {"total": total, "per_clip": per_clip}

    if args.detections:
        loaded = parse_detections(args.detections)
        recognizer = _build_recognizer(args.recognizer, loaded)
        if recognizer is None:
            raise ConfigError("ler loss needs a recognizer (use --recognizer)")
        total = 0.0
        per_clip = {}
        for clip in clips:
            scored = loaded.segments.get(clip.clip_id, [])
            if not scored or not clip.ground_truth:
                continue
            proposals = [s.segment for s in scored]
            recognized = [recognizer(clip, seg) for seg in proposals]
            result = ler_loss(
                proposals,
                [s.score for s in scored],
                recognized,
                clip.ground_truth,
                top_m=args.top_m,
            )
            per_clip[clip.clip_id] = result.value
            total += result.value
        report["ler_loss"] = {"total": total, "per_clip": per_clip}

    text = report_to_json(report)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"losses written to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fsdeval",
        description="Evaluation toolkit for temporal fingerspelling detection.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_eval = sub.add_parser("eval", help="full metric report for a detections file")
    _add_eval_flags(p_eval)
    p_eval.set_defaults(func=_cmd_eval)

    p_curve = sub.add_parser("pr-curve", help="eval plus curve point files (PR and MSA sweep)")
    _add_eval_flags(p_curve)
    p_curve.set_defaults(func=_cmd_pr_curve)

    p_extract = sub.add_parser(
        "extract-segments", help="convert frame posteriors into scored segments"
    )
    p_extract.add_argument("--posteriors", required=True)
    p_extract.add_argument(
        "--pool-thresholds",
        default=None,
        help="comma-separated descending probability thresholds "
        "(default 0.9,0.8,...,0.1)",
    )
    p_extract.add_argument("--score-threshold", type=float, default=0.0)
    p_extract.add_argument("--nms-iou", type=float, default=DEFAULT_NMS_THRESHOLD)
    p_extract.add_argument("--out", required=True)
    p_extract.set_defaults(func=_cmd_extract)

    p_nms = sub.add_parser("nms", help="non-maximum suppression over a detections file")
    p_nms.add_argument("--detections", required=True)
    p_nms.add_argument("--threshold", type=float, default=DEFAULT_NMS_THRESHOLD)
    p_nms.add_argument("--out", required=True)
    p_nms.set_defaults(func=_cmd_nms)

    p_chunk = sub.add_parser("chunk", help="split clips into fixed-length overlapping chunks")
    p_chunk.add_argument("--ground-truth", required=True)
    p_chunk.add_argument("--chunk-len", type=int, default=300)
    p_chunk.add_argument("--overlap", type=int, default=75)
    p_chunk.add_argument("--out", required=True)
    p_chunk.add_argument("--spill-out", help="file for segments no chunk fully contains")
    p_chunk.set_defaults(func=_cmd_chunk)

    p_losses = sub.add_parser(
        "losses", help="training-objective values from ground truth plus optional files"
    )
    p_losses.add_argument("--ground-truth", required=True)
    p_losses.add_argument("--posteriors", help="letter posteriors for alignment losses")
    p_losses.add_argument("--detections", help="proposals for the expected-accuracy loss")
    p_losses.add_argument("--recognizer", default="none")
    p_losses.add_argument("--top-m", type=int, default=8)
    p_losses.add_argument("--out")
    p_losses.set_defaults(func=_cmd_losses)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"fsdeval: configuration error: {exc}", file=sys.stderr)
        return 2
    except FsdevalError as exc:
        print(f"fsdeval: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"fsdeval: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
