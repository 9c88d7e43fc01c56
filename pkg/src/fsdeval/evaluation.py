"""Corpus evaluation driver producing a deterministic report.

One pass over the corpus computes everything the ``eval`` command reports:
AP over a grid of IoU thresholds, AP over accuracy thresholds, the maximum
sequence accuracy sweep, optional frame-level AP, and a breakdown by
segment duration.  Per-clip work (matching, recognition, sequence
building) can be spread over a worker pool; the merge is a stable sort, so
serial and parallel runs produce byte-identical reports.

The driver deliberately routes through the same primitives as the
stand-alone metric functions — ``match_by_iou``, ``match_by_accuracy``, the
pooled precision-recall assembly, ``sweep_profiles`` — so a report value
always equals the corresponding direct call to the last bit.
"""

from __future__ import annotations

import multiprocessing
from dataclasses import asdict, dataclass, field
from typing import Callable, Mapping, Sequence

from .errors import ConfigError, ZeroGtError
from .metrics import (
    _check_detections_keys,
    _pooled_flags,
    ApConfig,
    average_precision,
    frame_level_ap,
    match_by_accuracy,
    match_by_iou,
    pr_curve,
)
from .model import Clip, FramePosteriors, ScoredSegment, Segment
from .msa import ClipSweepProfile, MsaResult, clip_sweep_strings, sweep_profiles
from .sequences import edit_distances_batch

SCHEMA_VERSION = 1

# Duration bins in frames: [low, high) with an open-ended last bin.
DURATION_BINS: tuple[tuple[str, int, int | None], ...] = (
    ("short", 0, 20),
    ("medium", 20, 80),
    ("long", 80, None),
)


def duration_bin(length: float) -> str:
    for name, low, high in DURATION_BINS:
        if length >= low and (high is None or length < high):
            return name
    raise ValueError(f"unbinnable duration {length!r}")


@dataclass(frozen=True)
class EvalOptions:
    """Settings of an evaluation run; serialized into the report."""

    iou_thresholds: tuple[float, ...] = (0.1, 0.3, 0.5)
    acc_thresholds: tuple[float, ...] = (0.0, 0.2, 0.4)
    acc_iou_floor: float = 0.0
    num_recall_levels: int = 100
    include_zero_level: bool = False
    msa_aggregate: str = "pooled"
    msa_overlap_tolerance: float = 0.0
    frame_ap: bool = True
    duration_breakdown: bool = True
    keep_curves: bool = False
    workers: int = 1

    def __post_init__(self) -> None:
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.msa_aggregate not in ("pooled", "macro"):
            raise ConfigError(f"unknown msa_aggregate {self.msa_aggregate!r}")

    def ap_config(self) -> ApConfig:
        return ApConfig(self.num_recall_levels, self.include_zero_level)


@dataclass
class ClipOutcome:
    """Everything the pooled assembly needs from one clip.

    ``pred_keys`` lists (score, start) per prediction in input order;
    ``iou_flags``/``acc_flags`` give the per-threshold matched flag for each
    prediction, also in input order.  ``sweep`` carries the reference
    string, descending distinct scores, and per-regime hypothesis strings
    for the MSA sweep.
    """

    clip_id: str
    num_gt: int
    gt_lengths: tuple[int, ...]
    pred_keys: tuple[tuple[float, int], ...]
    iou_flags: dict[float, tuple[bool, ...]]
    acc_flags: dict[float, tuple[bool, ...]]
    sweep: tuple[str, tuple[float, ...], tuple[str, ...]] | None


def clip_outcome(
    clip: Clip,
    preds: Sequence[ScoredSegment],
    recognizer: Callable[[Clip, Segment], str] | None,
    options: EvalOptions,
) -> ClipOutcome:
    """Match one clip's predictions at every threshold and build its sweep."""
    gt_segments = [g.segment for g in clip.ground_truth]
    iou_flags = {}
    for threshold in options.iou_thresholds:
        matched = match_by_iou(preds, gt_segments, threshold)
        iou_flags[threshold] = tuple(matched.is_matched(i) for i in range(len(preds)))

    acc_flags = {}
    sweep = None
    if recognizer is not None:
        cache: dict[tuple[int, int], str] = {}

        def recognize(c: Clip, seg: Segment) -> str:
            key = (seg.start, seg.end)
            if key not in cache:
                cache[key] = recognizer(c, seg)
            return cache[key]

        recognized = [recognize(clip, p.segment) for p in preds]
        for threshold in options.acc_thresholds:
            matched = match_by_accuracy(
                preds, recognized, clip.ground_truth, threshold, options.acc_iou_floor
            )
            acc_flags[threshold] = tuple(matched.is_matched(i) for i in range(len(preds)))
        ref, breaks, hyps = clip_sweep_strings(
            clip, preds, recognize, options.msa_overlap_tolerance
        )
        sweep = (ref, breaks, tuple(hyps))

    return ClipOutcome(
        clip_id=clip.clip_id,
        num_gt=len(clip.ground_truth),
        gt_lengths=tuple(g.segment.length for g in clip.ground_truth),
        pred_keys=tuple((p.score, p.segment.start) for p in preds),
        iou_flags=iou_flags,
        acc_flags=acc_flags,
        sweep=sweep,
    )


def _outcome_batch(payload) -> list[ClipOutcome]:
    clips, preds_per_clip, recognizer, options = payload
    return [
        clip_outcome(clip, preds, recognizer, options)
        for clip, preds in zip(clips, preds_per_clip)
    ]


def compute_outcomes(
    clips: Sequence[Clip],
    detections: Mapping[str, Sequence[ScoredSegment]],
    recognizer: Callable[[Clip, Segment], str] | None,
    options: EvalOptions,
) -> list[ClipOutcome]:
    """Per-clip outcomes, optionally on a process pool.

    Parallel execution requires a picklable recognizer (the shipped
    recognizers all are).  Results are merged in clip order, so the worker
    count never changes the output.
    """
    preds_per_clip = [list(detections.get(c.clip_id, ())) for c in clips]
    if options.workers == 1 or len(clips) < 2:
        return _outcome_batch((clips, preds_per_clip, recognizer, options))

    workers = min(options.workers, len(clips))
    bounds = [len(clips) * k // workers for k in range(workers + 1)]
    payloads = [
        (clips[lo:hi], preds_per_clip[lo:hi], recognizer, options)
        for lo, hi in zip(bounds, bounds[1:])
        if hi > lo
    ]
    with multiprocessing.get_context().Pool(len(payloads)) as pool:
        batches = pool.map(_outcome_batch, payloads)
    return [outcome for batch in batches for outcome in batch]


# ---------------------------------------------------------------------------
# pooled assembly


def _pooled_ap(
    outcomes: Sequence[ClipOutcome],
    kind: str,
    threshold: float,
    config: ApConfig,
) -> float | None:
    """Corpus AP from precomputed per-clip flags; None when undefined."""
    entries: list[tuple[float, int, int, int, bool]] = []
    num_gt = 0
    for ci, out in enumerate(outcomes):
        num_gt += out.num_gt
        flags = out.iou_flags[threshold] if kind == "iou" else out.acc_flags[threshold]
        for pi, (score, start) in enumerate(out.pred_keys):
            entries.append((score, start, ci, pi, flags[pi]))
    if num_gt == 0:
        return None
    curve = pr_curve(_pooled_flags(entries), num_gt)
    return average_precision(curve, config.num_recall_levels, config.include_zero_level)


def _profiles_from_outcomes(
    outcomes: Sequence[ClipOutcome],
    distance_of: dict[tuple[str, str], int],
) -> list[ClipSweepProfile]:
    profiles = []
    for out in outcomes:
        ref, breaks, hyps = out.sweep
        distances = tuple(distance_of[(ref, h)] for h in hyps)
        profiles.append(ClipSweepProfile(breaks, distances, len(ref)))
    return profiles


def _sweep_distances(outcomes: Sequence[ClipOutcome]) -> dict[tuple[str, str], int]:
    """Edit distances for every distinct (reference, hypothesis) pair.

    Deduplicated and batched: regimes that select the same segments repeat
    the same hypothesis string, and the vectorised kernel handles the rest.
    """
    pairs: list[tuple[str, str]] = []
    seen: set[tuple[str, str]] = set()
    for out in outcomes:
        ref, _, hyps = out.sweep
        for h in hyps:
            if (ref, h) not in seen:
                seen.add((ref, h))
                pairs.append((ref, h))
    if not pairs:
        return {}
    distances = edit_distances_batch([r for r, _ in pairs], [h for _, h in pairs])
    return {pair: int(d) for pair, d in zip(pairs, distances)}


def _msa_from_outcomes(
    outcomes: Sequence[ClipOutcome],
    distance_of: dict[tuple[str, str], int],
    options: EvalOptions,
    keep_curve: bool,
) -> MsaResult | None:
    if not outcomes or outcomes[0].sweep is None:
        return None
    profiles = _profiles_from_outcomes(outcomes, distance_of)
    return sweep_profiles(
        profiles, grid=None, aggregate=options.msa_aggregate, keep_curve=keep_curve
    )


# ---------------------------------------------------------------------------
# report


@dataclass
class EvalResult:
    """Report dict plus any curve point sets collected for plotting."""

    report: dict
    curves: dict[str, tuple[tuple[str, str], tuple[tuple[float, float], ...]]] = field(
        default_factory=dict
    )


def _metric_block(
    outcomes: Sequence[ClipOutcome],
    options: EvalOptions,
    distance_of: dict[tuple[str, str], int],
    with_recognizer: bool,
) -> dict:
    config = options.ap_config()
    block: dict = {
        "ap_at_iou": {
            str(t): _pooled_ap(outcomes, "iou", t, config) for t in options.iou_thresholds
        }
    }
    if with_recognizer:
        block["ap_at_acc"] = {
            str(t): _pooled_ap(outcomes, "acc", t, config) for t in options.acc_thresholds
        }
        result = _msa_from_outcomes(outcomes, distance_of, options, keep_curve=False)
        block["msa"] = None if result is None else {
            "value": result.value,
            "threshold": result.threshold,
            "aggregate": result.aggregate,
        }
    else:
        block["ap_at_acc"] = None
        block["msa"] = None
    return block


def run_evaluation(
    clips: Sequence[Clip],
    detections: Mapping[str, Sequence[ScoredSegment]],
    recognizer: Callable[[Clip, Segment], str] | None = None,
    options: EvalOptions = EvalOptions(),
    frame_probabilities: Mapping[str, FramePosteriors] | None = None,
    extra_config: Mapping | None = None,
) -> EvalResult:
    """Evaluate detections against a corpus and build the report.

    Accuracy-based metrics appear in the report only when a recognizer is
    supplied.  ``frame_probabilities`` optionally replaces the
    detection-derived per-frame probabilities for frame-level AP.  Metrics
    that are undefined on the input (for instance AP with no ground truth)
    are reported as null rather than raising.
    """
    _check_detections_keys(clips, detections)
    outcomes = compute_outcomes(clips, detections, recognizer, options)
    with_recognizer = recognizer is not None
    distance_of = _sweep_distances(outcomes) if with_recognizer else {}

    report: dict = {
        "schema_version": SCHEMA_VERSION,
        "config": dict(extra_config or {}, options=asdict(options)),
        "counts": {
            "clips": len(clips),
            "ground_truth_segments": sum(o.num_gt for o in outcomes),
            "predictions": sum(len(o.pred_keys) for o in outcomes),
        },
    }

    metrics = _metric_block(outcomes, options, distance_of, with_recognizer)
    if options.frame_ap:
        try:
            if frame_probabilities is not None:
                metrics["frame_ap"] = frame_level_ap(
                    clips, frame_probabilities=frame_probabilities, config=options.ap_config()
                )
            else:
                metrics["frame_ap"] = frame_level_ap(
                    clips, detections=detections, config=options.ap_config()
                )
        except ZeroGtError:
            metrics["frame_ap"] = None
    else:
        metrics["frame_ap"] = None
    report["metrics"] = metrics

    if options.duration_breakdown:
        report["duration_breakdown"] = _duration_breakdown(outcomes, options, distance_of, with_recognizer)

    result = EvalResult(report=report)
    if options.keep_curves:
        result.curves = _collect_curves(outcomes, options, distance_of, with_recognizer)
    return result


def _duration_breakdown(
    outcomes: Sequence[ClipOutcome],
    options: EvalOptions,
    distance_of: dict[tuple[str, str], int],
    with_recognizer: bool,
) -> dict:
    """Per-duration-bin segment counts and metrics.

    Segment counts bin every ground-truth segment by its own length and
    therefore partition the corpus total.  Metrics need whole clips, so
    clips are assigned to the bin of their mean ground-truth duration;
    clips without ground truth stay unassigned.
    """
    segment_counts = {name: 0 for name, _, _ in DURATION_BINS}
    for out in outcomes:
        for length in out.gt_lengths:
            segment_counts[duration_bin(length)] += 1

    grouped: dict[str, list[ClipOutcome]] = {name: [] for name, _, _ in DURATION_BINS}
    unassigned = 0
    for out in outcomes:
        if out.num_gt == 0:
            unassigned += 1
            continue
        grouped[duration_bin(sum(out.gt_lengths) / out.num_gt)].append(out)

    by_clip_mean = {}
    for name, _, _ in DURATION_BINS:
        members = grouped[name]
        entry = {
            "clips": len(members),
            "ground_truth_segments": sum(o.num_gt for o in members),
            "metrics": None,
        }
        if members:
            entry["metrics"] = _metric_block(members, options, distance_of, with_recognizer)
        by_clip_mean[name] = entry

    return {
        "segment_counts": segment_counts,
        "clips_without_ground_truth": unassigned,
        "by_clip_mean_duration": by_clip_mean,
    }


def _collect_curves(
    outcomes: Sequence[ClipOutcome],
    options: EvalOptions,
    distance_of: dict[tuple[str, str], int],
    with_recognizer: bool,
) -> dict[str, tuple[tuple[str, str], tuple[tuple[float, float], ...]]]:
    curves: dict[str, tuple[tuple[str, str], tuple[tuple[float, float], ...]]] = {}
    num_gt = sum(o.num_gt for o in outcomes)
    if num_gt > 0:
        for kind, thresholds in (("iou", options.iou_thresholds), ("acc", options.acc_thresholds)):
            if kind == "acc" and not with_recognizer:
                continue
            for threshold in thresholds:
                entries = []
                for ci, out in enumerate(outcomes):
                    flags = out.iou_flags[threshold] if kind == "iou" else out.acc_flags[threshold]
                    for pi, (score, start) in enumerate(out.pred_keys):
                        entries.append((score, start, ci, pi, flags[pi]))
                curve = pr_curve(_pooled_flags(entries), num_gt)
                curves[f"pr_{kind}_{threshold}"] = (("recall", "precision"), curve.points)
    if with_recognizer and outcomes:
        result = _msa_from_outcomes(outcomes, distance_of, options, keep_curve=True)
        if result is not None and result.curve is not None:
            finite = tuple((t, a) for t, a in result.curve)
            curves["msa_sweep"] = (("score_threshold", "accuracy"), finite)
    return curves
