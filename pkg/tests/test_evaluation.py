import numpy as np
import pytest

from fsdeval.dataio import report_to_json
from fsdeval.errors import ConfigError
from fsdeval.evaluation import (
    EvalOptions,
    duration_bin,
    run_evaluation,
)
from fsdeval.metrics import ap_at_acc, ap_at_iou, frame_level_ap
from fsdeval.model import Clip, FramePosteriors, LabeledSegment, ScoredSegment, Segment
from fsdeval.msa import msa
from fsdeval.recognizers import NoisyRecognizer, OracleRecognizer


def labeled(start, end, letters):
    return LabeledSegment(Segment(start, end), letters)


def build_corpus(rng, num_clips=8):
    clips = []
    detections = {}
    for k in range(num_clips):
        n = int(rng.integers(30, 150))
        segments = []
        cursor = 0
        while True:
            start = cursor + int(rng.integers(2, 15))
            end = start + int(rng.integers(2, 25))
            if end >= n:
                break
            letters = "".join(
                "ABCDEFG"[i] for i in rng.integers(0, 7, int(rng.integers(1, 5)))
            )
            segments.append(labeled(start, end, letters))
            cursor = end + 1
        clip = Clip(f"clip{k:02d}", n, tuple(segments))
        clips.append(clip)
        preds = []
        for _ in range(int(rng.integers(0, 7))):
            start = int(rng.integers(0, n - 1))
            end = min(n - 1, start + int(rng.integers(0, 30)))
            preds.append(ScoredSegment(Segment(start, end), round(float(rng.random()), 2)))
        detections[clip.clip_id] = preds
    return clips, detections


class TestRunEvaluation:
    def test_report_matches_direct_metric_calls(self):
        rng = np.random.default_rng(42)
        clips, detections = build_corpus(rng)
        recognizer = NoisyRecognizer(0.3, seed=5)
        options = EvalOptions()
        report = run_evaluation(clips, detections, recognizer, options).report

        for t in options.iou_thresholds:
            assert report["metrics"]["ap_at_iou"][str(t)] == ap_at_iou(
                clips, detections, t
            )
        recognized = {
            c.clip_id: [recognizer(c, p.segment) for p in detections[c.clip_id]]
            for c in clips
        }
        for t in options.acc_thresholds:
            assert report["metrics"]["ap_at_acc"][str(t)] == ap_at_acc(
                clips, detections, recognized, t, options.acc_iou_floor
            )
        direct = msa(clips, detections, recognizer)
        assert report["metrics"]["msa"]["value"] == direct.value
        assert report["metrics"]["msa"]["threshold"] == direct.threshold
        assert report["metrics"]["frame_ap"] == frame_level_ap(clips, detections=detections)

    def test_parallel_run_is_byte_identical(self):
        rng = np.random.default_rng(42)
        clips, detections = build_corpus(rng)
        recognizer = NoisyRecognizer(0.2, seed=9)
        serial = run_evaluation(
            clips, detections, recognizer, EvalOptions(workers=1)
        ).report
        parallel = run_evaluation(
            clips, detections, recognizer, EvalOptions(workers=2)
        ).report
        serial["config"]["options"]["workers"] = 0
        parallel["config"]["options"]["workers"] = 0
        assert report_to_json(serial) == report_to_json(parallel)

    def test_perfect_detections_with_oracle(self):
        rng = np.random.default_rng(42)
        clips, _ = build_corpus(rng, num_clips=5)
        detections = {
            c.clip_id: [ScoredSegment(g.segment, 1.0) for g in c.ground_truth]
            for c in clips
        }
        report = run_evaluation(clips, detections, OracleRecognizer()).report
        for value in report["metrics"]["ap_at_iou"].values():
            assert value == 1.0
        for value in report["metrics"]["ap_at_acc"].values():
            assert value == 1.0
        assert report["metrics"]["msa"]["value"] == 1.0
        assert report["metrics"]["frame_ap"] == 1.0

    def test_empty_corpus(self):
        report = run_evaluation([], {}).report
        assert report["counts"] == {
            "clips": 0,
            "ground_truth_segments": 0,
            "predictions": 0,
        }
        for value in report["metrics"]["ap_at_iou"].values():
            assert value is None
        assert report["metrics"]["ap_at_acc"] is None
        assert report["metrics"]["msa"] is None
        assert report["metrics"]["frame_ap"] is None

    def test_empty_corpus_with_recognizer(self):
        report = run_evaluation([], {}, OracleRecognizer()).report
        assert report["metrics"]["msa"] is None

    def test_without_recognizer_accuracy_metrics_are_null(self):
        rng = np.random.default_rng(42)
        clips, detections = build_corpus(rng, num_clips=3)
        report = run_evaluation(clips, detections).report
        assert report["metrics"]["ap_at_acc"] is None
        assert report["metrics"]["msa"] is None
        assert all(v is not None for v in report["metrics"]["ap_at_iou"].values())

    def test_frame_probability_input_overrides_detections(self):
        clip = Clip("c", 10, (labeled(2, 5, "AB"),))
        probs = np.zeros(10)
        probs[2:6] = 1.0
        rows = np.stack([probs, 1.0 - probs], axis=1)
        posteriors = {"c": FramePosteriors("c", ("FS", "NONFS"), rows)}
        report = run_evaluation(
            [clip], {"c": []}, frame_probabilities=posteriors
        ).report
        assert report["metrics"]["frame_ap"] == 1.0

    def test_counts(self):
        rng = np.random.default_rng(42)
        clips, detections = build_corpus(rng)
        report = run_evaluation(clips, detections).report
        assert report["counts"]["clips"] == len(clips)
        assert report["counts"]["ground_truth_segments"] == sum(
            len(c.ground_truth) for c in clips
        )
        assert report["counts"]["predictions"] == sum(
            len(v) for v in detections.values()
        )

    def test_extra_config_is_recorded(self):
        report = run_evaluation([], {}, extra_config={"command": "eval"}).report
        assert report["config"]["command"] == "eval"
        assert report["config"]["options"]["workers"] == 1

    def test_schema_version_present(self):
        assert run_evaluation([], {}).report["schema_version"] == 1


class TestDurationBreakdown:
    def test_bin_edges(self):
        assert duration_bin(1) == "short"
        assert duration_bin(19) == "short"
        assert duration_bin(20) == "medium"
        assert duration_bin(79) == "medium"
        assert duration_bin(80) == "long"
        assert duration_bin(500) == "long"

    def test_segment_counts_partition_corpus(self):
        rng = np.random.default_rng(42)
        clips, detections = build_corpus(rng)
        report = run_evaluation(clips, detections).report
        breakdown = report["duration_breakdown"]
        assert sum(breakdown["segment_counts"].values()) == report["counts"][
            "ground_truth_segments"
        ]

    def test_clip_grouping_partitions_clips(self):
        rng = np.random.default_rng(42)
        clips, detections = build_corpus(rng)
        report = run_evaluation(clips, detections).report
        breakdown = report["duration_breakdown"]
        grouped = sum(
            entry["clips"] for entry in breakdown["by_clip_mean_duration"].values()
        )
        assert grouped + breakdown["clips_without_ground_truth"] == len(clips)

    def test_bins_with_clips_have_metrics(self):
        clip_short = Clip("s", 30, (labeled(0, 9, "AB"),))
        clip_long = Clip("l", 200, (labeled(0, 99, "CD"),))
        detections = {
            "s": [ScoredSegment(Segment(0, 9), 1.0)],
            "l": [ScoredSegment(Segment(0, 99), 1.0)],
        }
        report = run_evaluation([clip_short, clip_long], detections).report
        by_bin = report["duration_breakdown"]["by_clip_mean_duration"]
        assert by_bin["short"]["clips"] == 1
        assert by_bin["long"]["clips"] == 1
        assert by_bin["medium"]["clips"] == 0
        assert by_bin["medium"]["metrics"] is None
        assert by_bin["short"]["metrics"]["ap_at_iou"]["0.5"] == 1.0
        assert by_bin["long"]["metrics"]["ap_at_iou"]["0.5"] == 1.0

    def test_disabled_breakdown(self):
        report = run_evaluation([], {}, options=EvalOptions(duration_breakdown=False)).report
        assert "duration_breakdown" not in report


class TestEvalOptions:
    def test_worker_validation(self):
        with pytest.raises(ConfigError):
            EvalOptions(workers=0)

    def test_aggregate_validation(self):
        with pytest.raises(ConfigError):
            EvalOptions(msa_aggregate="median")

    def test_ap_config_mirror(self):
        options = EvalOptions(num_recall_levels=50, include_zero_level=True)
        config = options.ap_config()
        assert config.num_recall_levels == 50
        assert config.include_zero_level is True


class TestCurves:
    def test_curve_collection(self):
        rng = np.random.default_rng(42)
        clips, detections = build_corpus(rng, num_clips=4)
        recognizer = NoisyRecognizer(0.2, seed=3)
        result = run_evaluation(
            clips, detections, recognizer, EvalOptions(keep_curves=True)
        )
        total_preds = sum(len(v) for v in detections.values())
        for t in (0.1, 0.3, 0.5):
            labels, points = result.curves[f"pr_iou_{t}"]
            assert labels == ("recall", "precision")
            assert len(points) == total_preds
        assert "msa_sweep" in result.curves
        labels, points = result.curves["msa_sweep"]
        assert labels == ("score_threshold", "accuracy")
        thresholds = [t for t, _ in points]
        assert thresholds == sorted(thresholds)

    def test_no_curves_by_default(self):
        rng = np.random.default_rng(42)
        clips, detections = build_corpus(rng, num_clips=2)
        result = run_evaluation(clips, detections)
        assert result.curves == {}
