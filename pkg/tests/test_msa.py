import math

import numpy as np
import pytest

from fsdeval.errors import ConfigError, OverlapError, RangeError, ValidationError
from fsdeval.model import NO_LETTER, Clip, LabeledSegment, ScoredSegment, Segment
from fsdeval.msa import (
    ClipSweepProfile,
    build_label_sequence,
    clip_sweep_profile,
    clip_sweep_strings,
    msa,
    select_detections,
    sweep_profiles,
)

import oracles


def seg(start, end, score):
    return ScoredSegment(Segment(start, end), score)


def labeled(start, end, letters):
    return LabeledSegment(Segment(start, end), letters)


class TestBuildLabelSequence:
    def test_two_words_with_gap(self):
        clip = Clip("c", 30, (labeled(0, 9, "PIRATES"), labeled(15, 29, "PATRICK")))
        assert build_label_sequence(clip) == f"PIRATES{NO_LETTER}PATRICK"

    def test_full_coverage_adjacent(self):
        clip = Clip("c", 10, (labeled(0, 4, "AB"), labeled(5, 9, "CD")))
        assert build_label_sequence(clip) == "ABCD"

    def test_interior_segment(self):
        clip = Clip("c", 20, (labeled(5, 9, "AB"),))
        assert build_label_sequence(clip) == f"{NO_LETTER}AB{NO_LETTER}"

    def test_no_segments(self):
        assert build_label_sequence(Clip("c", 20, ())) == NO_LETTER

    def test_explicit_segments_override_ground_truth(self):
        clip = Clip("c", 10, (labeled(0, 9, "AB"),))
        assert build_label_sequence(clip, [labeled(0, 4, "XY")]) == f"XY{NO_LETTER}"

    def test_overlap_rejected(self):
        clip = Clip("c", 20, ())
        with pytest.raises(OverlapError):
            build_label_sequence(clip, [labeled(0, 9, "A"), labeled(5, 14, "B")])

    def test_out_of_range_rejected(self):
        clip = Clip("c", 10, ())
        with pytest.raises(RangeError):
            build_label_sequence(clip, [labeled(5, 10, "A")])

    def test_matches_oracle_and_never_repeats_marker(self):
        rng = np.random.default_rng(42)
        for _ in range(100):
            n = int(rng.integers(5, 40))
            segments = []
            cursor = 0
            while True:
                start = cursor + int(rng.integers(0, 5))
                end = start + int(rng.integers(0, 6))
                if end >= n:
                    break
                letters = "AB"[: int(rng.integers(1, 3))]
                segments.append((start, end, letters))
                cursor = end + 1
            clip = Clip("c", n, tuple(labeled(s, e, t) for s, e, t in segments))
            got = build_label_sequence(clip)
            assert got == oracles.label_string(n, segments)
            assert NO_LETTER * 2 not in got


class TestSelectDetections:
    def test_overlapping_runner_up_dropped(self):
        preds = [seg(0, 9, 0.9), seg(2, 11, 0.8), seg(20, 29, 0.7)]
        assert select_detections(preds, 0.5) == [Segment(0, 9), Segment(20, 29)]

    def test_threshold_above_all(self):
        preds = [seg(0, 9, 0.9)]
        assert select_detections(preds, 0.95) == []

    def test_disjoint_input_passes_through_sorted(self):
        preds = [seg(20, 29, 0.7), seg(0, 9, 0.9)]
        assert select_detections(preds, 0.5) == [Segment(0, 9), Segment(20, 29)]

    def test_threshold_is_inclusive(self):
        assert select_detections([seg(0, 9, 0.5)], 0.5) == [Segment(0, 9)]

    def test_matches_greedy_oracle(self):
        rng = np.random.default_rng(42)
        for _ in range(200):
            preds = []
            for _ in range(int(rng.integers(0, 8))):
                start = int(rng.integers(0, 40))
                end = start + int(rng.integers(0, 12))
                preds.append((start, end, round(float(rng.random()), 2)))
            delta = round(float(rng.random()), 2)
            want = sorted(
                (s, e) for s, e, _ in oracles.greedy_disjoint(
                    [p for p in preds if p[2] >= delta]
                )
            )
            got = select_detections([seg(*p) for p in preds], delta)
            assert [(s.start, s.end) for s in got] == want
            # disjoint and sorted
            for a, b in zip(got, got[1:]):
                assert a.end < b.start

    def test_overlap_tolerance_trims_lower_scored_side(self):
        preds = [seg(0, 9, 0.9), seg(5, 14, 0.8)]  # IoU 1/3
        assert select_detections(preds, 0.0, overlap_tolerance=0.5) == [
            Segment(0, 9),
            Segment(10, 14),
        ]
        # zero tolerance keeps only the top-scored one
        assert select_detections(preds, 0.0) == [Segment(0, 9)]

    def test_tolerance_still_rejects_heavy_overlap(self):
        preds = [seg(0, 9, 0.9), seg(1, 10, 0.8)]  # IoU 9/11 > 0.5
        assert select_detections(preds, 0.0, overlap_tolerance=0.5) == [Segment(0, 9)]


class TestClipSweep:
    def recognizer_from(self, table):
        def recognize(clip, s):
            return table[(s.start, s.end)]

        return recognize

    def test_strings_per_regime(self):
        clip = Clip("c", 20, (labeled(5, 14, "AB"),))
        preds = [seg(5, 14, 0.8), seg(0, 3, 0.4)]
        rec = self.recognizer_from({(5, 14): "AB", (0, 3): "Q"})
        ref, breaks, hyps = clip_sweep_strings(clip, preds, rec)
        assert ref == f"{NO_LETTER}AB{NO_LETTER}"
        assert breaks == (0.8, 0.4)
        assert hyps == [
            NO_LETTER,
            f"{NO_LETTER}AB{NO_LETTER}",
            f"Q{NO_LETTER}AB{NO_LETTER}",
        ]

    def test_empty_recognition_leaves_frames_uncovered(self):
        clip = Clip("c", 20, (labeled(5, 14, "AB"),))
        preds = [seg(5, 14, 0.8)]
        rec = self.recognizer_from({(5, 14): ""})
        _, _, hyps = clip_sweep_strings(clip, preds, rec)
        assert hyps == [NO_LETTER, NO_LETTER]

    def test_profile_distances(self):
        clip = Clip("c", 20, (labeled(5, 14, "AB"),))
        preds = [seg(5, 14, 0.8), seg(0, 3, 0.4)]
        rec = self.recognizer_from({(5, 14): "AB", (0, 3): "Q"})
        profile = clip_sweep_profile(clip, preds, rec)
        assert profile.ref_len == 4
        assert profile.distances == (3, 0, 1)
        assert profile.distance_at(math.inf) == 3
        assert profile.distance_at(0.9) == 3
        assert profile.distance_at(0.8) == 0
        assert profile.distance_at(0.5) == 0
        assert profile.distance_at(0.1) == 1


class TestSweepProfiles:
    def test_empty_corpus(self):
        with pytest.raises(ValidationError):
            sweep_profiles([])

    def test_bad_aggregate(self):
        p = ClipSweepProfile((), (1,), 2)
        with pytest.raises(ConfigError):
            sweep_profiles([p], aggregate="median")

    def test_bad_grid(self):
        p = ClipSweepProfile((), (1,), 2)
        with pytest.raises(ConfigError):
            sweep_profiles([p], grid=[])
        with pytest.raises(ConfigError):
            sweep_profiles([p], grid=[0.5, math.nan])

    def test_macro_vs_pooled(self):
        # clip 1: ref length 2, distance 1; clip 2: ref length 10, distance 0
        p1 = ClipSweepProfile((), (1,), 2)
        p2 = ClipSweepProfile((), (0,), 10)
        pooled = sweep_profiles([p1, p2], aggregate="pooled")
        macro = sweep_profiles([p1, p2], aggregate="macro")
        assert pooled.value == 1.0 - 1 / 12
        assert macro.value == 0.75
        assert pooled.aggregate == "pooled"
        assert macro.aggregate == "macro"

    def test_curve_is_threshold_ascending(self):
        p = ClipSweepProfile((0.8, 0.4), (3, 0, 1), 4)
        result = sweep_profiles([p], keep_curve=True)
        thresholds = [t for t, _ in result.curve]
        assert thresholds == sorted(thresholds)
        for t, acc in result.curve:
            assert acc == 1.0 - p.distance_at(t) / p.ref_len


class TestMsa:
    def test_ground_truth_detections_with_oracle_table(self):
        clips = []
        detections = {}
        tables = {}
        for k in range(3):
            clip = Clip(f"c{k}", 30, (labeled(5, 14, "AB"), labeled(20, 24, "C")))
            clips.append(clip)
            detections[clip.clip_id] = [
                ScoredSegment(g.segment, 1.0) for g in clip.ground_truth
            ]
            tables[clip.clip_id] = {(5, 14): "AB", (20, 24): "C"}

        def recognize(clip, s):
            return tables[clip.clip_id][(s.start, s.end)]

        result = msa(clips, detections, recognize)
        assert result.value == 1.0
        assert result.threshold == 1.0

    def test_no_detections(self):
        clip = Clip("c", 20, (labeled(5, 14, "AB"),))
        result = msa([clip], {"c": []}, lambda c, s: "AB")
        # reference "∅AB∅" vs predicted "∅": 3 edits over 4 symbols
        assert result.value == 0.25
        assert result.threshold == math.inf

    def test_recognizer_called_once_per_distinct_segment(self):
        clip = Clip("c", 30, (labeled(0, 9, "AB"),))
        calls = []

        def recognize(c, s):
            calls.append((s.start, s.end))
            return "AB"

        preds = [seg(0, 9, 0.9), seg(0, 9, 0.5), seg(15, 19, 0.3)]
        msa([clip], {"c": preds}, recognize)
        assert sorted(calls) == [(0, 9), (15, 19)]

    def test_matches_direct_oracle(self):
        rng = np.random.default_rng(42)
        for _ in range(100):
            num_clips = int(rng.integers(1, 4))
            tuple_clips, det_lists = [], []
            fs_clips, det_map = [], {}
            tables = []
            for ci in range(num_clips):
                n = int(rng.integers(10, 40))
                gts = []
                cursor = 0
                while True:
                    start = cursor + int(rng.integers(0, 5))
                    end = start + int(rng.integers(0, 6))
                    if end >= n:
                        break
                    gts.append((start, end, "AB"[: int(rng.integers(1, 3))]))
                    cursor = end + 1
                preds = []
                table = {}
                for _ in range(int(rng.integers(0, 6))):
                    start = int(rng.integers(0, n - 1))
                    end = min(n - 1, start + int(rng.integers(0, 8)))
                    preds.append((start, end, round(float(rng.random()), 2)))
                    table[(start, end)] = "AB"[: int(rng.integers(0, 3))]
                tuple_clips.append((n, gts))
                det_lists.append(preds)
                cid = f"c{ci}"
                fs_clips.append(Clip(cid, n, tuple(labeled(*g) for g in gts)))
                det_map[cid] = [seg(*p) for p in preds]
                tables.append(table)

            def by_index(ci, s, e):
                return tables[ci][(s, e)]

            def by_clip(clip, s):
                return tables[int(clip.clip_id[1:])][(s.start, s.end)]

            scores = sorted({p[2] for preds in det_lists for p in preds})
            grid = scores + [math.inf]
            want_value, want_threshold = oracles.msa_direct(
                tuple_clips, det_lists, by_index, grid
            )
            got = msa(fs_clips, det_map, by_clip)
            assert got.value == want_value
            assert got.threshold == want_threshold

    def test_uniform_grid_complete_on_lattice_scores(self):
        # scores on a 0.01 lattice below 1.0: the 1000-point uniform grid has
        # step 1/999 < 0.01, so it realizes every selection regime exactly
        rng = np.random.default_rng(42)
        for _ in range(20):
            n = 40
            clip = Clip("c", n, (labeled(5, 14, "AB"),))
            preds = []
            for _ in range(int(rng.integers(1, 6))):
                start = int(rng.integers(0, n - 1))
                end = min(n - 1, start + int(rng.integers(0, 8)))
                score = round(float(rng.integers(0, 100)) / 100.0, 2)
                preds.append(seg(start, end, score))
            rec = lambda c, s: "AB"
            default = msa([clip], {"c": preds}, rec)
            uniform = msa([clip], {"c": preds}, rec, grid=np.linspace(0.0, 1.0, 1000))
            assert uniform.value == default.value
