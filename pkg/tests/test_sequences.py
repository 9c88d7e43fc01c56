import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fsdeval.errors import EmptyTruthError, ShapeError, ValidationError
from fsdeval.model import BLANK, NO_LETTER, Clip, FramePosteriors, LabeledSegment, Segment
from fsdeval.sequences import (
    CtcTarget,
    collapse_labels,
    ctc_forward_nll,
    edit_distance,
    edit_distances_batch,
    letter_accuracy,
    partial_alignment_loss,
)

from oracles import ctc_nll_enumerate, naive_edit_distance

abc = st.text(alphabet="ABC", max_size=7)


def random_string(rng, alphabet="ABC", max_len=7):
    length = int(rng.integers(0, max_len + 1))
    return "".join(alphabet[i] for i in rng.integers(0, len(alphabet), length))


class TestEditDistance:
    def test_examples(self):
        assert edit_distance("PIRATES", "PIRATES") == 0
        assert edit_distance("PATRICK", "PATRIK") == 1
        assert edit_distance("ABC", "") == 3
        assert edit_distance("", "") == 0

    def test_matches_naive_recursion(self):
        rng = np.random.default_rng(42)
        for _ in range(300):
            a = random_string(rng)
            b = random_string(rng)
            assert edit_distance(a, b) == naive_edit_distance(a, b), (a, b)

    @given(abc, abc)
    def test_symmetric(self, a, b):
        assert edit_distance(a, b) == edit_distance(b, a)

    @given(abc, abc, abc)
    def test_triangle_inequality(self, a, b, c):
        assert edit_distance(a, c) <= edit_distance(a, b) + edit_distance(b, c)

    @given(abc, abc)
    def test_bounds(self, a, b):
        d = edit_distance(a, b)
        assert abs(len(a) - len(b)) <= d <= max(len(a), len(b))
        assert (d == 0) == (a == b)


class TestEditDistancesBatch:
    def test_matches_scalar(self):
        rng = np.random.default_rng(42)
        refs = [random_string(rng, "ABCDE", 12) for _ in range(500)]
        hyps = [random_string(rng, "ABCDE", 12) for _ in range(500)]
        got = edit_distances_batch(refs, hyps)
        expected = [edit_distance(a, b) for a, b in zip(refs, hyps)]
        np.testing.assert_array_equal(got, expected)

    def test_empty_inputs(self):
        np.testing.assert_array_equal(edit_distances_batch([], []), [])
        np.testing.assert_array_equal(edit_distances_batch(["", "AB"], ["A", ""]), [1, 2])

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            edit_distances_batch(["A"], [])


class TestLetterAccuracy:
    def test_examples(self):
        assert letter_accuracy("PIRATES", "PIRATES") == 1.0
        assert letter_accuracy("A", "BCD") == -2.0
        assert letter_accuracy("AB", "A") == 0.5

    def test_not_clamped(self):
        # worse-than-useless hypotheses go below zero and stay there
        assert letter_accuracy("A", "BBBBBBBBBB") == -9.0

    def test_empty_truth(self):
        with pytest.raises(EmptyTruthError):
            letter_accuracy("", "A")

    @given(st.text(alphabet="ABC", min_size=1, max_size=7))
    def test_self_accuracy_is_one(self, t):
        assert letter_accuracy(t, t) == 1.0


class TestCollapseLabels:
    def test_examples(self):
        assert collapse_labels(["A", "A", BLANK]) == "A"
        assert collapse_labels(["A", BLANK, "A"]) == "AA"
        assert collapse_labels([BLANK, BLANK]) == ""

    def test_output_properties(self):
        rng = np.random.default_rng(42)
        symbols = ["A", "B", BLANK]
        for _ in range(200):
            path = [symbols[i] for i in rng.integers(0, 3, int(rng.integers(0, 12)))]
            out = collapse_labels(path)
            assert BLANK not in out
            assert len(out) <= len(path)

    def test_repeat_free_blank_free_is_fixed_point(self):
        assert collapse_labels(list("ABAB")) == "ABAB"


class TestCtcTarget:
    def test_min_frames_counts_repeats(self):
        assert CtcTarget("AB", 5).min_frames == 2
        assert CtcTarget("AAB", 5).min_frames == 4
        assert CtcTarget("", 0).min_frames == 0

    def test_feasibility(self):
        assert CtcTarget("AB", 2).feasible
        assert not CtcTarget("AB", 1).feasible

    def test_blank_rejected(self):
        with pytest.raises(ValidationError):
            CtcTarget("A" + BLANK, 3)


def posteriors_from_rows(rows, symbols=("A", BLANK)):
    return FramePosteriors("c", tuple(symbols), np.asarray(rows, dtype=np.float64))


class TestCtcForward:
    def test_single_frame_single_letter(self):
        fp = posteriors_from_rows([[0.6, 0.4]])
        assert math.isclose(ctc_forward_nll(fp, "A"), -math.log(0.6), rel_tol=1e-12)

    def test_two_frames_uniform(self):
        fp = posteriors_from_rows([[0.5, 0.5], [0.5, 0.5]])
        # paths (A,A), (A,blank), (blank,A) sum to 0.75
        assert math.isclose(ctc_forward_nll(fp, "A"), -math.log(0.75), rel_tol=1e-12)

    def test_infeasible_target(self):
        fp = posteriors_from_rows([[0.5, 0.3, 0.2]], symbols=("A", "B", BLANK))
        assert ctc_forward_nll(fp, "AB") == math.inf

    def test_repeat_needs_separating_blank(self):
        fp = posteriors_from_rows([[1.0, 0.0], [1.0, 0.0]])
        # "AA" needs A blank A at minimum; two frames of pure A collapse to "A"
        assert ctc_forward_nll(fp, "AA") == math.inf
        assert ctc_forward_nll(fp, "A") == pytest.approx(0.0, abs=1e-12)

    def test_zero_frames(self):
        fp = posteriors_from_rows(np.zeros((0, 2)))
        assert ctc_forward_nll(fp, "") == 0.0
        assert ctc_forward_nll(fp, "A") == math.inf

    def test_missing_symbol(self):
        fp = posteriors_from_rows([[0.6, 0.4]], symbols=("A", BLANK))
        with pytest.raises(ShapeError):
            ctc_forward_nll(fp, "Z")

    def test_missing_blank_column(self):
        fp = posteriors_from_rows([[0.6, 0.4]], symbols=("A", "B"))
        with pytest.raises(ShapeError):
            ctc_forward_nll(fp, "A")

    def test_frame_count_mismatch(self):
        fp = posteriors_from_rows([[0.6, 0.4]])
        with pytest.raises(ShapeError):
            ctc_forward_nll(fp, CtcTarget("A", 2))

    def test_matches_enumeration(self):
        rng = np.random.default_rng(42)
        letters = "AB"
        symbols = ("A", "B", BLANK)
        for _ in range(100):
            T = int(rng.integers(1, 6))
            rows = rng.random((T, 3))
            rows /= rows.sum(axis=1, keepdims=True)
            target = "".join(letters[i] for i in rng.integers(0, 2, int(rng.integers(0, 4))))
            fp = FramePosteriors("c", symbols, rows)
            got = ctc_forward_nll(fp, target)
            want = ctc_nll_enumerate(rows.tolist(), list(symbols), target, BLANK)
            if math.isinf(want):
                assert math.isinf(got)
            else:
                assert math.isclose(got, want, rel_tol=1e-9), (target, T)


class TestPartialAlignmentLoss:
    def test_no_segments_certain_no_letter(self):
        clip = Clip("c", 3, ())
        fp = FramePosteriors("c", ("A", NO_LETTER, BLANK), np.array([[0.0, 1.0, 0.0]] * 3))
        assert partial_alignment_loss(clip, fp) == 0.0

    def test_single_uncertain_frame(self):
        clip = Clip("c", 1, ())
        fp = FramePosteriors("c", ("A", NO_LETTER, BLANK), np.array([[0.25, 0.5, 0.25]]))
        assert math.isclose(partial_alignment_loss(clip, fp), math.log(2), rel_tol=1e-12)

    def test_segment_plus_outside_frame(self):
        clip = Clip("c", 3, (LabeledSegment(Segment(0, 1), "A"),))
        rows = np.array(
            [
                [0.5, 0.0, 0.5],
                [0.5, 0.0, 0.5],
                [0.25, 0.5, 0.25],
            ]
        )
        fp = FramePosteriors("c", ("A", NO_LETTER, BLANK), rows)
        want = -math.log(0.75) + math.log(2)
        assert math.isclose(partial_alignment_loss(clip, fp), want, rel_tol=1e-12)

    def test_frame_mismatch(self):
        clip = Clip("c", 2, ())
        fp = FramePosteriors("c", ("A", NO_LETTER, BLANK), np.array([[0.2, 0.5, 0.3]]))
        with pytest.raises(ShapeError):
            partial_alignment_loss(clip, fp)

    def test_matches_manual_composition(self):
        rng = np.random.default_rng(42)
        symbols = ("A", "B", NO_LETTER, BLANK)
        for k in range(20):
            n = int(rng.integers(4, 12))
            rows = rng.random((n, 4)) + 1e-3
            rows /= rows.sum(axis=1, keepdims=True)
            seg_end = int(rng.integers(1, n - 1))
            clip = Clip(f"c{k}", n, (LabeledSegment(Segment(0, seg_end), "AB"),))
            fp = FramePosteriors(f"c{k}", symbols, rows)
            value = partial_alignment_loss(clip, fp)
            assert value >= 0.0
            inner = FramePosteriors(f"c{k}", symbols, rows[: seg_end + 1])
            want = ctc_forward_nll(inner, "AB") - float(
                np.log(rows[seg_end + 1 :, 2]).sum()
            )
            assert math.isclose(value, want, rel_tol=1e-12)
