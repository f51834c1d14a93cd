"""Point adjustment and the precision/recall/F1 accounting."""

import numpy as np
import pytest

from oracles import point_adjust_reference, prf_reference
from tcnad.evaluation import (
    AnomalySegment,
    EvalReport,
    aggregate,
    evaluate_predictions,
    f1_score,
    labels_from_segments,
    point_adjust,
    point_adjusted_report,
    segments_from_labels,
)


class TestSegments:
    def test_from_labels(self):
        segs = segments_from_labels(np.array([0, 1, 1, 0, 1]))
        assert segs == [AnomalySegment(1, 2), AnomalySegment(4, 4)]

    def test_empty_and_full(self):
        assert segments_from_labels(np.zeros(5, dtype=int)) == []
        assert segments_from_labels(np.ones(4, dtype=int)) == [AnomalySegment(0, 3)]

    def test_roundtrip(self):
        rng = np.random.default_rng(42)
        for _ in range(20):
            labels = (rng.random(30) < 0.3).astype(int)
            rebuilt = labels_from_segments(segments_from_labels(labels), 30)
            np.testing.assert_array_equal(rebuilt, labels)

    def test_rejects_non_binary(self):
        with pytest.raises(ValueError):
            segments_from_labels(np.array([0, 2, 1]))

    def test_segment_validation(self):
        with pytest.raises(ValueError):
            AnomalySegment(3, 2)
        with pytest.raises(ValueError):
            AnomalySegment(-1, 2)
        with pytest.raises(ValueError):
            labels_from_segments([AnomalySegment(0, 5)], 5)


class TestPointAdjust:
    def test_one_hit_fills_the_segment(self):
        pred = np.array([0, 0, 1, 0, 0])
        segs = [AnomalySegment(1, 3)]
        np.testing.assert_array_equal(point_adjust(pred, segs), [0, 1, 1, 1, 0])

    def test_miss_leaves_zeros(self):
        pred = np.array([1, 0, 0, 0, 0])
        segs = [AnomalySegment(1, 3)]
        np.testing.assert_array_equal(point_adjust(pred, segs), pred)

    def test_idempotent(self):
        rng = np.random.default_rng(0)
        pred = (rng.random(40) < 0.2).astype(int)
        labels = (rng.random(40) < 0.25).astype(int)
        segs = segments_from_labels(labels)
        once = point_adjust(pred, segs)
        np.testing.assert_array_equal(point_adjust(once, segs), once)

    def test_does_not_mutate_input(self):
        pred = np.array([0, 1, 0])
        point_adjust(pred, [AnomalySegment(0, 2)])
        np.testing.assert_array_equal(pred, [0, 1, 0])

    def test_out_of_range_segment(self):
        with pytest.raises(ValueError):
            point_adjust(np.zeros(3, dtype=int), [AnomalySegment(1, 5)])

    @pytest.mark.parametrize("seed", range(30))
    def test_matches_reference_walk(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(5, 50))
        labels = (rng.random(n) < rng.uniform(0.1, 0.5)).astype(int)
        pred = (rng.random(n) < rng.uniform(0.1, 0.5)).astype(int)
        ours = point_adjust(pred, segments_from_labels(labels))
        np.testing.assert_array_equal(ours, point_adjust_reference(pred, labels))


class TestMetrics:
    def test_hand_counts(self):
        pred = np.array([1, 1, 0, 0, 1])
        labels = np.array([1, 0, 1, 0, 1])
        rep = evaluate_predictions(pred, labels)
        assert (rep.tp, rep.fp, rep.fn) == (2, 1, 1)
        assert rep.precision == pytest.approx(2 / 3)
        assert rep.recall == pytest.approx(2 / 3)
        assert rep.f1 == pytest.approx(2 / 3)

    def test_zero_conventions(self):
        rep = evaluate_predictions(np.zeros(4, dtype=int), np.zeros(4, dtype=int))
        assert rep.precision == 0.0 and rep.recall == 0.0 and rep.f1 == 0.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            evaluate_predictions(np.zeros(3, dtype=int), np.zeros(4, dtype=int))

    def test_f1_reference_pairs(self):
        # harmonic mean reproduces the published-style summary numbers
        assert f1_score(0.9539, 0.9019) == pytest.approx(0.9272, abs=5e-4)
        assert f1_score(0.9419, 0.9815) == pytest.approx(0.9613, abs=5e-4)

    def test_f1_symmetry(self):
        assert f1_score(0.3, 0.8) == f1_score(0.8, 0.3)

    @pytest.mark.parametrize("seed", range(10))
    def test_counts_match_loop_reference(self, seed):
        rng = np.random.default_rng(seed)
        n = 40
        pred = (rng.random(n) < 0.3).astype(int)
        labels = (rng.random(n) < 0.3).astype(int)
        rep = evaluate_predictions(pred, labels)
        p, r, f1 = prf_reference(pred, labels)
        assert rep.precision == pytest.approx(p)
        assert rep.recall == pytest.approx(r)
        assert rep.f1 == pytest.approx(f1)


class TestAdjustedReport:
    def test_credits_whole_segment(self):
        labels = np.array([0, 1, 1, 1, 0, 0])
        pred = np.array([0, 0, 1, 0, 0, 1])
        rep = point_adjusted_report(pred, labels)
        assert (rep.tp, rep.fp, rep.fn) == (3, 1, 0)


class TestAggregate:
    def _reports(self):
        return [
            EvalReport(tp=1, fp=0, fn=1, precision=1.0, recall=0.5, f1=f1_score(1.0, 0.5), channel="a"),
            EvalReport(tp=1, fp=1, fn=0, precision=0.5, recall=1.0, f1=f1_score(0.5, 1.0), channel="b"),
        ]

    def test_micro_sums_counts(self):
        agg = aggregate(self._reports(), "micro")
        assert (agg.tp, agg.fp, agg.fn) == (2, 1, 1)
        assert agg.precision == pytest.approx(2 / 3)
        assert agg.recall == pytest.approx(2 / 3)
        assert agg.f1 == pytest.approx(2 / 3)

    def test_macro_averages_metrics(self):
        agg = aggregate(self._reports(), "macro")
        assert agg.precision == pytest.approx(0.75)
        assert agg.recall == pytest.approx(0.75)
        assert agg.f1 == pytest.approx(f1_score(1.0, 0.5))

    def test_order_invariant(self):
        reports = self._reports()
        a = aggregate(reports, "micro")
        b = aggregate(list(reversed(reports)), "micro")
        assert (a.tp, a.fp, a.fn, a.precision, a.recall, a.f1) == \
               (b.tp, b.fp, b.fn, b.precision, b.recall, b.f1)

    def test_bad_method(self):
        with pytest.raises(ValueError):
            aggregate(self._reports(), "median")
        with pytest.raises(ValueError):
            aggregate([], "micro")
