import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from camsteer.metrics import (
    ConfusionCounts,
    MetricsReport,
    RoundHistory,
    auc,
    confusion,
    f1,
    precision,
    recall,
    report_for_label,
)


def brute_force_confusion(probs, truths, label, thr):
    tp = fp = tn = fn = 0
    for i in range(len(truths)):
        pred = probs[i][label] >= thr
        pos = truths[i][label] == 1
        if pred and pos:
            tp += 1
        elif pred and not pos:
            fp += 1
        elif not pred and not pos:
            tn += 1
        else:
            fn += 1
    return tp, fp, tn, fn


def pair_counting_auc(scores, labels):
    """All-pairs oracle: wins + half-ties over positive x negative pairs."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    if not pos or not neg:
        return None
    total = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                total += 1.0
            elif p == n:
                total += 0.5
    return total / (len(pos) * len(neg))


class TestConfusion:
    def test_simple(self):
        probs = np.array([[0.9], [0.2]])
        truths = np.array([[1], [0]])
        c = confusion(probs, truths, 0, 0.5)
        assert (c.tp, c.tn, c.fp, c.fn) == (1, 1, 0, 0)

    def test_all_positive_predictions(self):
        probs = np.ones((4, 1))
        truths = np.array([[1], [1], [0], [0]])
        c = confusion(probs, truths, 0, 0.5)
        assert c.tp == 2 and c.fp == 2

    def test_matches_loop_oracle(self):
        rng = np.random.RandomState(3)
        probs = rng.rand(60, 3)
        truths = rng.randint(0, 2, size=(60, 3))
        for label in range(3):
            c = confusion(probs, truths, label, 0.5)
            assert (c.tp, c.fp, c.tn, c.fn) == brute_force_confusion(probs, truths, label, 0.5)
            assert c.total == 60

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            confusion(np.ones((3, 1)), np.ones((2, 1)), 0)


class TestPrecisionRecallF1:
    def test_precision(self):
        assert precision(ConfusionCounts(tp=2, fp=1, tn=0, fn=0)) == pytest.approx(2 / 3)

    def test_precision_undefined(self):
        assert precision(ConfusionCounts(tp=0, fp=0, tn=5, fn=2)) is None

    def test_recall(self):
        assert recall(ConfusionCounts(tp=3, fp=0, tn=0, fn=1)) == pytest.approx(0.75)

    def test_recall_undefined(self):
        assert recall(ConfusionCounts(tp=0, fp=3, tn=5, fn=0)) is None

    def test_f1_symmetric_point(self):
        assert f1(0.5, 0.5) == pytest.approx(0.5)

    def test_f1_zero_boundary_convention(self):
        assert f1(1.0, 0.0) == 0.0

    def test_f1_undefined_inputs(self):
        assert f1(None, 0.5) is None
        assert f1(0.5, None) is None

    def test_f1_reference_arithmetic(self):
        # harmonic mean of the reference precision/recall pair
        got = f1(0.160, 0.375)
        assert got == pytest.approx(2 * 0.160 * 0.375 / (0.160 + 0.375), abs=1e-12)
        assert got == pytest.approx(0.224, abs=1e-3)

    @given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50), st.integers(0, 50))
    @settings(max_examples=100, deadline=None)
    def test_formula_oracle_on_integer_counts(self, tp, fp, tn, fn):
        c = ConfusionCounts(tp=tp, fp=fp, tn=tn, fn=fn)
        p, r = precision(c), recall(c)
        assert p == (tp / (tp + fp) if tp + fp else None)
        assert r == (tp / (tp + fn) if tp + fn else None)
        got = f1(p, r)
        if p is None or r is None:
            assert got is None
        elif p + r == 0:
            assert got == 0.0
        else:
            assert got == pytest.approx(2 * p * r / (p + r), abs=1e-15)


class TestAuc:
    def test_one_win_one_loss(self):
        assert auc([0.9, 0.8, 0.3], [1, 0, 1]) == pytest.approx(0.5)

    def test_perfect_separation(self):
        assert auc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0

    def test_single_class_undefined(self):
        assert auc([0.1, 0.9], [1, 1]) is None
        assert auc([0.1, 0.9], [0, 0]) is None

    def test_ties_count_half(self):
        assert auc([0.5, 0.5], [1, 0]) == pytest.approx(0.5)

    def test_matches_pair_oracle_with_ties(self):
        rng = np.random.RandomState(5)
        scores = np.round(rng.rand(200), 2)  # rounding forces ties
        labels = rng.randint(0, 2, size=200)
        if labels.sum() in (0, 200):
            labels[0] = 1 - labels[0]
        assert auc(scores, labels) == pytest.approx(pair_counting_auc(scores, labels), abs=1e-9)

    @given(st.integers(min_value=0, max_value=2**31 - 1))
    @settings(max_examples=25, deadline=None)
    def test_matches_pair_oracle_random(self, seed):
        rng = np.random.RandomState(seed)
        n = rng.randint(2, 120)
        scores = np.round(rng.rand(n), 1)
        labels = rng.randint(0, 2, size=n)
        expected = pair_counting_auc(scores.tolist(), labels.tolist())
        got = auc(scores, labels)
        if expected is None:
            assert got is None
        else:
            assert got == pytest.approx(expected, abs=1e-9)


class TestReportAndHistory:
    def test_counts_partition_test_set(self):
        rng = np.random.RandomState(9)
        probs = rng.rand(30, 2)
        truths = rng.randint(0, 2, size=(30, 2))
        report = report_for_label(probs, truths, 0, round_index=0)
        assert report.correct_count + report.incorrect_count == 30

    def test_chance_level_auc(self):
        rng = np.random.RandomState(13)
        probs = rng.rand(2000, 1)
        truths = rng.randint(0, 2, size=(2000, 1))
        report = report_for_label(probs, truths, 0, round_index=0)
        assert report.auc == pytest.approx(0.5, abs=0.1)

    def test_history_rounds_strictly_increase(self):
        history = RoundHistory()
        history.append(MetricsReport(0, 0, 1.0, 1.0, 1.0, 1.0, 5, 0))
        history.append(MetricsReport(0, 1, 1.0, 1.0, 1.0, 1.0, 5, 0))
        with pytest.raises(ValueError):
            history.append(MetricsReport(0, 1, 1.0, 1.0, 1.0, 1.0, 5, 0))
        assert [r.round_index for r in history.for_label(0)] == [0, 1]

    def test_report_round_trip(self):
        report = MetricsReport(1, 2, 0.5, None, None, 0.75, 10, 5)
        assert MetricsReport.from_dict(report.to_dict()) == report

    def test_report_schema_has_no_rejected_metrics(self):
        report = MetricsReport(0, 0, None, None, None, None, 0, 0)
        fields = set(report.to_dict())
        assert fields.isdisjoint({"accuracy", "specificity", "map", "mean_average_precision"})
