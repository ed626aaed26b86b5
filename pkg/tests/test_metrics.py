import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ufnd.errors import ArgumentError
from ufnd.metrics import Confusion, compute_metrics, confusion


def brute_metrics(preds, targets):
    """Independent tally: loop over pairs, then textbook formulas."""
    tp = sum(1 for p, t in zip(preds, targets) if p == 1 and t == 1)
    fp = sum(1 for p, t in zip(preds, targets) if p == 1 and t == 0)
    fn = sum(1 for p, t in zip(preds, targets) if p == 0 and t == 1)
    tn = sum(1 for p, t in zip(preds, targets) if p == 0 and t == 0)
    acc = (tp + tn) / len(preds)
    prec = tp / (tp + fp) if tp + fp else 0.0
    rec = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
    return acc, prec, rec, f1


class TestConfusion:
    def test_hand_case(self):
        c = confusion([1, 1, 0, 0, 1], [1, 0, 0, 1, 1])
        assert (c.tp, c.fp, c.fn, c.tn) == (2, 1, 1, 1)
        assert c.total == 5

    def test_length_mismatch(self):
        with pytest.raises(ArgumentError):
            confusion([1, 0], [1])

    def test_empty(self):
        with pytest.raises(ArgumentError):
            confusion([], [])

    def test_non_binary(self):
        with pytest.raises(ArgumentError):
            confusion([2, 0], [1, 0])


class TestComputeMetrics:
    def test_reference_case(self):
        # 20 samples: tp 6, fp 2, fn 2, tn 10
        m = compute_metrics(Confusion(tp=6, fp=2, fn=2, tn=10))
        assert m.rounded() == (0.8, 0.75, 0.75, 0.75)
        assert m.degenerate == ()

    def test_perfect(self):
        m = compute_metrics(Confusion(tp=5, fp=0, fn=0, tn=5))
        assert m.rounded() == (1.0, 1.0, 1.0, 1.0)

    def test_all_negative_predictions_degenerate_precision(self):
        m = compute_metrics(Confusion(tp=0, fp=0, fn=3, tn=7))
        assert m.precision == 0.0
        assert "precision" in m.degenerate and "f1" in m.degenerate

    def test_no_positive_targets_degenerate_recall(self):
        m = compute_metrics(Confusion(tp=0, fp=2, fn=0, tn=8))
        assert m.recall == 0.0
        assert "recall" in m.degenerate

    def test_empty_confusion(self):
        with pytest.raises(ArgumentError):
            compute_metrics(Confusion(0, 0, 0, 0))

    @settings(max_examples=100, deadline=None)
    @given(pairs=st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)),
                          min_size=1, max_size=60))
    def test_matches_brute_force(self, pairs):
        preds = [p for p, _ in pairs]
        targets = [t for _, t in pairs]
        m = compute_metrics(confusion(preds, targets))
        acc, prec, rec, f1 = brute_metrics(preds, targets)
        assert abs(m.accuracy - acc) < 1e-12
        assert abs(m.precision - prec) < 1e-12
        assert abs(m.recall - rec) < 1e-12
        assert abs(m.f1 - f1) < 1e-12

    @settings(max_examples=50, deadline=None)
    @given(tp=st.integers(0, 20), fp=st.integers(0, 20),
           fn=st.integers(0, 20), tn=st.integers(0, 20))
    def test_bounds_property(self, tp, fp, fn, tn):
        if tp + fp + fn + tn == 0:
            return
        m = compute_metrics(Confusion(tp, fp, fn, tn))
        for v in (m.accuracy, m.precision, m.recall, m.f1):
            assert 0.0 <= v <= 1.0

    def test_label_flip_swaps_nothing_for_accuracy(self):
        rng = np.random.default_rng(0)
        preds = rng.integers(0, 2, 50)
        targets = rng.integers(0, 2, 50)
        a = compute_metrics(confusion(preds, targets)).accuracy
        b = compute_metrics(confusion(1 - preds, 1 - targets)).accuracy
        assert a == b
