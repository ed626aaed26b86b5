"""Confusion-matrix accounting and the four reported metrics.

Positive class = fake = label 1 throughout; every report header states
the convention.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError

POSITIVE_CLASS_NOTE = "positive class = fake (label 1)"


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class Metrics:
    accuracy: float
    precision: float
    recall: float
    f1: float
    degenerate: tuple[str, ...] = ()

    def rounded(self, digits: int = 4) -> tuple[float, float, float, float]:
        return tuple(round(v, digits) for v in
                     (self.accuracy, self.precision, self.recall, self.f1))


def confusion(predictions, targets) -> Confusion:
    preds = np.asarray(predictions)
    targs = np.asarray(targets)
    if preds.shape != targs.shape or preds.size == 0:
        raise ArgumentError(
            f"predictions and targets must have equal nonzero length, got "
            f"{preds.shape} vs {targs.shape}")
    for arr, what in ((preds, "predictions"), (targs, "targets")):
        if not np.isin(arr, (0, 1)).all():
            raise ArgumentError(f"{what} must be binary labels")
    return Confusion(
        tp=int(np.sum((preds == 1) & (targs == 1))),
        fp=int(np.sum((preds == 1) & (targs == 0))),
        fn=int(np.sum((preds == 0) & (targs == 1))),
        tn=int(np.sum((preds == 0) & (targs == 0))))


def compute_metrics(c: Confusion) -> Metrics:
    """Accuracy, precision, recall, F1; zero denominators yield 0 and a
    degenerate flag."""
    if c.total < 1:
        raise ArgumentError("compute_metrics requires at least one sample")
    degenerate = []
    accuracy = (c.tp + c.tn) / c.total
    if c.tp + c.fp > 0:
        precision = c.tp / (c.tp + c.fp)
    else:
        precision = 0.0
        degenerate.append("precision")
    if c.tp + c.fn > 0:
        recall = c.tp / (c.tp + c.fn)
    else:
        recall = 0.0
        degenerate.append("recall")
    if precision + recall > 0:
        f1 = 2.0 * precision * recall / (precision + recall)
    else:
        f1 = 0.0
        degenerate.append("f1")
    return Metrics(accuracy=accuracy, precision=precision, recall=recall,
                   f1=f1, degenerate=tuple(degenerate))
