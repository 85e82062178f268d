"""Per-label evaluation metrics and per-round history.

Precision, recall, F1 and AUC only. Undefined cases (empty denominators,
single-class AUC input) are reported as ``None`` rather than silently 0;
the single exception is the conventional F1 = 0 when precision and recall
are both defined and both zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass
class MetricsReport:
    label_index: int
    round_index: int
    precision: float | None
    recall: float | None
    f1: float | None
    auc: float | None
    correct_count: int
    incorrect_count: int

    def to_dict(self) -> dict:
        return {
            "label_index": self.label_index,
            "round_index": self.round_index,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "auc": self.auc,
            "correct_count": self.correct_count,
            "incorrect_count": self.incorrect_count,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsReport":
        return cls(**d)


@dataclass
class RoundHistory:
    """Per-round report sequence for each label; round indices strictly increase."""

    reports: dict[int, list[MetricsReport]] = field(default_factory=dict)

    def append(self, report: MetricsReport) -> None:
        rows = self.reports.setdefault(report.label_index, [])
        if rows and report.round_index <= rows[-1].round_index:
            raise ValueError(
                f"round {report.round_index} does not advance past {rows[-1].round_index}"
            )
        rows.append(report)

    def for_label(self, label_index: int) -> list[MetricsReport]:
        return list(self.reports.get(label_index, []))


def confusion(probabilities: np.ndarray, truths: np.ndarray, label_index: int,
              threshold: float = 0.5) -> ConfusionCounts:
    """Binarize one label's probabilities at ``threshold`` and count outcomes."""
    probabilities = np.asarray(probabilities, dtype=float)
    truths = np.asarray(truths)
    if probabilities.shape[0] != truths.shape[0]:
        raise ValueError(
            f"got {probabilities.shape[0]} predictions for {truths.shape[0]} truths"
        )
    pred = probabilities[:, label_index] >= threshold
    truth = truths[:, label_index] == 1
    return ConfusionCounts(
        tp=int(np.sum(pred & truth)),
        fp=int(np.sum(pred & ~truth)),
        tn=int(np.sum(~pred & ~truth)),
        fn=int(np.sum(~pred & truth)),
    )


def precision(c: ConfusionCounts) -> float | None:
    if c.tp + c.fp == 0:
        return None
    return c.tp / (c.tp + c.fp)


def recall(c: ConfusionCounts) -> float | None:
    if c.tp + c.fn == 0:
        return None
    return c.tp / (c.tp + c.fn)


def f1(prec: float | None, rec: float | None) -> float | None:
    """Harmonic mean of precision and recall.

    Undefined when either input is undefined; 0 by convention when both are
    defined and both zero.
    """
    if prec is None or rec is None:
        return None
    if prec + rec == 0:
        return 0.0
    return 2 * prec * rec / (prec + rec)


def auc(scores, labels) -> float | None:
    """Probability that a random positive outscores a random negative.

    Pair-counting form of the ROC integral; ties count one half. Returns
    None when the labels are single-class.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must have the same length")
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    if len(pos) == 0 or len(neg) == 0:
        return None
    # rank-sum equivalent of counting (win + tie/2) over all pos x neg pairs
    order = np.argsort(np.concatenate([pos, neg]), kind="mergesort")
    ranks = np.empty(len(order), dtype=float)
    combined = np.concatenate([pos, neg])[order]
    i = 0
    while i < len(combined):
        j = i
        while j + 1 < len(combined) and combined[j + 1] == combined[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2 + 1  # average rank for the tie block
        i = j + 1
    pos_rank_sum = ranks[: len(pos)].sum()
    wins = pos_rank_sum - len(pos) * (len(pos) + 1) / 2
    return float(wins / (len(pos) * len(neg)))


def per_round_report(model, manifest, label_index: int, round_index: int,
                     threshold: float = 0.5, split: str = "test") -> MetricsReport:
    """Evaluate a model checkpoint on the held-out split for one label."""
    from .models import predict_dataset

    probs, truths = predict_dataset(model, manifest, split=split)
    return report_for_label(probs, truths, label_index, round_index, threshold)


def report_for_label(probabilities: np.ndarray, truths: np.ndarray, label_index: int,
                     round_index: int, threshold: float = 0.5) -> MetricsReport:
    """Bundle the four metrics plus correct/incorrect prediction counts."""
    probabilities = np.asarray(probabilities, dtype=float)
    truths = np.asarray(truths)
    c = confusion(probabilities, truths, label_index, threshold)
    prec = precision(c)
    rec = recall(c)
    return MetricsReport(
        label_index=label_index,
        round_index=round_index,
        precision=prec,
        recall=rec,
        f1=f1(prec, rec),
        auc=auc(probabilities[:, label_index], truths[:, label_index]),
        correct_count=c.tp + c.tn,
        incorrect_count=c.fp + c.fn,
    )
