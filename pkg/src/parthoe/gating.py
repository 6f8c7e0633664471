"""Reliability labels, precision-recall sweeps and the temporal confidence gate."""

import csv
import json
from collections import deque
from dataclasses import dataclass

import numpy as np

from .circular import circ_diff
from .errors import InvalidInputError, NoEstimateError

RELIABLE_DEG = 20.0
GATE_WINDOW = 5


@dataclass(frozen=True)
class ScoredPrediction:
    pred: float
    gt: float
    score: float
    frame: int = 0


@dataclass(frozen=True)
class PRPoint:
    threshold: float
    precision: float
    recall: float


def reliability_label(pred, gt, threshold_deg=RELIABLE_DEG):
    """True when the circular error is at most ``threshold_deg`` (array-friendly)."""
    out = np.asarray(circ_diff(pred, gt)) <= threshold_deg
    if out.ndim == 0:
        return bool(out)
    return out


def pr_curve_arrays(scores, reliable):
    """Precision-recall sweep over distinct scores, highest threshold first.

    At threshold ``t`` every item with ``score >= t`` is predicted reliable, so
    tied scores enter together.
    """
    scores = np.asarray(scores, dtype=float)
    reliable = np.asarray(reliable, dtype=bool)
    if scores.size == 0:
        raise InvalidInputError("no predictions to score")
    if scores.shape != reliable.shape:
        raise InvalidInputError("scores and labels differ in length")
    n_rel = int(reliable.sum())
    if n_rel == 0:
        raise InvalidInputError("no reliable predictions; recall is undefined")
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    tp = np.cumsum(reliable[order])
    # last position of each run of equal scores
    ends = np.flatnonzero(np.append(s[1:] != s[:-1], True))
    predicted = ends + 1
    return s[ends], tp[ends] / predicted, tp[ends] / n_rel


def pr_curve(items, threshold_deg=RELIABLE_DEG):
    """PR points for a list of :class:`ScoredPrediction`."""
    items = list(items)
    if not items:
        raise InvalidInputError("no predictions to score")
    scores = np.array([it.score for it in items], dtype=float)
    reliable = reliability_label([it.pred for it in items], [it.gt for it in items], threshold_deg)
    t, p, r = pr_curve_arrays(scores, np.atleast_1d(reliable))
    return [PRPoint(float(a), float(b), float(c)) for a, b, c in zip(t, p, r)]


def max_recall_at_full_precision(curve):
    """Largest recall over points with precision exactly 1, else 0."""
    best = 0.0
    for pt in curve:
        if pt.precision == 1.0 and pt.recall > best:
            best = pt.recall
    return best


def max_prob_score(dist):
    return np.max(np.asarray(dist), axis=-1)


def score_report(pred, gt, scores, score_kind, threshold_deg=RELIABLE_DEG):
    """PR curve plus the summary dict written next to it."""
    items = [ScoredPrediction(float(a), float(b), float(s), i) for i, (a, b, s) in enumerate(zip(pred, gt, scores))]
    curve = pr_curve(items, threshold_deg)
    summary = {
        "max_recall_at_p100": max_recall_at_full_precision(curve),
        "n": len(items),
        "score_kind": score_kind,
    }
    return curve, summary


def write_pr_csv(path, curve):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["threshold", "precision", "recall"])
        for pt in curve:
            w.writerow([repr(pt.threshold), repr(pt.precision), repr(pt.recall)])


def write_summary(path, summary):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")


def temporal_gate(history):
    """Orientation with the highest confidence in ``history``.

    ``history`` is a sequence of ``(orientation, confidence)`` pairs, oldest
    first; ties go to the most recent entry.
    """
    if len(history) == 0:
        raise NoEstimateError("temporal gate window is empty")
    best = None
    for theta, conf in history:
        if best is None or conf >= best[1]:
            best = (theta, conf)
    return best[0]


class TemporalGate:
    """Sliding window of the last ``k`` estimates feeding :func:`temporal_gate`."""

    def __init__(self, k=GATE_WINDOW):
        self.window = deque(maxlen=k)

    def push(self, theta, conf):
        self.window.append((theta, conf))
        return self.current()

    def current(self):
        return temporal_gate(self.window)

    def best_confidence(self):
        return max(c for _, c in self.window)
