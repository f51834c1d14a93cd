"""Point-adjusted precision/recall/F1 for segment-labelled anomalies.

Ground truth arrives as whole anomalous segments. Under point adjustment a
segment counts as found if any single point inside it is flagged, so before
counting we promote every point of each detected segment to 1. Counts are then
plain pointwise TP/FP/FN on the adjusted predictions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AnomalySegment:
    """Closed index range [start, end] of anomalous points."""

    start: int
    end: int

    def __post_init__(self):
        if self.start < 0 or self.end < self.start:
            raise ValueError(f"bad segment [{self.start}, {self.end}]")

    @property
    def length(self) -> int:
        return self.end - self.start + 1


@dataclass
class EvalReport:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float
    channel: str = ""


def f1_score(precision: float, recall: float) -> float:
    """Harmonic mean 2PR/(P+R), defined as 0 when both rates are 0."""
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def f1_from_counts(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    """(precision, recall, f1) with every 0/0 mapped to 0."""
    precision = tp / (tp + fp) if tp + fp > 0 else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    return precision, recall, f1_score(precision, recall)


def _check_binary(arr: np.ndarray, name: str) -> np.ndarray:
    arr = np.asarray(arr)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    if not np.isin(arr, (0, 1)).all():
        raise ValueError(f"{name} must contain only 0/1")
    return arr.astype(np.int64)


def segments_from_labels(labels: np.ndarray) -> list[AnomalySegment]:
    """Maximal runs of 1s in a binary label vector."""
    labels = _check_binary(labels, "labels")
    padded = np.concatenate([[0], labels, [0]])
    d = np.diff(padded)
    starts = np.flatnonzero(d == 1)
    ends = np.flatnonzero(d == -1) - 1
    return [AnomalySegment(int(s), int(e)) for s, e in zip(starts, ends)]


def labels_from_segments(segments: list[AnomalySegment], length: int) -> np.ndarray:
    labels = np.zeros(length, dtype=np.int64)
    for seg in segments:
        if seg.end >= length:
            raise ValueError(f"segment [{seg.start}, {seg.end}] exceeds length {length}")
        labels[seg.start : seg.end + 1] = 1
    return labels


def point_adjust(predictions: np.ndarray, segments: list[AnomalySegment]) -> np.ndarray:
    """Promote every point of each hit segment to 1; returns a new array."""
    predictions = _check_binary(predictions, "predictions")
    adjusted = predictions.copy()
    for seg in segments:
        if seg.end >= predictions.size:
            raise ValueError(
                f"segment [{seg.start}, {seg.end}] exceeds prediction length "
                f"{predictions.size}"
            )
        if predictions[seg.start : seg.end + 1].any():
            adjusted[seg.start : seg.end + 1] = 1
    return adjusted


def evaluate_predictions(
    predictions: np.ndarray, labels: np.ndarray, channel: str = ""
) -> EvalReport:
    """Pointwise counts of already-adjusted predictions against labels."""
    predictions = _check_binary(predictions, "predictions")
    labels = _check_binary(labels, "labels")
    if predictions.shape != labels.shape:
        raise ValueError(
            f"predictions/labels length mismatch: {predictions.size} vs {labels.size}"
        )
    tp = int(np.sum((predictions == 1) & (labels == 1)))
    fp = int(np.sum((predictions == 1) & (labels == 0)))
    fn = int(np.sum((predictions == 0) & (labels == 1)))
    precision, recall, f1 = f1_from_counts(tp, fp, fn)
    return EvalReport(tp, fp, fn, precision, recall, f1, channel=channel)


def point_adjusted_report(
    predictions: np.ndarray, labels: np.ndarray, channel: str = ""
) -> EvalReport:
    """Adjust raw predictions against the label segments, then count."""
    segments = segments_from_labels(labels)
    adjusted = point_adjust(predictions, segments)
    return evaluate_predictions(adjusted, labels, channel=channel)


def aggregate(reports: list[EvalReport], method: str = "micro") -> EvalReport:
    """Combine per-channel reports.

    micro sums the counts and recomputes the metrics; macro averages the
    per-channel metrics unweighted (F1 is the mean of F1s, not the harmonic
    mean of the averaged precision/recall). Counts are summed either way.
    """
    if not reports:
        raise ValueError("aggregate needs at least one report")
    tp = sum(r.tp for r in reports)
    fp = sum(r.fp for r in reports)
    fn = sum(r.fn for r in reports)
    if method == "micro":
        precision, recall, f1 = f1_from_counts(tp, fp, fn)
    elif method == "macro":
        precision = float(np.mean([r.precision for r in reports]))
        recall = float(np.mean([r.recall for r in reports]))
        f1 = float(np.mean([r.f1 for r in reports]))
    else:
        raise ValueError(f"unknown aggregation method {method!r}")
    return EvalReport(tp, fp, fn, precision, recall, f1, channel=f"all({method})")
