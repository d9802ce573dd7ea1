"""
Localization and detection metrics.

Weighted confusion counts treat a heatmap value as the probability that the
pixel is forged:

    tp = sum(H * M)            fp = sum(H * (1 - M))
    tn = sum((1 - H) * (1 - M))  fn = sum((1 - H) * M)

For binary predictions these reduce to the ordinary integer counts.  Two
dataset aggregations are offered: ``v1`` averages per-image scores, ``v2``
scores the confusion summed over the dataset.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    AllSkipped,
    EmptyAccumulator,
    RangeError,
    ShapeMismatch,
    SingleClass,
    UnknownMetric,
)

SCORES = ("f1", "iou", "mcc", "precision", "tpr", "fpr")
OUTPUT_TYPES = ("heatmap", "mask", "detection")
LOCALIZATION = ("heatmap", "mask")


@dataclass(frozen=True)
class WeightedConfusion:
    tp: float = 0.0
    fp: float = 0.0
    tn: float = 0.0
    fn: float = 0.0

    def __add__(self, other: "WeightedConfusion") -> "WeightedConfusion":
        return WeightedConfusion(
            self.tp + other.tp, self.fp + other.fp, self.tn + other.tn, self.fn + other.fn
        )

    @property
    def total(self) -> float:
        return self.tp + self.fp + self.tn + self.fn


def _check_pair(H, M) -> tuple[np.ndarray, np.ndarray]:
    H = np.asarray(H, dtype=np.float64)
    M = np.asarray(M)
    if H.shape != M.shape:
        raise ShapeMismatch(f"prediction {H.shape} and mask {M.shape} differ in shape")
    if H.size and (not np.isfinite(H).all() or H.min() < 0 or H.max() > 1):
        raise RangeError("heatmap values must lie in [0, 1]")
    if M.size and not np.isin(M, (0, 1)).all():
        raise RangeError("mask values must be 0 or 1")
    return H, M.astype(np.float64)


def weighted_confusion(H, M) -> WeightedConfusion:
    H, M = _check_pair(H, M)
    tp = float(np.sum(H * M))
    fp = float(np.sum(H * (1 - M)))
    tn = float(np.sum((1 - H) * (1 - M)))
    fn = float(np.sum((1 - H) * M))
    return WeightedConfusion(tp, fp, tn, fn)


def detection_confusion(score: float, label: int) -> WeightedConfusion:
    """One image treated as a single pixel whose heatmap value is ``score``."""
    score = float(score)
    if not (0.0 <= score <= 1.0):
        raise RangeError(f"detection score {score} outside [0, 1]")
    if label not in (0, 1):
        raise RangeError(f"label must be 0 or 1, got {label}")
    if label:
        return WeightedConfusion(tp=score, fn=1.0 - score)
    return WeightedConfusion(fp=score, tn=1.0 - score)


def _ratio(num: float, den: float) -> float:
    return num / den if den != 0 else 0.0


def score(c: WeightedConfusion, metric: str) -> float:
    tp, fp, tn, fn = c.tp, c.fp, c.tn, c.fn
    if metric == "f1":
        return _ratio(2 * tp, 2 * tp + fn + fp)
    if metric == "iou":
        return _ratio(tp, tp + fp + fn)
    if metric == "precision":
        return _ratio(tp, tp + fp)
    if metric == "tpr":
        return _ratio(tp, tp + fn)
    if metric == "fpr":
        return _ratio(fp, fp + tn)
    if metric == "mcc":
        factors = (tp + fp, tp + fn, tn + fp, tn + fn)
        if any(f == 0 for f in factors):
            return 0.0
        return (tp * tn - fp * fn) / math.sqrt(math.prod(factors))
    raise UnknownMetric(metric)


def threshold_heatmap(H, t: float = 0.5) -> np.ndarray:
    return (np.asarray(H) >= t).astype(np.uint8)


# ---------------------------------------------------------------------------
# ROC


@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray


def _scores_labels(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel()
    if s.shape != y.shape:
        raise ShapeMismatch("scores and labels differ in length")
    if y.size and not np.isin(y, (0, 1)).all():
        raise RangeError("labels must be 0 or 1")
    return s, y.astype(bool)


def roc_curve(scores, labels) -> RocCurve:
    """ROC points for thresholds at every distinct score (predict positive if ``>=``)."""
    s, y = _scores_labels(scores, labels)
    pos = int(y.sum())
    neg = y.size - pos
    if pos == 0 or neg == 0:
        raise SingleClass("ROC is undefined unless both classes are present")
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    # last index of each run of equal scores
    ends = np.r_[np.nonzero(np.diff(s))[0], s.size - 1]
    tps = np.cumsum(y)[ends]
    fps = (ends + 1) - tps
    return RocCurve(
        fpr=np.r_[0.0, fps / neg],
        tpr=np.r_[0.0, tps / pos],
        thresholds=np.r_[np.inf, s[ends]],
    )


def auroc(scores, labels) -> float:
    curve = roc_curve(scores, labels)
    dx = np.diff(curve.fpr)
    return float(np.sum(dx * (curve.tpr[1:] + curve.tpr[:-1]) / 2))


def roc_auroc(scores, labels) -> tuple[RocCurve, float]:
    curve = roc_curve(scores, labels)
    dx = np.diff(curve.fpr)
    return curve, float(np.sum(dx * (curve.tpr[1:] + curve.tpr[:-1]) / 2))


def mauroc(per_image: Iterable[tuple[np.ndarray, np.ndarray]]) -> float:
    acc = MAurocMetric()
    for H, M in per_image:
        acc.update(H, M)
    if not acc.values:
        raise AllSkipped(f"all {acc.skipped} images have a single-class mask")
    return acc.compute()


# ---------------------------------------------------------------------------
# accumulators


class MetricAccumulator:
    """Streaming v1/v2 aggregation of a weighted confusion score."""

    def __init__(self, metric: str, mode: str):
        if metric not in SCORES:
            raise UnknownMetric(metric)
        if mode not in ("v1", "v2"):
            raise ValueError(f"mode must be 'v1' or 'v2', got {mode!r}")
        self.metric = metric
        self.mode = mode
        self.total = 0.0
        self.count = 0
        self.confusion = WeightedConfusion()

    def add_confusion(self, c: WeightedConfusion) -> "MetricAccumulator":
        if self.mode == "v1":
            self.total += score(c, self.metric)
        else:
            self.confusion = self.confusion + c
        self.count += 1
        return self

    def update(self, H, M) -> "MetricAccumulator":
        return self.add_confusion(weighted_confusion(H, M))

    def merge(self, other: "MetricAccumulator") -> "MetricAccumulator":
        if (other.metric, other.mode) != (self.metric, self.mode):
            raise ValueError("cannot merge accumulators of different metrics")
        out = MetricAccumulator(self.metric, self.mode)
        out.total = self.total + other.total
        out.count = self.count + other.count
        out.confusion = self.confusion + other.confusion
        return out

    def compute(self) -> float:
        if self.count == 0:
            raise EmptyAccumulator(f"{self.metric} ({self.mode}) has no updates")
        if self.mode == "v1":
            return self.total / self.count
        return score(self.confusion, self.metric)


def accumulate(acc: MetricAccumulator, H, M) -> MetricAccumulator:
    return acc.update(H, M)


def compute(acc: MetricAccumulator) -> float:
    return acc.compute()


# ---------------------------------------------------------------------------
# registry metrics; each consumes (prediction, target) pairs for one output type.
# Localization pairs are (2-D map, 2-D binary mask); detection pairs are
# (score, label).


class Metric:
    name: str = ""
    output_types: tuple[str, ...] = OUTPUT_TYPES
    scalar = True

    def supports(self, output_type: str) -> bool:
        return output_type in self.output_types

    def update(self, pred, target) -> None:
        raise NotImplementedError

    def compute(self):
        raise NotImplementedError

    def merge(self, other: "Metric") -> "Metric":
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.name!r})"


def _as_confusion(pred, target, weighted: bool) -> WeightedConfusion:
    if np.ndim(pred) == 0:
        p = float(pred)
        return detection_confusion(p if weighted else float(p >= 0.5), int(target))
    if not weighted:
        pred = threshold_heatmap(pred)
    return weighted_confusion(pred, target)


class ConfusionMetric(Metric):
    """Dataset-level score of accumulated confusion counts.

    Unweighted variants threshold the prediction at 0.5 first; weighted ones
    use the prediction values directly.
    """

    def __init__(self, name: str, score_name: str, weighted: bool, mode: str = "v2"):
        self.name = name
        self.weighted = weighted
        self.acc = MetricAccumulator(score_name, mode)
        if mode == "v1":
            self.output_types = LOCALIZATION

    def update(self, pred, target) -> None:
        self.acc.add_confusion(_as_confusion(pred, target, self.weighted))

    def compute(self) -> float:
        return self.acc.compute()

    def merge(self, other: "ConfusionMetric") -> "ConfusionMetric":
        out = ConfusionMetric(self.name, self.acc.metric, self.weighted, self.acc.mode)
        out.acc = self.acc.merge(other.acc)
        return out


class _ScoreCollector(Metric):
    def __init__(self, name: str):
        self.name = name
        self.scores: list[np.ndarray] = []
        self.labels: list[np.ndarray] = []

    def update(self, pred, target) -> None:
        s, y = _scores_labels(np.atleast_1d(pred), np.atleast_1d(target))
        self.scores.append(s)
        self.labels.append(y)

    def _all(self) -> tuple[np.ndarray, np.ndarray]:
        if not self.scores:
            raise EmptyAccumulator(f"{self.name} has no updates")
        return np.concatenate(self.scores), np.concatenate(self.labels)

    def merge(self, other: "_ScoreCollector") -> "_ScoreCollector":
        out = type(self)(self.name)
        out.scores = self.scores + other.scores
        out.labels = self.labels + other.labels
        return out


class AurocMetric(_ScoreCollector):
    def compute(self) -> float:
        return auroc(*self._all())


class RocMetric(_ScoreCollector):
    scalar = False

    def compute(self) -> RocCurve:
        return roc_curve(*self._all())


class MAurocMetric(Metric):
    """Mean of per-image AUROCs; single-class images are skipped and counted."""

    output_types = LOCALIZATION

    def __init__(self, name: str = "mauroc"):
        self.name = name
        self.values: list[float] = []
        self.skipped = 0

    def update(self, pred, target) -> None:
        try:
            self.values.append(auroc(pred, target))
        except SingleClass:
            self.skipped += 1

    def compute(self) -> float:
        if not self.values:
            if self.skipped:
                raise AllSkipped(f"all {self.skipped} images have a single-class mask")
            raise EmptyAccumulator("mauroc has no updates")
        return float(np.mean(self.values))

    def merge(self, other: "MAurocMetric") -> "MAurocMetric":
        out = MAurocMetric(self.name)
        out.values = self.values + other.values
        out.skipped = self.skipped + other.skipped
        return out


def _factories():
    reg = {name: (lambda n=name: ConfusionMetric(n, n, weighted=False)) for name in SCORES}
    reg["auroc"] = lambda: AurocMetric("auroc")
    reg["roc"] = lambda: RocMetric("roc")
    reg["mauroc"] = lambda: MAurocMetric("mauroc")
    for base in ("f1", "iou", "mcc"):
        for mode in ("v1", "v2"):
            name = f"{base}_weighted_{mode}"
            reg[name] = lambda n=name, b=base, m=mode: ConfusionMetric(n, b, weighted=True, mode=m)
    return reg


METRIC_REGISTRY = _factories()


def available_metrics() -> list[str]:
    return list(METRIC_REGISTRY)


def load_metrics(names: Sequence[str], output_type: str | None = None) -> list[Metric]:
    """Fresh metric instances, in request order.

    With ``output_type`` set, metrics that do not apply to it (e.g. a v1
    aggregation for detection scores) raise :class:`UnknownMetric`.
    """
    out = []
    for name in names:
        if name not in METRIC_REGISTRY:
            raise UnknownMetric(f"unknown metric {name!r}")
        metric = METRIC_REGISTRY[name]()
        if output_type is not None and not metric.supports(output_type):
            raise UnknownMetric(f"metric {name!r} is not defined for {output_type} outputs")
        out.append(metric)
    return out
