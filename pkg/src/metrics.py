"""
Segmentation evaluation: per-class IoU and F1 over pooled pixel counts, the
class-weighted F-score and action accuracy.
"""

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterable, Optional, Sequence

import numpy as np
import pandas as pd
from sklearn.metrics import confusion_matrix
from tqdm import tqdm

from .errors import DataError, LabelRangeError, ShapeError
from .sequence import AffordanceTaxonomy, SequenceBatch

logger = logging.getLogger(__name__)

# Dominant affordances carry fixed weights; the other six share the rest equally.
AFFORDANCE_WEIGHTS: Dict[str, float] = {
    name: {'grasp': 0.2, 'lift': 0.2, 'push': 0.1}.get(name, 1.0 / 12.0)
    for name in AffordanceTaxonomy.affordances()
}


@dataclass
class ConfusionCounts:
    """Per-class TP/FP/FN pixel counts; index 0 (background) is never scored"""
    num_classes: int = AffordanceTaxonomy.num_classes()
    tp: np.ndarray = None
    fp: np.ndarray = None
    fn: np.ndarray = None
    action_correct: int = 0
    action_total: int = 0

    def __post_init__(self):
        for name in ('tp', 'fp', 'fn'):
            if getattr(self, name) is None:
                setattr(self, name, np.zeros(self.num_classes, dtype=np.int64))

    def accumulate(self, pred: np.ndarray, gt: np.ndarray) -> "ConfusionCounts":
        pred = np.asarray(pred)
        gt = np.asarray(gt)
        if pred.shape != gt.shape:
            raise ShapeError(f"prediction extents {pred.shape} differ from ground truth {gt.shape}")
        for what, labels in (("prediction", pred), ("ground truth", gt)):
            if labels.size and (labels.min() < 0 or labels.max() >= self.num_classes):
                raise LabelRangeError(f"{what} labels outside [0, {self.num_classes})")
        matrix = confusion_matrix(gt.ravel(), pred.ravel(), labels=np.arange(self.num_classes))
        hits = np.diag(matrix)
        self.tp += hits
        self.fp += matrix.sum(axis=0) - hits
        self.fn += matrix.sum(axis=1) - hits
        self.tp[0] = self.fp[0] = self.fn[0] = 0
        return self

    def record_action(self, predicted: int, target: int):
        self.action_total += 1
        self.action_correct += int(predicted == target)

    def merge(self, other: "ConfusionCounts") -> "ConfusionCounts":
        """Sum of two partial counts"""
        if other.num_classes != self.num_classes:
            raise ShapeError(f"cannot merge counts over {self.num_classes} and {other.num_classes} classes")
        return ConfusionCounts(self.num_classes, self.tp + other.tp, self.fp + other.fp, self.fn + other.fn,
                               self.action_correct + other.action_correct,
                               self.action_total + other.action_total)


def accumulate(counts: ConfusionCounts, pred: np.ndarray, gt: np.ndarray) -> ConfusionCounts:
    return counts.accumulate(pred, gt)


def iou(counts: ConfusionCounts, label: int) -> float:
    tp, fp, fn = int(counts.tp[label]), int(counts.fp[label]), int(counts.fn[label])
    if tp + fp + fn == 0:
        return 1.0
    return tp / (tp + fp + fn)


def f_score(counts: ConfusionCounts, label: int) -> float:
    tp, fp, fn = int(counts.tp[label]), int(counts.fp[label]), int(counts.fn[label])
    if tp + fp + fn == 0:
        return 1.0
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2 * precision * recall / (precision + recall)


def weighted_f(per_class_f: Sequence[float]) -> float:
    """Class-weighted F1 over the nine affordances in taxonomy order"""
    names = AffordanceTaxonomy.affordances()
    if len(per_class_f) != len(names):
        raise ValueError(f"expected {len(names)} per-class scores, got {len(per_class_f)}")
    return math.fsum(AFFORDANCE_WEIGHTS[name] * float(value) for name, value in zip(names, per_class_f))


@dataclass
class MetricsReport:
    per_class_iou: Dict[str, float]
    per_class_f1: Dict[str, float]
    mean_iou: float
    mean_f1: float
    weighted_f1: float
    num_sequences: int
    action_accuracy: Optional[float] = None
    mode: str = "video"
    extra: Dict[str, float] = field(default_factory=dict)

    @classmethod
    def from_counts(cls, counts: ConfusionCounts, num_sequences: int, mode: str = "video") -> "MetricsReport":
        names = AffordanceTaxonomy.affordances()
        labels = range(1, counts.num_classes)
        ious = {name: iou(counts, label) for name, label in zip(names, labels)}
        f1s = {name: f_score(counts, label) for name, label in zip(names, labels)}
        accuracy = counts.action_correct / counts.action_total if counts.action_total else None
        return cls(
            per_class_iou=ious,
            per_class_f1=f1s,
            mean_iou=float(np.mean(list(ious.values()))),
            mean_f1=float(np.mean(list(f1s.values()))),
            weighted_f1=weighted_f([f1s[name] for name in names]),
            num_sequences=num_sequences,
            action_accuracy=accuracy,
            mode=mode,
        )

    def to_table(self) -> pd.DataFrame:
        """Per-class rows plus the aggregates"""
        df = pd.DataFrame({'IoU': self.per_class_iou, 'F1': self.per_class_f1})
        df.loc['mean'] = [self.mean_iou, self.mean_f1]
        df['F1_weighted'] = np.nan
        df.loc['mean', 'F1_weighted'] = self.weighted_f1
        df.index.name = 'affordance'
        return df

    def format_table(self) -> str:
        lines = [f"Mode: {self.mode}   sequences: {self.num_sequences}"]
        lines.append(self.to_table().to_string(float_format=lambda v: f"{v:.3f}", na_rep=""))
        if self.action_accuracy is not None:
            lines.append(f"Action accuracy: {self.action_accuracy:.3f}")
        return "\n".join(lines)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "MetricsReport":
        return cls(**json.loads(text))


def evaluate(predictor, batches: Iterable[SequenceBatch], mode: str = "video",
             confidence_threshold: float = 0.0, progress: bool = False) -> MetricsReport:
    """Run `predictor.predict` on every sequence and pool the counts"""
    counts: Optional[ConfusionCounts] = None
    seen = 0
    for batch in tqdm(batches, desc=f"Evaluating ({mode})", disable=not progress):
        prediction = predictor.predict(batch, mode, confidence_threshold)
        if counts is None:
            num_classes = getattr(getattr(predictor, 'config', None), 'seg_channels',
                                  AffordanceTaxonomy.num_classes())
            counts = ConfusionCounts(num_classes)
        counts.accumulate(prediction.labels, batch.mask)
        counts.record_action(prediction.action, batch.action)
        seen += 1
    if counts is None:
        raise DataError("cannot evaluate on an empty dataset")
    report = MetricsReport.from_counts(counts, seen, mode)
    logger.info("Evaluated %d sequences (%s): mean IoU %.3f, weighted F1 %.3f",
                seen, mode, report.mean_iou, report.weighted_f1)
    return report
