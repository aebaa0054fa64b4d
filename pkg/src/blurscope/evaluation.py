"""Train/validation split, confusion matrix and the three comparison metrics.

Blurry is the positive class throughout.
"""
from __future__ import annotations

import enum
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import _jsonio
from .cnn import predict
from .errors import (
    EmptyDataset,
    EmptyInput,
    EmptyMatrix,
    LengthMismatch,
    NoNegatives,
    NoPositives,
    SingleClassDataset,
)
from .imageio import Label, LabeledDataset, LabeledSample, load_image
from .laplacian import LAPLACIAN_4, classify_laplacian

__all__ = [
    "ConfusionMatrix",
    "MetricsReport",
    "Method",
    "Split",
    "split_dataset",
    "build_confusion",
    "sensitivity",
    "specificity",
    "accuracy",
    "evaluate",
    "laplacian_classifier",
    "cnn_classifier",
    "oracle_classifier",
    "format_report",
    "format_comparison",
]

Classifier = Callable[[LabeledSample], Label]


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError(f"confusion counts must be nonnegative: {self}")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @property
    def positives(self) -> int:
        return self.tp + self.fn

    @property
    def negatives(self) -> int:
        return self.tn + self.fp

    def flipped(self) -> ConfusionMatrix:
        """The same table with Sharp taken as the positive class."""
        return ConfusionMatrix(tp=self.tn, fp=self.fn, fn=self.fp, tn=self.tp)


def build_confusion(predictions: Sequence[Label], truths: Sequence[Label]) -> ConfusionMatrix:
    if len(predictions) != len(truths):
        raise LengthMismatch(f"{len(predictions)} predictions for {len(truths)} truths")
    if not predictions:
        raise EmptyInput("no predictions to tabulate")
    tp = fp = fn = tn = 0
    for pred, truth in zip(predictions, truths):
        if pred is Label.BLURRY:
            if truth is Label.BLURRY:
                tp += 1
            else:
                fp += 1
        elif truth is Label.BLURRY:
            fn += 1
        else:
            tn += 1
    return ConfusionMatrix(tp, fp, fn, tn)


def sensitivity(cm: ConfusionMatrix) -> float:
    """True positive rate: blurry images recognised as blurry."""
    if cm.positives == 0:
        raise NoPositives("sensitivity is undefined without blurry samples")
    return cm.tp / cm.positives


def specificity(cm: ConfusionMatrix) -> float:
    """True negative rate: sharp images recognised as sharp."""
    if cm.negatives == 0:
        raise NoNegatives("specificity is undefined without sharp samples")
    return cm.tn / cm.negatives


def accuracy(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise EmptyMatrix("accuracy of an empty confusion matrix")
    return (cm.tp + cm.tn) / cm.total


class Method(str, enum.Enum):
    LAPLACIAN = "laplacian"
    CNN = "cnn"
    ORACLE = "oracle"


@dataclass(frozen=True)
class MetricsReport:
    method: Method
    dataset_id: str
    confusion: ConfusionMatrix
    sensitivity: float
    specificity: float
    accuracy: float

    @classmethod
    def from_confusion(cls, method, dataset_id: str, cm: ConfusionMatrix) -> MetricsReport:
        return cls(Method(method), dataset_id, cm, sensitivity(cm), specificity(cm), accuracy(cm))

    def is_consistent(self) -> bool:
        cm = self.confusion
        return (
            self.sensitivity == sensitivity(cm)
            and self.specificity == specificity(cm)
            and self.accuracy == accuracy(cm)
        )

    def to_dict(self) -> dict:
        cm = self.confusion
        return {
            "method": self.method.value,
            "dataset_id": self.dataset_id,
            "tp": cm.tp,
            "fp": cm.fp,
            "fn": cm.fn,
            "tn": cm.tn,
            "sensitivity": float(self.sensitivity),
            "specificity": float(self.specificity),
            "accuracy": float(self.accuracy),
        }

    def to_json(self) -> str:
        return _jsonio.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> MetricsReport:
        d = json.loads(text)
        cm = ConfusionMatrix(d["tp"], d["fp"], d["fn"], d["tn"])
        return cls(Method(d["method"]), d["dataset_id"], cm,
                   float(d["sensitivity"]), float(d["specificity"]), float(d["accuracy"]))

    def save(self, path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")


@dataclass(frozen=True)
class Split:
    train: LabeledDataset
    validation: LabeledDataset


def split_dataset(
    dataset: LabeledDataset,
    train_fraction: float = 0.8,
    seed: int = 0,
    stratified: bool = False,
) -> Split:
    """Shuffle with a seeded permutation and cut at ``floor(n * train_fraction)``.

    With ``stratified=True`` each class is shuffled and cut separately, and the
    two parts are merged back in original dataset order.
    """
    n = len(dataset)
    if n == 0:
        raise EmptyDataset("cannot split an empty dataset")
    if not 0 < train_fraction <= 1:
        raise ValueError(f"train fraction must lie in (0, 1], got {train_fraction}")
    rng = np.random.default_rng(seed)
    if not stratified:
        order = rng.permutation(n)
        cut = math.floor(n * train_fraction)
        train_idx, val_idx = order[:cut], order[cut:]
    else:
        train_idx, val_idx = [], []
        for label in (Label.BLURRY, Label.SHARP):
            idx = np.array([i for i, s in enumerate(dataset) if s.label is label], dtype=np.intp)
            idx = idx[rng.permutation(len(idx))]
            cut = math.floor(len(idx) * train_fraction)
            train_idx.extend(idx[:cut])
            val_idx.extend(idx[cut:])
        train_idx, val_idx = sorted(train_idx), sorted(val_idx)
    return Split(
        LabeledDataset(tuple(dataset[i] for i in train_idx)),
        LabeledDataset(tuple(dataset[i] for i in val_idx)),
    )


def evaluate(
    classifier: Classifier,
    dataset: LabeledDataset,
    method: Method | str = Method.LAPLACIAN,
    dataset_id: str = "",
    workers: int = 1,
) -> MetricsReport:
    """Classify every sample and summarise the verdicts.

    ``classifier`` receives a :class:`LabeledSample` and returns a label; use
    :func:`laplacian_classifier` or :func:`cnn_classifier` to wrap a model.
    """
    if dataset.count(Label.BLURRY) == 0 or dataset.count(Label.SHARP) == 0:
        raise SingleClassDataset("evaluation needs both blurry and sharp samples")
    samples = list(dataset)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            predictions = list(pool.map(classifier, samples))
    else:
        predictions = [classifier(s) for s in samples]
    cm = build_confusion(predictions, [s.label for s in samples])
    return MetricsReport.from_confusion(method, dataset_id, cm)


def laplacian_classifier(model, kernel=LAPLACIAN_4) -> Classifier:
    return lambda sample: classify_laplacian(load_image(sample.path), model, kernel)


def cnn_classifier(model) -> Classifier:
    return lambda sample: predict(model, load_image(sample.path))[1]


def oracle_classifier(sample: LabeledSample) -> Label:
    return sample.label


# ---------------------------------------------------------------------------
# human-readable output

def format_report(report: MetricsReport) -> str:
    """Confusion table in the verdict-by-real-condition layout plus the metrics."""
    cm = report.confusion
    name = report.method.value
    w = max(len(name) + 8, 14)
    lines = [
        f"method: {name}   dataset: {report.dataset_id or '-'}",
        f"{'':{w}}{'Real condition':>24}",
        f"{'':{w}}{'Is blurry':>12}{'Not blurry':>12}",
        f"{name} verdict",
        f"{'  Is blurry':<{w}}{cm.tp:>12d}{cm.fp:>12d}",
        f"{'  Not blurry':<{w}}{cm.fn:>12d}{cm.tn:>12d}",
        f"sensitivity {report.sensitivity:.3f}",
        f"specificity {report.specificity:.3f}",
        f"accuracy    {report.accuracy:.3f}",
    ]
    return "\n".join(lines)


def format_comparison(first: MetricsReport, second: MetricsReport) -> str:
    """Both report blocks followed by one block of signed deltas (second minus first)."""
    delta = [
        "delta (%s - %s)" % (second.method.value, first.method.value),
        f"sensitivity {second.sensitivity - first.sensitivity:+.3f}",
        f"specificity {second.specificity - first.specificity:+.3f}",
        f"accuracy    {second.accuracy - first.accuracy:+.3f}",
    ]
    return "\n\n".join([format_report(first), format_report(second), "\n".join(delta)])
