"""Confusion-matrix metrics: accuracy, macro-F1, per-class precision,
sensitivity and specificity (one-vs-rest)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    sensitivity: float
    specificity: float
    f1: float
    # names of metrics whose denominator was 0; their value is reported as 0
    undefined: tuple[str, ...] = ()


@dataclass(frozen=True)
class EvaluationReport:
    confusion: np.ndarray  # Z x Z counts, rows = true, cols = predicted
    accuracy: float
    macro_f1: float
    macro_precision: float
    macro_sensitivity: float
    macro_specificity: float
    per_class: tuple[ClassMetrics, ...]

    def to_dict(self) -> dict:
        return {
            "confusion": self.confusion.tolist(),
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "macro_precision": self.macro_precision,
            "macro_sensitivity": self.macro_sensitivity,
            "macro_specificity": self.macro_specificity,
            "per_class": [
                {
                    "precision": m.precision,
                    "sensitivity": m.sensitivity,
                    "specificity": m.specificity,
                    "f1": m.f1,
                    "undefined": list(m.undefined),
                }
                for m in self.per_class
            ],
        }

    @staticmethod
    def from_dict(data: dict) -> "EvaluationReport":
        return EvaluationReport(
            confusion=np.array(data["confusion"], dtype=np.int64),
            accuracy=data["accuracy"],
            macro_f1=data["macro_f1"],
            macro_precision=data["macro_precision"],
            macro_sensitivity=data["macro_sensitivity"],
            macro_specificity=data["macro_specificity"],
            per_class=tuple(
                ClassMetrics(
                    precision=m["precision"],
                    sensitivity=m["sensitivity"],
                    specificity=m["specificity"],
                    f1=m["f1"],
                    undefined=tuple(m["undefined"]),
                )
                for m in data["per_class"]
            ),
        )


def confusion_matrix(true_labels, predicted_labels, num_classes: int) -> np.ndarray:
    """Z x Z count matrix; cell [t][p] counts records with true t predicted p."""
    true_labels = np.asarray(true_labels, dtype=np.int64)
    predicted_labels = np.asarray(predicted_labels, dtype=np.int64)
    if true_labels.shape != predicted_labels.shape or true_labels.ndim != 1:
        raise ArgumentError("true and predicted label sequences must have equal length")
    if true_labels.size == 0:
        raise ArgumentError("cannot build a confusion matrix from zero records")
    for name, arr in (("true", true_labels), ("predicted", predicted_labels)):
        if arr.min() < 0 or arr.max() >= num_classes:
            raise ArgumentError(f"{name} label out of range [0, {num_classes})")
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(counts, (true_labels, predicted_labels), 1)
    return counts


def compute_metrics(confusion: np.ndarray) -> EvaluationReport:
    """One-vs-rest metrics per class plus unweighted macro aggregates.

    A metric with a zero denominator is reported as 0 and listed in the
    class's `undefined` field, so macro means always total.
    """
    confusion = np.asarray(confusion, dtype=np.int64)
    if confusion.ndim != 2 or confusion.shape[0] != confusion.shape[1]:
        raise ArgumentError("confusion matrix must be square")
    total = int(confusion.sum())
    if total == 0:
        raise ArgumentError("confusion matrix is all zeros")
    z = confusion.shape[0]
    per_class = []
    for c in range(z):
        tp = int(confusion[c, c])
        fn = int(confusion[c, :].sum()) - tp
        fp = int(confusion[:, c].sum()) - tp
        tn = total - tp - fn - fp
        undefined = []

        def ratio(num, den, name):
            if den == 0:
                undefined.append(name)
                return 0.0
            return num / den

        precision = ratio(tp, tp + fp, "precision")
        sensitivity = ratio(tp, tp + fn, "sensitivity")
        specificity = ratio(tn, tn + fp, "specificity")
        f1 = ratio(2 * precision * sensitivity, precision + sensitivity, "f1")
        per_class.append(
            ClassMetrics(
                precision=precision,
                sensitivity=sensitivity,
                specificity=specificity,
                f1=f1,
                undefined=tuple(undefined),
            )
        )
    return EvaluationReport(
        confusion=confusion,
        accuracy=float(np.trace(confusion)) / total,
        macro_f1=sum(m.f1 for m in per_class) / z,
        macro_precision=sum(m.precision for m in per_class) / z,
        macro_sensitivity=sum(m.sensitivity for m in per_class) / z,
        macro_specificity=sum(m.specificity for m in per_class) / z,
        per_class=tuple(per_class),
    )


def evaluate(true_labels, predicted_labels, num_classes: int) -> EvaluationReport:
    """confusion_matrix + compute_metrics in one call."""
    return compute_metrics(confusion_matrix(true_labels, predicted_labels, num_classes))


def render_table(report: EvaluationReport, class_names=None) -> str:
    """Fixed-width table with per-class precision/sensitivity/specificity rows."""
    z = len(report.per_class)
    if class_names is None:
        class_names = [f"class_{c}" for c in range(z)]
    width = max(12, max(len(str(n)) for n in class_names) + 2)
    header = f"{'Class':<{width}}{'Precision':>12}{'Sensitivity':>13}{'Specificity':>13}{'F1':>10}"
    lines = [header, "-" * len(header)]
    for name, m in zip(class_names, report.per_class):
        lines.append(
            f"{str(name):<{width}}{m.precision:>11.2%} {m.sensitivity:>12.2%} "
            f"{m.specificity:>12.2%} {m.f1:>9.2%}"
        )
    lines.append("-" * len(header))
    lines.append(
        f"{'macro':<{width}}{report.macro_precision:>11.2%} "
        f"{report.macro_sensitivity:>12.2%} {report.macro_specificity:>12.2%} "
        f"{report.macro_f1:>9.2%}"
    )
    lines.append(f"accuracy: {report.accuracy:.2%}")
    return "\n".join(lines)
