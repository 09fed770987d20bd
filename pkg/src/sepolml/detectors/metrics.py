"""Accuracy, per-label precision/recall/F1, macro and weighted averages."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dataset import N_LABELS


def _div(a, b):
    return a / b if b else 0.0


@dataclass
class LabelMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class MetricsReport:
    accuracy: float
    per_label: dict[int, LabelMetrics]
    macro_avg: tuple[float, float, float]
    weighted_avg: tuple[float, float, float]
    confusion_matrix: np.ndarray

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "per_label": {
                str(k): {"precision": m.precision, "recall": m.recall, "f1": m.f1, "support": m.support}
                for k, m in self.per_label.items()
            },
            "macro_avg": dict(zip(("precision", "recall", "f1"), self.macro_avg)),
            "weighted_avg": dict(zip(("precision", "recall", "f1"), self.weighted_avg)),
            "confusion_matrix": self.confusion_matrix.tolist(),
        }

    @classmethod
    def from_dict(cls, d) -> "MetricsReport":
        return cls(
            d["accuracy"],
            {int(k): LabelMetrics(**v) for k, v in d["per_label"].items()},
            tuple(d["macro_avg"][k] for k in ("precision", "recall", "f1")),
            tuple(d["weighted_avg"][k] for k in ("precision", "recall", "f1")),
            np.array(d["confusion_matrix"], dtype=np.int64),
        )

    def recall(self, label: int) -> float:
        return self.per_label[label].recall


def confusion_matrix(y_true, y_pred, n_labels: int = N_LABELS) -> np.ndarray:
    """Rows are true labels, columns predictions."""
    cm = np.zeros((n_labels, n_labels), dtype=np.int64)
    np.add.at(cm, (np.asarray(y_true, dtype=np.int64), np.asarray(y_pred, dtype=np.int64)), 1)
    return cm


def metrics_from_confusion(cm) -> MetricsReport:
    cm = np.asarray(cm, dtype=np.int64)
    total = int(cm.sum())
    if total == 0:
        raise ValueError("empty confusion matrix")
    per_label = {}
    for k in range(cm.shape[0]):
        tp = int(cm[k, k])
        fp = int(cm[:, k].sum()) - tp
        fn = int(cm[k, :].sum()) - tp
        p = _div(tp, tp + fp)
        r = _div(tp, tp + fn)
        per_label[k] = LabelMetrics(p, r, _div(2 * p * r, p + r), tp + fn)
    present = [m for m in per_label.values() if m.support > 0]
    macro = tuple(float(np.mean([getattr(m, f) for m in present])) for f in ("precision", "recall", "f1"))
    weighted = tuple(
        sum(getattr(m, f) * m.support for m in present) / total for f in ("precision", "recall", "f1")
    )
    return MetricsReport(np.trace(cm) / total, per_label, macro, weighted, cm)


def classification_report(y_true, y_pred, n_labels: int = N_LABELS) -> MetricsReport:
    return metrics_from_confusion(confusion_matrix(y_true, y_pred, n_labels))
