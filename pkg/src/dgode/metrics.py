"""Per-class F1, support-weighted F1 and confusion matrices."""
from dataclasses import dataclass

import numpy as np


@dataclass
class MetricsReport:
    classes: tuple
    per_class_f1: np.ndarray
    support: np.ndarray
    weighted_f1: float
    accuracy: float
    confusion: np.ndarray  # rows: true class, columns: predicted class

    def to_dict(self):
        return {
            "classes": list(self.classes),
            "per_class_f1": [float(v) for v in self.per_class_f1],
            "support": [int(v) for v in self.support],
            "weighted_f1": float(self.weighted_f1),
            "accuracy": float(self.accuracy),
            "confusion": self.confusion.astype(int).tolist(),
        }

    def table_row(self, method="DGODE"):
        cells = [f"{100 * v:.1f}" for v in self.per_class_f1] + [f"{100 * self.weighted_f1:.1f}"]
        return "\t".join([method] + cells)

    def table(self, method="DGODE"):
        """Per-class F1 columns followed by W-F1, in percent."""
        header = "\t".join(["Methods", *self.classes, "W-F1"])
        return header + "\n" + self.table_row(method) + "\n"

    def confusion_text(self):
        width = max(len(c) for c in self.classes) if self.classes else 1
        lines = ["true\\pred\t" + "\t".join(self.classes)]
        for name, row in zip(self.classes, self.confusion):
            lines.append(f"{name:<{width}}\t" + "\t".join(str(int(v)) for v in row))
        return "\n".join(lines) + "\n"


def confusion_matrix(y_true, y_pred, n_classes):
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (np.asarray(y_true, dtype=np.intp), np.asarray(y_pred, dtype=np.intp)), 1)
    return cm


def report_from_confusion(cm, classes=None):
    cm = np.asarray(cm, dtype=np.int64)
    n = cm.shape[0]
    classes = tuple(classes) if classes is not None else tuple(str(k) for k in range(n))
    tp = np.diag(cm).astype(float)
    support = cm.sum(axis=1)
    predicted = cm.sum(axis=0)
    denom = support + predicted  # = 2 tp + fp + fn
    f1 = np.divide(2.0 * tp, denom, out=np.zeros(n), where=denom > 0)
    total = support.sum()
    if total == 0:
        raise ValueError("confusion matrix is empty")
    return MetricsReport(
        classes=classes,
        per_class_f1=f1,
        support=support,
        weighted_f1=float(np.sum(support / total * f1)),
        accuracy=float(tp.sum() / total),
        confusion=cm,
    )


def classification_report(y_true, y_pred, classes):
    return report_from_confusion(confusion_matrix(y_true, y_pred, len(classes)), classes)
