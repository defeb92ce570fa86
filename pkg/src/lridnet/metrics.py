"""Per-class precision/recall/F1 with macro and support-weighted averages.

All statistics are derived from an integer confusion matrix with a fixed
class order (rows = true, columns = predicted). Undefined ratios (zero
denominators) score 0 rather than NaN. "Weighted" means support-weighted
per-class averaging; for single-label data weighted recall coincides with
overall accuracy, but weighted precision and F1 are not micro averages in
general.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np


def confusion_matrix(y_true, y_pred, classes) -> np.ndarray:
    """Count matrix with counts[i][j] = items of true class i predicted as j."""
    y_true = list(y_true)
    y_pred = list(y_pred)
    if len(y_true) != len(y_pred):
        raise ValueError(
            f"label sequences differ in length: {len(y_true)} vs {len(y_pred)}"
        )
    index = {c: i for i, c in enumerate(classes)}
    cm = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        if t not in index:
            raise ValueError(f"true label {t!r} not in class list")
        if p not in index:
            raise ValueError(f"predicted label {p!r} not in class list")
        cm[index[t], index[p]] += 1
    return cm


@dataclass
class MetricsReport:
    classes: tuple[str, ...]
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    macro_precision: float
    macro_recall: float
    macro_f1: float
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float


def _safe_div(num, den):
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=den > 0)
    return out


def report_from_confusion(cm: np.ndarray, classes) -> MetricsReport:
    cm = np.asarray(cm)
    k = len(classes)
    if cm.shape != (k, k):
        raise ValueError(f"matrix shape {cm.shape} does not match {k} classes")
    if np.any(cm < 0):
        raise ValueError("confusion matrix contains negative counts")
    tp = np.diag(cm).astype(float)
    support = cm.sum(axis=1).astype(float)
    predicted = cm.sum(axis=0).astype(float)
    precision = _safe_div(tp, predicted)
    recall = _safe_div(tp, support)
    f1 = _safe_div(2 * precision * recall, precision + recall)
    total = support.sum()
    if total > 0:
        weighted = tuple(float((m * support).sum() / total) for m in (precision, recall, f1))
    else:
        weighted = (0.0, 0.0, 0.0)
    return MetricsReport(
        classes=tuple(classes),
        precision=precision,
        recall=recall,
        f1=f1,
        support=support.astype(np.int64),
        macro_precision=float(precision.mean()),
        macro_recall=float(recall.mean()),
        macro_f1=float(f1.mean()),
        weighted_precision=weighted[0],
        weighted_recall=weighted[1],
        weighted_f1=weighted[2],
    )


def evaluate(y_true, y_pred, classes):
    """Confusion matrix and report in one call."""
    cm = confusion_matrix(y_true, y_pred, classes)
    return cm, report_from_confusion(cm, classes)


def display_transform(cm: np.ndarray) -> np.ndarray:
    """Elementwise log10(count + 1), the scaling used for heatmap rendering."""
    return np.log10(np.asarray(cm, dtype=float) + 1.0)


def report_to_dict(report: MetricsReport) -> dict:
    return {
        "classes": list(report.classes),
        "per_class": {
            c: {
                "precision": float(report.precision[i]),
                "recall": float(report.recall[i]),
                "f1": float(report.f1[i]),
                "support": int(report.support[i]),
            }
            for i, c in enumerate(report.classes)
        },
        "macro": {
            "precision": report.macro_precision,
            "recall": report.macro_recall,
            "f1": report.macro_f1,
        },
        "weighted": {
            "precision": report.weighted_precision,
            "recall": report.weighted_recall,
            "f1": report.weighted_f1,
        },
    }


def report_to_text(report: MetricsReport) -> str:
    width = max(len(c) for c in report.classes)
    lines = [
        f"{'class':<{width}}  precision  recall  f1      support",
    ]
    for i, c in enumerate(report.classes):
        lines.append(
            f"{c:<{width}}  {report.precision[i]:9.3f}  {report.recall[i]:6.3f}"
            f"  {report.f1[i]:6.3f}  {int(report.support[i]):7d}"
        )
    lines.append("")
    lines.append(
        f"{'macro avg':<{width}}  {report.macro_precision:9.3f}"
        f"  {report.macro_recall:6.3f}  {report.macro_f1:6.3f}"
        f"  {int(report.support.sum()):7d}"
    )
    lines.append(
        f"{'weighted avg':<{width}}  {report.weighted_precision:9.3f}"
        f"  {report.weighted_recall:6.3f}  {report.weighted_f1:6.3f}"
        f"  {int(report.support.sum()):7d}"
    )
    return "\n".join(lines) + "\n"


def save_report(report: MetricsReport, base_path):
    """Write ``<base>.txt`` (table) and ``<base>.json`` (machine-readable)."""
    base = Path(base_path)
    base.parent.mkdir(parents=True, exist_ok=True)
    base.with_suffix(".txt").write_text(report_to_text(report), encoding="utf-8")
    base.with_suffix(".json").write_text(
        json.dumps(report_to_dict(report), indent=2) + "\n", encoding="utf-8"
    )


def save_confusion(cm: np.ndarray, classes, base_path, heatmap: bool = True):
    """Export a confusion matrix as delimited text and optionally a heatmap PNG."""
    base = Path(base_path)
    base.parent.mkdir(parents=True, exist_ok=True)
    with open(base.with_suffix(".csv"), "w", encoding="utf-8") as fh:
        fh.write("true\\pred," + ",".join(classes) + "\n")
        for i, c in enumerate(classes):
            fh.write(c + "," + ",".join(str(int(v)) for v in cm[i]) + "\n")
    if heatmap:
        render_heatmap(cm, classes, base.with_suffix(".png"))


def render_heatmap(cm: np.ndarray, classes, path):
    """Log-scaled confusion heatmap written as PNG."""
    from matplotlib.backends.backend_agg import FigureCanvasAgg
    from matplotlib.figure import Figure

    scaled = display_transform(cm)
    fig = Figure(figsize=(7, 6))
    FigureCanvasAgg(fig)
    ax = fig.add_subplot(111)
    im = ax.imshow(scaled, cmap="viridis")
    ax.set_xticks(range(len(classes)), classes, rotation=45, ha="right")
    ax.set_yticks(range(len(classes)), classes)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    fig.colorbar(im, ax=ax, label="log10(count + 1)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
