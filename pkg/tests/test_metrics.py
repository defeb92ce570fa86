import json
import math

import numpy as np
import pytest

from lridnet.languages import CLASS_NAMES
from lridnet.metrics import (
    confusion_matrix,
    display_transform,
    evaluate,
    render_heatmap,
    report_from_confusion,
    report_to_dict,
    report_to_text,
    save_confusion,
    save_report,
)


def brute_force_report(cm, classes):
    """Independent per-class tally: plain loops, no shared code paths."""
    k = len(classes)
    out = {"precision": [], "recall": [], "f1": [], "support": []}
    for i in range(k):
        tp = cm[i][i]
        fp = sum(cm[r][i] for r in range(k)) - tp
        fn = sum(cm[i][c] for c in range(k)) - tp
        p = tp / (tp + fp) if tp + fp > 0 else 0.0
        r = tp / (tp + fn) if tp + fn > 0 else 0.0
        f = 2 * p * r / (p + r) if p + r > 0 else 0.0
        out["precision"].append(p)
        out["recall"].append(r)
        out["f1"].append(f)
        out["support"].append(tp + fn)
    total = sum(out["support"])
    out["macro"] = {m: sum(out[m]) / k for m in ("precision", "recall", "f1")}
    out["weighted"] = {
        m: (sum(v * s for v, s in zip(out[m], out["support"])) / total if total else 0.0)
        for m in ("precision", "recall", "f1")
    }
    return out


def test_confusion_perfect_predictions():
    labels = list("abcabcabca")
    cm = confusion_matrix(labels, labels, ["a", "b", "c"])
    assert np.trace(cm) == 10
    assert cm.sum() == 10
    assert np.all(cm == np.diag(np.diag(cm)))


def test_confusion_single_predicted_column():
    y_true = ["English", "Korean", "Others", "English"]
    y_pred = ["English"] * 4
    cm = confusion_matrix(y_true, y_pred, CLASS_NAMES)
    col = CLASS_NAMES.index("English")
    assert cm[:, col].sum() == 4
    assert cm.sum() == 4


def test_confusion_rejects_unknown_labels():
    with pytest.raises(ValueError, match="true label"):
        confusion_matrix(["x"], ["a"], ["a", "b"])
    with pytest.raises(ValueError, match="predicted label"):
        confusion_matrix(["a"], ["x"], ["a", "b"])
    with pytest.raises(ValueError, match="length"):
        confusion_matrix(["a"], ["a", "b"], ["a", "b"])


def test_report_two_class_hand_arithmetic():
    # class A: TP=8, FP=2, FN=2
    cm = np.array([[8, 2], [2, 8]])
    report = report_from_confusion(cm, ["A", "B"])
    assert report.precision[0] == pytest.approx(0.8)
    assert report.recall[0] == pytest.approx(0.8)
    assert report.f1[0] == pytest.approx(0.8)


def test_report_zero_division_rule():
    cm = np.array([[5, 0, 0], [0, 0, 0], [3, 0, 0]])
    report = report_from_confusion(cm, ["a", "b", "c"])
    assert report.precision[1] == 0.0
    assert report.recall[1] == 0.0
    assert report.f1[1] == 0.0
    assert np.isfinite(report.f1).all()


def test_report_against_brute_force_oracle():
    rng = np.random.default_rng(17)
    for _ in range(300):
        k = int(rng.integers(2, 12))
        cm = rng.integers(0, 50, size=(k, k))
        classes = [f"c{i}" for i in range(k)]
        report = report_from_confusion(cm, classes)
        oracle = brute_force_report(cm.tolist(), classes)
        assert np.abs(report.precision - oracle["precision"]).max() <= 1e-12
        assert np.abs(report.recall - oracle["recall"]).max() <= 1e-12
        assert np.abs(report.f1 - oracle["f1"]).max() <= 1e-12
        for m in ("precision", "recall", "f1"):
            assert abs(getattr(report, f"macro_{m}") - oracle["macro"][m]) <= 1e-12
            assert abs(getattr(report, f"weighted_{m}") - oracle["weighted"][m]) <= 1e-12


def test_self_confusion_gives_unit_f1():
    rng = np.random.default_rng(3)
    y = [CLASS_NAMES[i] for i in rng.integers(0, 5, 100)]
    cm, report = evaluate(y, y, CLASS_NAMES)
    present = report.support > 0
    assert np.all(report.f1[present] == 1.0)


def test_weighted_recall_equals_accuracy():
    rng = np.random.default_rng(4)
    y_true = [CLASS_NAMES[i] for i in rng.integers(0, 11, 500)]
    y_pred = [CLASS_NAMES[i] for i in rng.integers(0, 11, 500)]
    _, report = evaluate(y_true, y_pred, CLASS_NAMES)
    accuracy = np.mean([t == p for t, p in zip(y_true, y_pred)])
    assert report.weighted_recall == pytest.approx(accuracy, abs=1e-12)


def test_pair_permutation_invariance():
    rng = np.random.default_rng(5)
    y_true = [CLASS_NAMES[i] for i in rng.integers(0, 11, 200)]
    y_pred = [CLASS_NAMES[i] for i in rng.integers(0, 11, 200)]
    cm1, _ = evaluate(y_true, y_pred, CLASS_NAMES)
    order = rng.permutation(200)
    cm2, _ = evaluate([y_true[i] for i in order], [y_pred[i] for i in order], CLASS_NAMES)
    assert np.array_equal(cm1, cm2)


def test_display_transform_values():
    cm = np.array([[0, 9], [84102, 99]])
    out = display_transform(cm)
    assert out[0, 0] == 0.0
    assert out[0, 1] == pytest.approx(1.0)
    assert out[1, 0] == pytest.approx(4.9248, abs=1e-4)
    assert out[1, 1] == pytest.approx(2.0)


def test_report_serialization(tmp_path):
    cm = np.array([[8, 2], [1, 9]])
    report = report_from_confusion(cm, ["A", "B"])
    text = report_to_text(report)
    assert "A" in text and "weighted avg" in text and "macro avg" in text
    d = report_to_dict(report)
    assert d["per_class"]["A"]["support"] == 10
    save_report(report, tmp_path / "rep")
    assert (tmp_path / "rep.txt").exists()
    loaded = json.loads((tmp_path / "rep.json").read_text())
    assert loaded["weighted"]["f1"] == pytest.approx(report.weighted_f1)


def test_confusion_export(tmp_path):
    cm = np.array([[3, 1], [0, 4]])
    save_confusion(cm, ["A", "B"], tmp_path / "conf")
    lines = (tmp_path / "conf.csv").read_text().strip().splitlines()
    assert lines[0].endswith("A,B")
    assert lines[1] == "A,3,1"
    assert (tmp_path / "conf.png").stat().st_size > 0


def test_heatmap_renders(tmp_path):
    cm = np.random.default_rng(0).integers(0, 1000, (11, 11))
    render_heatmap(cm, CLASS_NAMES, tmp_path / "h.png")
    assert (tmp_path / "h.png").stat().st_size > 1000
