"""Classification metrics, ROC analysis, and result reporting."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptyPredictions, SingleClassPresent


@dataclass(frozen=True)
class PredictionSet:
    """Aligned truth, hard predictions and per-class scores.

    scores has shape (n, n_classes) or is None when a model only emits
    hard labels. Labels are integer class indices into class_names.
    """

    y_true: np.ndarray
    y_pred: np.ndarray
    scores: np.ndarray | None
    class_names: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "y_true", np.asarray(self.y_true, dtype=int))
        object.__setattr__(self, "y_pred", np.asarray(self.y_pred, dtype=int))
        if self.scores is not None:
            object.__setattr__(self, "scores", np.asarray(self.scores, dtype=float))
        if self.y_true.size == 0:
            raise EmptyPredictions("no predictions")
        if self.y_true.shape != self.y_pred.shape:
            raise EmptyPredictions("y_true and y_pred differ in length")


def accuracy(preds: PredictionSet) -> float:
    return float(np.mean(preds.y_true == preds.y_pred))


def confusion_matrix(preds: PredictionSet) -> np.ndarray:
    """Counts with true classes on rows, predicted on columns."""
    k = len(preds.class_names)
    counts = np.zeros((k, k), dtype=int)
    np.add.at(counts, (preds.y_true, preds.y_pred), 1)
    return counts


def row_normalized(counts: np.ndarray) -> np.ndarray:
    """Per-true-class rates; all-zero rows stay zero."""
    counts = np.asarray(counts, dtype=float)
    sums = counts.sum(axis=1, keepdims=True)
    out = np.divide(counts, sums, out=np.zeros_like(counts), where=sums > 0)
    return out


def per_class_precision_recall(preds: PredictionSet):
    """Precision, recall and support per class; 0/0 counts as 0."""
    counts = confusion_matrix(preds)
    support = counts.sum(axis=1)
    predicted = counts.sum(axis=0)
    tp = np.diag(counts).astype(float)
    precision = np.divide(tp, predicted, out=np.zeros(len(tp)), where=predicted > 0)
    recall = np.divide(tp, support, out=np.zeros(len(tp)), where=support > 0)
    return precision, recall, support


def weighted_f1(preds: PredictionSet) -> float:
    """Support-weighted mean of per-class F1 scores.

    Classes with zero support are excluded; a class whose precision and
    recall are both zero contributes an F1 of zero.
    """
    precision, recall, support = per_class_precision_recall(preds)
    total = support.sum()
    score = 0.0
    for p, r, s in zip(precision, recall, support):
        if s == 0:
            continue
        f1 = 0.0 if (p + r) == 0 else 2.0 * p * r / (p + r)
        score += (s / total) * f1
    return float(score)


def binary_auc(scores: np.ndarray, positives: np.ndarray) -> float:
    """Rank-based AUC of scores against a boolean positive mask.

    Ties count one half. Equivalent to the Mann-Whitney U statistic
    normalized by n_pos * n_neg.

    Raises:
        SingleClassPresent: no positives or no negatives.
    """
    scores = np.asarray(scores, dtype=float)
    positives = np.asarray(positives, dtype=bool)
    n_pos = int(positives.sum())
    n_neg = int(positives.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise SingleClassPresent("AUC needs both positives and negatives")
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(scores.size, dtype=float)
    sorted_scores = scores[order]
    i = 0
    rank = 1
    while i < scores.size:
        j = i
        while j + 1 < scores.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (rank + rank + (j - i))
        rank += j - i + 1
        i = j + 1
    pos_rank_sum = ranks[positives].sum()
    return float((pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def roc_points(scores: np.ndarray, positives: np.ndarray) -> list[tuple[float, float, float]]:
    """One-vs-rest ROC polyline as (fpr, tpr, threshold) tuples.

    Starts at (0, 0) with an infinite threshold and visits every distinct
    score; the trapezoid area under the polyline equals the rank AUC.
    """
    scores = np.asarray(scores, dtype=float)
    positives = np.asarray(positives, dtype=bool)
    n_pos = int(positives.sum())
    n_neg = int(positives.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise SingleClassPresent("ROC needs both positives and negatives")
    order = np.argsort(-scores, kind="mergesort")
    sorted_scores = scores[order]
    sorted_pos = positives[order]
    points = [(0.0, 0.0, float("inf"))]
    tp = fp = 0
    i = 0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        tp += int(sorted_pos[i:j + 1].sum())
        fp += (j - i + 1) - int(sorted_pos[i:j + 1].sum())
        points.append((fp / n_neg, tp / n_pos, float(sorted_scores[i])))
        i = j + 1
    return points


def trapezoid_area(points) -> float:
    area = 0.0
    for (x0, y0, _), (x1, y1, _) in zip(points, points[1:]):
        area += (x1 - x0) * (y0 + y1) / 2.0
    return area


def one_vs_rest_auc(preds: PredictionSet) -> tuple[dict[str, float | None], float | None]:
    """Per-class one-vs-rest AUC and their unweighted mean.

    A class missing positives or negatives reports None and is excluded
    from the macro average; the macro is None when no class qualifies.
    """
    if preds.scores is None:
        return {name: None for name in preds.class_names}, None
    per_class: dict[str, float | None] = {}
    usable = []
    for idx, name in enumerate(preds.class_names):
        mask = preds.y_true == idx
        try:
            auc = binary_auc(preds.scores[:, idx], mask)
        except SingleClassPresent:
            per_class[name] = None
            continue
        per_class[name] = auc
        usable.append(auc)
    macro = float(np.mean(usable)) if usable else None
    return per_class, macro


@dataclass
class MetricReport:
    task: str
    class_names: tuple[str, ...]
    n_rows: int
    accuracy: float
    weighted_f1: float
    precision: dict[str, float]
    recall: dict[str, float]
    support: dict[str, int]
    confusion: list[list[int]]
    confusion_rates: list[list[float]]
    auc: dict[str, float | None]
    macro_auc: float | None

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "class_names": list(self.class_names),
            "n_rows": self.n_rows,
            "accuracy": self.accuracy,
            "weighted_f1": self.weighted_f1,
            "precision": self.precision,
            "recall": self.recall,
            "support": self.support,
            "confusion": self.confusion,
            "confusion_rates": self.confusion_rates,
            "auc": self.auc,
            "macro_auc": self.macro_auc,
        }


def build_report(preds: PredictionSet, task: str) -> MetricReport:
    precision, recall, support = per_class_precision_recall(preds)
    counts = confusion_matrix(preds)
    auc, macro = one_vs_rest_auc(preds)
    names = preds.class_names
    return MetricReport(
        task=task,
        class_names=tuple(names),
        n_rows=int(preds.y_true.size),
        accuracy=accuracy(preds),
        weighted_f1=weighted_f1(preds),
        precision={n: float(p) for n, p in zip(names, precision)},
        recall={n: float(r) for n, r in zip(names, recall)},
        support={n: int(s) for n, s in zip(names, support)},
        confusion=counts.tolist(),
        confusion_rates=row_normalized(counts).tolist(),
        auc=auc,
        macro_auc=macro,
    )


def save_report(report: MetricReport, path) -> None:
    Path(path).write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")


def save_roc_csv(preds: PredictionSet, path) -> None:
    """Write `class,fpr,tpr,threshold` rows for every scorable class."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["class", "fpr", "tpr", "threshold"])
        if preds.scores is None:
            return
        for idx, name in enumerate(preds.class_names):
            try:
                points = roc_points(preds.scores[:, idx], preds.y_true == idx)
            except SingleClassPresent:
                continue
            for fpr, tpr, thr in points:
                writer.writerow([name, repr(fpr), repr(tpr), repr(thr)])


def save_confusion_csv(report: MetricReport, path) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["true\\pred"] + list(report.class_names))
        for name, row in zip(report.class_names, report.confusion):
            writer.writerow([name] + list(row))


@dataclass(frozen=True)
class ComparisonRow:
    target: str
    classifier: str
    accuracy: float
    weighted_f1: float
    source: str = "internal"  # or "transcribed" for externally published numbers


def comparison_table(rows: list[ComparisonRow], title: str = "Classification performance comparison") -> str:
    """Render a grouped text table of accuracy / weighted F1 per classifier.

    Rows are grouped by target; each group prints its target once. Values
    render with two decimals; transcribed rows are starred.
    """
    header = ("Target value", "Classifier", "Accuracy", "W-F1 score")
    body = []
    last_target = None
    for row in rows:
        target = row.target if row.target != last_target else ""
        last_target = row.target
        mark = " *" if row.source == "transcribed" else ""
        body.append((target, row.classifier + mark,
                     f"{row.accuracy:.2f}", f"{row.weighted_f1:.2f}"))
    widths = [max(len(header[i]), *(len(r[i]) for r in body)) if body else len(header[i])
              for i in range(4)]
    sep = "-" * (sum(widths) + 6)
    lines = [title, "=" * (sum(widths) + 6),
             "  ".join(h.ljust(w) for h, w in zip(header, widths)), sep]
    for r in body:
        lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)))
    if any(row.source == "transcribed" for row in rows):
        lines.append(sep)
        lines.append("* transcribed from previously published results")
    return "\n".join(lines) + "\n"


PREDICTIONS_HEADER_PREFIX = ["event_id", "predicted_class"]


def save_predictions_csv(event_ids, classes, scores, class_names, path) -> None:
    """Write `event_id,predicted_class,score_<class>...` rows.

    Score columns appear only when scores are given, so a score-free file
    loads back with scores None.
    """
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        score_header = [f"score_{c}" for c in class_names] if scores is not None else []
        writer.writerow(PREDICTIONS_HEADER_PREFIX + score_header)
        for i, (eid, cls) in enumerate(zip(event_ids, classes)):
            row = [eid, cls]
            if scores is not None:
                row += [repr(float(s)) for s in scores[i]]
            writer.writerow(row)


def load_predictions_csv(path, class_names):
    """Read a predictions CSV back into (event_ids, classes, scores).

    scores is None when the file carries no score columns.
    """
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or header[:2] != PREDICTIONS_HEADER_PREFIX:
            raise EmptyPredictions(f"{path}: not a predictions CSV")
        score_cols = header[2:]
        expected = [f"score_{c}" for c in class_names]
        has_scores = score_cols == expected
        event_ids, classes, scores = [], [], []
        for row in reader:
            event_ids.append(row[0])
            classes.append(row[1])
            if has_scores:
                scores.append([float(x) for x in row[2:]])
    return event_ids, classes, (np.asarray(scores) if has_scores else None)
