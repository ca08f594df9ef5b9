"""Confusion matrices, macro-averaged P/R/F1 and comparison tables."""

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Sequence, Tuple

import numpy as np

from .corpus import LABELS, SentimentLabel

BASELINE_NAME = "baseline"
BASELINE_MACRO_F1 = 0.654
REPORT_COLUMNS = ("system", "precision", "recall", "macro_f1")


def _index(label) -> int:
    if isinstance(label, (int, np.integer)):
        if not 0 <= label < len(LABELS):
            raise ValueError(f"class index {label} out of range")
        return int(label)
    if not isinstance(label, SentimentLabel):
        label = SentimentLabel.parse(str(label))
    return label.rank


@dataclass
class ConfusionMatrix:
    """3x3 counts; rows are gold labels, columns predictions, both in label order."""

    counts: np.ndarray

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.shape != (len(LABELS), len(LABELS)) or (self.counts < 0).any():
            raise ValueError("confusion matrix must be a non-negative 3x3 count array")

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __getitem__(self, key):
        gold, pred = key
        return int(self.counts[_index(gold), _index(pred)])


def confusion(golds: Sequence, preds: Sequence) -> ConfusionMatrix:
    if len(golds) != len(preds):
        raise ValueError(f"length mismatch: {len(golds)} gold vs {len(preds)} predicted labels")
    if not len(golds):
        raise ValueError("cannot evaluate an empty prediction set")
    g = np.fromiter((_index(x) for x in golds), dtype=np.int64, count=len(golds))
    p = np.fromiter((_index(x) for x in preds), dtype=np.int64, count=len(preds))
    counts = np.zeros((len(LABELS), len(LABELS)), dtype=np.int64)
    np.add.at(counts, (g, p), 1)
    return ConfusionMatrix(counts)


def _ratio(num: int, den: int) -> Fraction:
    return Fraction(num, den) if den else Fraction(0)


@dataclass
class MetricsReport:
    precision: Dict[str, float]
    recall: Dict[str, float]
    f1: Dict[str, float]
    macro_precision: float
    macro_recall: float
    macro_f1: float
    support: Dict[str, int] = field(default_factory=dict)
    total: int = 0

    def as_dict(self) -> dict:
        return {
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f1": self.macro_f1,
            "per_class": {
                c: {"precision": self.precision[c], "recall": self.recall[c],
                    "f1": self.f1[c], "support": self.support.get(c, 0)}
                for c in self.precision
            },
            "total": self.total,
        }


def macro_metrics(matrix: ConfusionMatrix) -> MetricsReport:
    """Per-class and unweighted macro P/R/F1; undefined ratios count as 0."""
    if matrix.total <= 0:
        raise ValueError("confusion matrix is empty")
    # counts are integers, so exact rationals give correctly rounded results
    c = matrix.counts.tolist()
    n = len(LABELS)
    tp = [c[i][i] for i in range(n)]
    precision = [_ratio(tp[i], sum(c[g][i] for g in range(n))) for i in range(n)]
    recall = [_ratio(tp[i], sum(c[i])) for i in range(n)]
    f1 = [2 * p * r / (p + r) if p + r else Fraction(0) for p, r in zip(precision, recall)]
    names = [label.value for label in LABELS]
    return MetricsReport(
        precision={k: float(v) for k, v in zip(names, precision)},
        recall={k: float(v) for k, v in zip(names, recall)},
        f1={k: float(v) for k, v in zip(names, f1)},
        macro_precision=float(sum(precision) / n),
        macro_recall=float(sum(recall) / n),
        macro_f1=float(sum(f1) / n),
        support=dict(zip(names, (sum(row) for row in c))),
        total=matrix.total,
    )


def evaluate(golds, preds) -> MetricsReport:
    return macro_metrics(confusion(golds, preds))


def _rows(results, include_baseline):
    rows = []
    if include_baseline and results:
        rows.append((BASELINE_NAME, "", "", f"{BASELINE_MACRO_F1:.4f}"))
    for name, report in results:
        rows.append((name, f"{report.macro_precision:.4f}", f"{report.macro_recall:.4f}",
                     f"{report.macro_f1:.4f}"))
    return rows


def report_table(results: Sequence[Tuple[str, MetricsReport]], include_baseline: bool = True):
    """Render ``(system, report)`` pairs as a plain-text table and as CSV.

    Returns ``(text, csv_text)``. Rows keep input order; the task baseline row
    (macro F1 only) comes first when ``include_baseline`` is set and there is
    at least one system to compare against it.
    """
    rows = _rows(results, include_baseline)
    header = REPORT_COLUMNS
    widths = [max([len(h)] + [len(r[i]) for r in rows]) for i, h in enumerate(header)]
    lines = [" | ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip()]
    lines.append("-+-".join("-" * w for w in widths))
    for r in rows:
        lines.append(" | ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip())
    text = "\n".join(lines) + "\n"

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return text, buf.getvalue()
