"""Accuracy, macro precision/recall/F, confusion and modification matrices."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import LABELS, SentimentLabel


class UndefinedMetricWarning(UserWarning):
    """A precision or recall denominator was zero and the value was set to 0."""


@dataclass
class EvalReport:
    accuracy: float
    precision: dict[SentimentLabel, float]
    recall: dict[SentimentLabel, float]
    classwise_f: dict[SentimentLabel, float]
    confusion: np.ndarray  # gold row x predicted column

    @property
    def macro_precision(self) -> float:
        return float(np.mean([self.precision[lab] for lab in LABELS]))

    @property
    def macro_recall(self) -> float:
        return float(np.mean([self.recall[lab] for lab in LABELS]))

    @property
    def macro_f(self) -> float:
        return float(np.mean([self.classwise_f[lab] for lab in LABELS]))

    @property
    def total(self) -> int:
        return int(self.confusion.sum())

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_precision": self.macro_precision,
            "macro_recall": self.macro_recall,
            "macro_f": self.macro_f,
            "classwise_f": {str(lab): self.classwise_f[lab] for lab in LABELS},
            "confusion": self.confusion.tolist(),
        }


@dataclass
class ModificationMatrix:
    """Changed predictions, row = baseline label, column = refined label."""

    successful: np.ndarray
    unsuccessful: np.ndarray

    @property
    def changed(self) -> int:
        return int(self.successful.sum() + self.unsuccessful.sum())

    def to_dict(self) -> dict:
        def cells(m):
            return {str(a): {str(b): int(m[a, b]) for b in LABELS if b is not a} for a in LABELS}
        return {"successful": cells(self.successful), "unsuccessful": cells(self.unsuccessful)}


def confusion_matrix(preds: Sequence[SentimentLabel], golds: Sequence[SentimentLabel]) -> np.ndarray:
    m = np.zeros((len(LABELS), len(LABELS)), dtype=np.int64)
    np.add.at(m, (np.asarray([int(g) for g in golds], dtype=np.int64),
                  np.asarray([int(p) for p in preds], dtype=np.int64)), 1)
    return m


def _ratio(num: float, den: float, what: str, warn: bool) -> float:
    if den == 0:
        if warn:
            warnings.warn(f"{what} is undefined (zero denominator); using 0.0",
                          UndefinedMetricWarning, stacklevel=3)
        return 0.0
    return num / den


def evaluate(preds: Sequence[SentimentLabel], golds: Sequence[SentimentLabel], warn: bool = True) -> EvalReport:
    """Score predictions against gold labels.

    Precision, recall and F are computed per class and averaged without
    weights. A zero denominator yields 0 (with an
    :class:`UndefinedMetricWarning` unless ``warn`` is false).
    """
    if len(preds) != len(golds):
        raise ValueError(f"length mismatch: {len(preds)} predictions vs {len(golds)} gold labels")
    if not golds:
        raise ValueError("cannot evaluate an empty prediction list")
    cm = confusion_matrix(preds, golds)
    precision, recall, f = {}, {}, {}
    for lab in LABELS:
        tp = cm[lab, lab]
        p = _ratio(tp, cm[:, lab].sum(), f"precision of {lab}", warn)
        r = _ratio(tp, cm[lab, :].sum(), f"recall of {lab}", warn)
        precision[lab] = float(p)
        recall[lab] = float(r)
        f[lab] = 0.0 if p + r == 0 else float(2 * p * r / (p + r))
    accuracy = float(np.trace(cm) / cm.sum())
    return EvalReport(accuracy, precision, recall, f, cm)


def modification_matrix(baseline: Sequence[SentimentLabel], refined: Sequence[SentimentLabel],
                        golds: Sequence[SentimentLabel]) -> ModificationMatrix:
    if not len(baseline) == len(refined) == len(golds):
        raise ValueError(f"length mismatch: baseline={len(baseline)}, refined={len(refined)}, gold={len(golds)}")
    ok = np.zeros((3, 3), dtype=np.int64)
    bad = np.zeros((3, 3), dtype=np.int64)
    for b, r, g in zip(baseline, refined, golds):
        if b == r:
            continue
        if r == g:
            ok[b, r] += 1
        else:
            bad[b, r] += 1
    return ModificationMatrix(ok, bad)


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def _to_json(obj, indent: int = 0) -> str:
    # floats are written with exactly six fractional digits
    pad = "  " * (indent + 1)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f'{pad}"{k}": {_to_json(v, indent + 1)}' for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + "  " * indent + "}"
    if isinstance(obj, (list, tuple)):
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(_to_json(v, indent) for v in obj) + "]"
        items = [pad + _to_json(v, indent + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + "  " * indent + "]"
    if isinstance(obj, bool) or obj is None:
        return {True: "true", False: "false", None: "null"}[obj]
    if isinstance(obj, (float, np.floating)):
        return _fmt(float(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    return json.dumps(obj, ensure_ascii=False)


def report_json(report: EvalReport, modification: ModificationMatrix | None = None, **extra) -> str:
    """Serialise a report with the fixed key set; ``extra`` entries are appended."""
    data = report.to_dict()
    data["modification"] = modification.to_dict() if modification is not None else None
    data.update(extra)
    return _to_json(data) + "\n"


def _grid(header: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]
    line = "+" + "+".join("-" * (w + 2) for w in widths) + "+"
    def fmt(r):
        return "| " + " | ".join(c.ljust(w) for c, w in zip(r, widths)) + " |"
    return "\n".join([line, fmt(header), line] + [fmt(r) for r in rows] + [line])


def format_tables(reports: dict[str, EvalReport], modification: ModificationMatrix | None = None) -> str:
    """Plain-text tables: macro scores per system, classwise F, and the
    successful/unsuccessful modification counts."""
    names = [lab.name.capitalize() for lab in LABELS]
    out = [_grid(["", "Accuracy", "Precision", "Recall", "F-score"],
                 [[name, f"{r.accuracy:.3f}", f"{r.macro_precision:.3f}", f"{r.macro_recall:.3f}",
                   f"{r.macro_f:.3f}"] for name, r in reports.items()])]
    out.append(_grid([""] + names,
                     [[name] + [f"{r.classwise_f[lab]:.3f}" for lab in LABELS] for name, r in reports.items()]))
    if modification is not None:
        rows = []
        for a, name in zip(LABELS, names):
            row = [name]
            for m in (modification.successful, modification.unsuccessful):
                row += ["-" if a is b else str(int(m[a, b])) for b in LABELS]
            rows.append(row)
        header = [""] + [f"ok:{n}" for n in names] + [f"fail:{n}" for n in names]
        out.append("Successful (ok) / unsuccessful (fail) modifications; rows = baseline, columns = refined\n"
                   + _grid(header, rows))
    return "\n\n".join(out) + "\n"
