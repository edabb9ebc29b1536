"""Micro/Macro-F1 for single-label multiclass predictions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from vnhgcn.errors import EvalError


@dataclass
class F1Report:
    micro_f1: float
    macro_f1: float
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    confusion: np.ndarray  # rows: gold class, columns: predicted class

    @property
    def support(self) -> np.ndarray:
        return self.confusion.sum(axis=1)

    def to_text(self, title: str = "") -> str:
        lines = [title] if title else []
        lines.append(f"micro_f1 {self.micro_f1:.6f}")
        lines.append(f"macro_f1 {self.macro_f1:.6f}")
        lines.append("class precision recall f1 support")
        for c in range(len(self.f1)):
            lines.append(f"{c} {self.precision[c]:.6f} {self.recall[c]:.6f} "
                         f"{self.f1[c]:.6f} {self.support[c]}")
        return "\n".join(lines)


def _safe_div(num, den):
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    return np.divide(num, den, out=np.zeros_like(num), where=den > 0)


def f1_scores(predictions, labels, mask=None, num_classes: int | None = None) -> F1Report:
    """Pooled (micro) and per-class-mean (macro) F1 over the rows in ``mask``.

    A class absent from both predictions and gold labels counts as F1 = 0 in
    the macro average.
    """
    pred = np.asarray(predictions, dtype=np.int64)
    gold = np.asarray(labels, dtype=np.int64)
    if mask is not None:
        mask = np.asarray(mask)
        pred, gold = pred[mask], gold[mask]
    if pred.size == 0:
        raise EvalError("cannot score an empty node set")
    if pred.shape != gold.shape:
        raise EvalError(f"prediction shape {pred.shape} != label shape {gold.shape}")
    if num_classes is None:
        num_classes = int(max(pred.max(), gold.max())) + 1
    confusion = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(confusion, (gold, pred), 1)
    tp = np.diag(confusion)
    fp = confusion.sum(axis=0) - tp
    fn = confusion.sum(axis=1) - tp
    precision = _safe_div(tp, tp + fp)
    recall = _safe_div(tp, tp + fn)
    f1 = _safe_div(2 * tp, 2 * tp + fp + fn)
    TP, FP, FN = tp.sum(), fp.sum(), fn.sum()
    micro = float(TP / (TP + 0.5 * (FP + FN)))
    return F1Report(micro, float(f1.mean()), precision, recall, f1, confusion)
