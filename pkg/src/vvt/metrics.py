"""Classification metrics.

Binary rates are one-vs-rest for the ``positive`` class (default: the last
label in sorted order, so ``1`` over ``0`` and ``malicious`` over ``benign``).
Undefined ratios are reported as 0: precision with no positive predictions,
FPR with no negative items, and so on. AUC is ``None`` when scores are
missing or the truth contains a single class.
"""

from dataclasses import dataclass

import numpy as np

from .errors import LengthMismatch, UnknownPositiveClass


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    false_positive_rate: float
    auc: object
    confusion: np.ndarray
    classes: tuple
    positive: object

    def as_dict(self):
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "false_positive_rate": self.false_positive_rate,
            "auc": self.auc,
            "classes": [str(c) for c in self.classes],
            "positive": str(self.positive),
            "confusion": self.confusion.tolist(),
        }


def _ratio(a, b):
    return float(a / b) if b else 0.0


def roc_auc(truth_positive, scores):
    """Trapezoidal area under the ROC swept over unique score thresholds."""
    t = np.asarray(truth_positive, dtype=bool)
    s = np.asarray(scores, dtype=float)
    n_pos, n_neg = t.sum(), (~t).sum()
    if n_pos == 0 or n_neg == 0:
        return None
    order = np.argsort(-s, kind="stable")
    s, t = s[order], t[order]
    last = np.r_[np.flatnonzero(np.diff(s) != 0), len(s) - 1]
    tpr = np.r_[0.0, np.cumsum(t)[last] / n_pos]
    fpr = np.r_[0.0, np.cumsum(~t)[last] / n_neg]
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


def eval_metrics(predictions, truth, scores=None, positive=None):
    pred = list(predictions)
    true = list(truth)
    if len(pred) != len(true) or (scores is not None and len(scores) != len(true)):
        raise LengthMismatch(f"{len(pred)} predictions vs {len(true)} truth labels")
    classes = tuple(sorted(set(true) | set(pred), key=str))
    if positive is None:
        positive = classes[-1] if classes else None
    elif positive not in classes:
        raise UnknownPositiveClass(f"positive class {positive!r} not among {list(classes)}")
    index = {c: i for i, c in enumerate(classes)}
    confusion = np.zeros((len(classes), len(classes)), dtype=int)
    for p, t in zip(pred, true):
        confusion[index[t], index[p]] += 1
    p_pos = np.array([p == positive for p in pred], dtype=bool)
    t_pos = np.array([t == positive for t in true], dtype=bool)
    tp = int(np.sum(p_pos & t_pos))
    fp = int(np.sum(p_pos & ~t_pos))
    fn = int(np.sum(~p_pos & t_pos))
    tn = int(np.sum(~p_pos & ~t_pos))
    precision = _ratio(tp, tp + fp)
    recall = _ratio(tp, tp + fn)
    f1 = _ratio(2 * precision * recall, precision + recall)
    accuracy = _ratio(np.trace(confusion), len(true))
    auc = roc_auc(t_pos, scores) if scores is not None else None
    return EvalReport(accuracy, precision, recall, f1, _ratio(fp, fp + tn), auc, confusion,
                      classes, positive)
