"""Precision/recall-gain curves over square score matrices.

Every entry of the n x n score matrix is a prediction for the matching entry of
the binary truth matrix. Thresholds sweep the unique score values; gains are
baselined on the positive prior pi:

    precision_gain = (prec - pi) / ((1 - pi) prec)
    recall_gain    = (rec - pi) / ((1 - pi) rec)

Raw gains are kept for export; the area uses points clipped to [0, 1]^2.
"""

from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid

from src.application.common.errors import ShapeError


@dataclass(frozen=True, eq=False)
class PrgCurve:
    thresholds: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    precision_gain: np.ndarray
    recall_gain: np.ndarray
    positive_prior: float
    auc: float

    def operating_points(self) -> np.ndarray:
        """Clipped (recall_gain, precision_gain) points, best precision gain per recall gain, ascending."""
        return _clipped_frontier(self.recall_gain, self.precision_gain)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "threshold": self.thresholds,
                "precision": self.precision,
                "recall": self.recall,
                "precision_gain": self.precision_gain,
                "recall_gain": self.recall_gain,
            }
        )


def _clipped_frontier(recall_gain: np.ndarray, precision_gain: np.ndarray) -> np.ndarray:
    rg = np.clip(np.nan_to_num(recall_gain, nan=0.0, neginf=0.0), 0.0, 1.0)
    pg = np.clip(np.nan_to_num(precision_gain, nan=0.0, neginf=0.0), 0.0, 1.0)
    frame = pd.DataFrame({"rg": rg, "pg": pg}).groupby("rg", sort=True)["pg"].max()
    return np.column_stack([frame.index.to_numpy(), frame.to_numpy()])


def prg_auc(points: np.ndarray) -> float:
    if points.size == 0:
        return 0.0
    rg, pg = points[:, 0], points[:, 1]
    if rg[0] > 0:
        rg = np.concatenate([[0.0], rg])
        pg = np.concatenate([[pg[0]], pg])
    return float(trapezoid(pg, rg))


def prg_curve(scores: np.ndarray, truth: np.ndarray, positive_prior: float | None = None) -> PrgCurve:
    scores = np.asarray(scores, dtype=np.float64)
    truth = np.asarray(truth).astype(bool)
    if scores.shape != truth.shape:
        raise ShapeError("prg_curve", scores.shape, truth.shape, detail="score and truth shapes differ")
    s = scores.reshape(-1)
    y = truth.reshape(-1)
    positives = int(y.sum())
    if positives == 0 or positives == y.size:
        raise ValueError("truth must contain at least one positive and one negative entry")
    pi = positives / y.size if positive_prior is None else float(positive_prior)
    if not 0 < pi < 1:
        raise ValueError(f"positive prior must lie in (0, 1), got {pi}")

    order = np.argsort(-s, kind="stable")
    s_sorted, y_sorted = s[order], y[order]
    tp = np.cumsum(y_sorted)
    fp = np.cumsum(~y_sorted)
    # last index of every run of equal scores: predictions are "score >= threshold"
    last = np.flatnonzero(np.r_[s_sorted[1:] != s_sorted[:-1], True])
    tp, fp = tp[last].astype(np.float64), fp[last].astype(np.float64)

    precision = tp / (tp + fp)
    recall = tp / positives
    with np.errstate(divide="ignore", invalid="ignore"):
        precision_gain = np.where(precision > 0, (precision - pi) / ((1 - pi) * precision), -np.inf)
        recall_gain = np.where(recall > 0, (recall - pi) / ((1 - pi) * recall), -np.inf)

    auc = prg_auc(_clipped_frontier(recall_gain, precision_gain))
    return PrgCurve(s_sorted[last], precision, recall, precision_gain, recall_gain, pi, auc)


def label_truth(labels: np.ndarray) -> np.ndarray:
    """Binary n x n matrix: 1 where two points share a label."""
    labels = np.asarray(labels)
    return labels[:, None] == labels[None, :]
