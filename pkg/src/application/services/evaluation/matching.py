from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.optimize import linear_sum_assignment

from src.application.common.errors import LabelError, ShapeError


@dataclass(frozen=True, eq=False)
class MatchedConfusion:
    accuracy: float
    confusion: np.ndarray       # rows: true classes, columns: matched predicted components
    classes: np.ndarray
    mapping: dict

    def to_frame(self) -> pd.DataFrame:
        names = [str(c) for c in self.classes]
        return pd.DataFrame(self.confusion, index=pd.Index(names, name="true"), columns=names)


def accuracy_with_matching(pred, truth) -> MatchedConfusion:
    """Accuracy under the one-to-one component/class matching that maximizes the confusion trace."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise ShapeError("accuracy_with_matching", pred.shape, truth.shape)
    classes, t_idx = np.unique(truth, return_inverse=True)
    components, p_idx = np.unique(pred, return_inverse=True)
    k = classes.size
    if components.size > k:
        raise LabelError(f"{components.size} predicted labels for {k} classes")

    counts = np.zeros((k, k), dtype=np.int64)
    np.add.at(counts, (t_idx, p_idx), 1)
    true_rows, pred_cols = linear_sum_assignment(counts, maximize=True)

    # square problem: true_rows is 0..k-1, so column t holds the component matched to class t
    confusion = counts[:, pred_cols]
    mapping = {components[c].item(): classes[t].item() for t, c in zip(true_rows, pred_cols) if c < components.size}
    accuracy = float(np.trace(confusion)) / truth.size
    return MatchedConfusion(accuracy, confusion, classes, mapping)
