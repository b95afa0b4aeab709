import os

import numpy as np
import pandas as pd
from sklearn.datasets import load_digits


def load_csv_dataset(path: str | os.PathLike, label_columns: int = 0) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Header row, one point per row, the last ``label_columns`` columns are labels."""
    frame = pd.read_csv(path)
    if label_columns < 0 or label_columns >= frame.shape[1]:
        raise ValueError(f"label_columns must leave at least one feature column, got {label_columns}")
    feature_cols = frame.columns[: frame.shape[1] - label_columns]
    label_cols = frame.columns[frame.shape[1] - label_columns:]
    X = frame[feature_cols].to_numpy(dtype=np.float64)
    labels = {str(col): frame[col].to_numpy() for col in label_cols}
    return X, labels


def load_digits_dataset() -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """The bundled 1797 x 64 handwritten digits, pixels scaled to [0, 1]."""
    digits = load_digits()
    return digits.data.astype(np.float64) / 16.0, {"digit": digits.target.astype(np.int64)}
