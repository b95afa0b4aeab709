from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.spatial.distance import cdist

from src.application.common.errors import ShapeError

KernelKind = Literal["rbf", "exp-dot"]


@dataclass(frozen=True)
class KernelSpec:
    kind: KernelKind = "rbf"
    gamma: float = 1.0

    def __post_init__(self):
        if self.kind not in ("rbf", "exp-dot"):
            raise ValueError(f"Unknown kernel kind '{self.kind}'")
        if not self.gamma > 0:
            raise ValueError(f"Kernel gamma must be positive, got {self.gamma}")


def log_kernel_matrix(spec: KernelSpec, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    if X.shape[1] != Y.shape[1]:
        raise ShapeError("kernel", X.shape, Y.shape, detail="dimension mismatch")
    if spec.kind == "rbf":
        return -spec.gamma * cdist(X, Y, "sqeuclidean")
    return X @ Y.T


def kernel_matrix(spec: KernelSpec, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    return np.exp(log_kernel_matrix(spec, X, Y))


def kernel_eval(spec: KernelSpec, x, y) -> float:
    """rbf: exp(-gamma ||x - y||^2); exp-dot: exp(x^T y)."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.shape != y.shape:
        raise ShapeError("kernel_eval", x.shape, y.shape, detail="dimension mismatch")
    if spec.kind == "rbf":
        diff = x - y
        return float(np.exp(-spec.gamma * diff @ diff))
    return float(np.exp(x @ y))
