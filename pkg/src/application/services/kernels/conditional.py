"""Input conditional probabilities p_in(j | i) as sparse row-stochastic matrices.

Two sources: a row-normalized kernel over the data (optionally restricted to
each point's k nearest neighbors) and the label-based conditional used by
supervised tasks, uniform over the members of a point's class.
"""

from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components as _components
from scipy.spatial.distance import cdist

from src.application.common.errors import KernelUnderflowError, LabelError
from src.application.services.kernels.kernel_spec import KernelSpec, log_kernel_matrix

ROW_SUM_TOLERANCE = 1e-10
UNDERFLOW_FLOOR = 1e-300
_BLOCK_ROWS = 1024


@dataclass(frozen=True)
class ConditionalMatrix:
    matrix: csr_matrix

    def __post_init__(self):
        m = self.matrix
        if m.shape[0] != m.shape[1]:
            raise ValueError(f"conditional matrix must be square, got {m.shape}")
        if m.nnz and (m.data.min() <= 0 or m.data.max() > 1 + ROW_SUM_TOLERANCE):
            raise ValueError("stored probabilities must lie in (0, 1]")
        sums = np.asarray(m.sum(axis=1)).reshape(-1)
        bad = np.flatnonzero(np.abs(sums - 1.0) > ROW_SUM_TOLERANCE)
        if bad.size:
            raise ValueError(f"row {bad[0]} sums to {sums[bad[0]]!r}, not 1")

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    def row(self, i: int) -> list[tuple[int, float]]:
        start, end = self.matrix.indptr[i], self.matrix.indptr[i + 1]
        return list(zip(self.matrix.indices[start:end].tolist(), self.matrix.data[start:end].tolist()))

    def prob(self, i: int, j: int) -> float:
        return float(self.matrix[i, j])

    def pairs(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(rows, cols, probs) of every supported pair in row-major order."""
        rows = np.repeat(np.arange(self.n), np.diff(self.matrix.indptr))
        return rows, self.matrix.indices.astype(np.intp), self.matrix.data.copy()

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def entropy(self) -> np.ndarray:
        """Shannon entropy (nats) of every row distribution."""
        rows, _, probs = self.pairs()
        return np.bincount(rows, weights=-probs * np.log(probs), minlength=self.n)

    def to_frame(self) -> pd.DataFrame:
        rows, cols, probs = self.pairs()
        return pd.DataFrame({"row": rows, "col": cols, "prob": probs})


def _from_rows(n: int, rows: np.ndarray, cols: np.ndarray, probs: np.ndarray) -> ConditionalMatrix:
    keep = probs > 0
    m = csr_matrix((probs[keep], (rows[keep], cols[keep])), shape=(n, n))
    m.sort_indices()
    return ConditionalMatrix(m)


def _normalize_log_rows(log_k: np.ndarray, offset: int) -> np.ndarray:
    # Row-normalizing exp(log_k) is invariant to a per-row shift; shifting by the
    # row maximum keeps the retained mass >= 1 unless the inputs are degenerate.
    shifted = np.exp(log_k - np.max(log_k, axis=1, keepdims=True))
    mass = shifted.sum(axis=1)
    bad = np.flatnonzero(~(mass >= UNDERFLOW_FLOOR))
    if bad.size:
        raise KernelUnderflowError(offset + int(bad[0]), float(mass[bad[0]]))
    return shifted / mass[:, None]


def build_row_normalized(data: np.ndarray, spec: KernelSpec, knn: int | None = None) -> ConditionalMatrix:
    """p(j|i) = K(x_i, x_j) / sum_z K(x_i, x_z) over the retained support.

    Without ``knn`` the support is every point, self included. With ``knn`` it is
    the ``knn`` nearest neighbors of i (self excluded, ties to the lower index).
    """
    X = np.asarray(data, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"data must be an n x d matrix, got shape {X.shape}")
    n = X.shape[0]
    if n < 2:
        raise ValueError("need at least two points")
    if knn is not None and not 1 <= knn < n:
        raise ValueError(f"knn must lie in [1, {n - 1}], got {knn}")

    row_parts, col_parts, prob_parts = [], [], []
    for start in range(0, n, _BLOCK_ROWS):
        block = X[start:start + _BLOCK_ROWS]
        local_rows = np.arange(block.shape[0])
        log_k = log_kernel_matrix(spec, block, X)
        if knn is None:
            cols = np.broadcast_to(np.arange(n), log_k.shape)
        else:
            dist = cdist(block, X, "sqeuclidean")
            dist[local_rows, start + local_rows] = np.inf
            cols = np.argsort(dist, axis=1, kind="stable")[:, :knn]
            log_k = np.take_along_axis(log_k, cols, axis=1)
        probs = _normalize_log_rows(log_k, start)
        row_parts.append(np.repeat(start + local_rows, cols.shape[1]))
        col_parts.append(np.asarray(cols).reshape(-1))
        prob_parts.append(probs.reshape(-1))

    return _from_rows(n, np.concatenate(row_parts), np.concatenate(col_parts), np.concatenate(prob_parts))


def build_supervised(labels) -> ConditionalMatrix:
    """p(j|i) = 1/#class(i) when class(j) == class(i), else 0."""
    labels = np.asarray(labels)
    if labels.size == 0:
        raise LabelError("empty label array")
    n = labels.shape[0]
    classes, inverse, counts = np.unique(labels, return_inverse=True, return_counts=True)
    row_parts, col_parts, prob_parts = [], [], []
    for c in range(classes.size):
        members = np.flatnonzero(inverse == c)
        row_parts.append(np.repeat(members, members.size))
        col_parts.append(np.tile(members, members.size))
        prob_parts.append(np.full(members.size * members.size, 1.0 / counts[c]))
    return _from_rows(n, np.concatenate(row_parts), np.concatenate(col_parts), np.concatenate(prob_parts))


def connected_components(p_in: ConditionalMatrix) -> np.ndarray:
    """Component id per point over the (weakly connected) support graph."""
    _, component = _components(p_in.matrix, directed=True, connection="weak")
    return component
