"""KL diagnostics between the input conditional and the model's output conditional.

Feature matrices follow the column convention here: ``G`` is (r, n), column i is g_i.
"""

import numpy as np

from src.application.common.errors import ShapeError
from src.application.services.kernels.conditional import ConditionalMatrix

KL_EPS = 1e-12


def _safe_log(x: np.ndarray) -> np.ndarray:
    return np.log(np.maximum(x, 0.0) + KL_EPS)


def kl_eval(p_in: ConditionalMatrix, G: np.ndarray, c: np.ndarray | None = None) -> float:
    """sum_ij p(j|i) log(p(j|i) g_i.c / g_i.g_j); ``c`` defaults to the exact sum of all g."""
    G = np.asarray(G, dtype=np.float64)
    if G.ndim != 2 or G.shape[1] != p_in.n:
        raise ShapeError("kl_eval", G.shape, (None, p_in.n), detail="G must be r x n")
    c = G.sum(axis=1) if c is None else np.asarray(c, dtype=np.float64)
    if c.shape != (G.shape[0],):
        raise ShapeError("kl_eval", G.shape, c.shape, detail="c must be an r-vector")

    rows, cols, probs = p_in.pairs()
    F = G.T
    numerator = np.einsum("ij,ij->i", F[rows], F[cols])
    denominator = F[rows] @ c
    return float(np.sum(probs * (np.log(probs) + _safe_log(denominator) - _safe_log(numerator))))


def kl_rows(p: np.ndarray, q: np.ndarray) -> float:
    """sum over rows of KL(p_i || q_i) for dense row distributions; zero entries of p are skipped."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ShapeError("kl_rows", p.shape, q.shape)
    support = p > 0
    return float(np.sum(p[support] * (np.log(p[support]) - _safe_log(q[support]))))
