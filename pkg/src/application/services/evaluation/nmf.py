"""NMF with hard assignment (NMF-HA) of points to their dominant component."""

from dataclasses import dataclass

import numpy as np

from src.infrastructure.logging_config import get_logger

logger = get_logger("evaluation.nmf")

NMF_EPS = 1e-12
PLATEAU = 1e-6


@dataclass(frozen=True, eq=False)
class NmfFactorization:
    U: np.ndarray          # (r, k)
    V: np.ndarray          # (k, n)
    errors: np.ndarray     # relative Frobenius error after every iteration
    labels: np.ndarray
    zero_columns: np.ndarray

    @property
    def reconstruction_error(self) -> float:
        return float(self.errors[-1]) if self.errors.size else float("nan")


def nmf(H: np.ndarray, k: int, iterations: int = 500, seed: int = 0) -> NmfFactorization:
    """Lee-Seung multiplicative updates for min ||H - UV||_F with U, V >= 0."""
    H = np.asarray(H, dtype=np.float64)
    if H.ndim != 2:
        raise ValueError(f"H must be a matrix, got shape {H.shape}")
    if np.any(H < 0):
        raise ValueError("H must be elementwise nonnegative")
    if k < 2:
        raise ValueError(f"NMF-HA needs k >= 2 components, got {k}")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")

    r, n = H.shape
    rng = np.random.default_rng(seed)
    scale = np.sqrt(max(H.mean(), NMF_EPS) / k)
    U = scale * rng.random((r, k))
    V = scale * rng.random((k, n))
    norm = max(np.linalg.norm(H), NMF_EPS)

    errors: list[float] = []
    for it in range(iterations):
        V *= (U.T @ H) / (U.T @ U @ V + NMF_EPS)
        U *= (H @ V.T) / (U @ (V @ V.T) + NMF_EPS)
        errors.append(float(np.linalg.norm(H - U @ V) / norm))
        if it > 0 and errors[-2] - errors[-1] < PLATEAU:
            break

    zero_columns = np.flatnonzero(~np.any(H > 0, axis=0))
    labels = np.argmax(V, axis=0)
    labels[zero_columns] = 0
    if zero_columns.size:
        logger.warning("NMF-HA: %d all-zero column(s) assigned to component 0", zero_columns.size)
    return NmfFactorization(U, V, np.array(errors), labels, zero_columns)


def nmf_ha(H: np.ndarray, k: int, iterations: int = 500, seed: int = 0) -> np.ndarray:
    return nmf(H, k, iterations, seed).labels
