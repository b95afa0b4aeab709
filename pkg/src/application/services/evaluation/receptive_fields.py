"""Sparsity and locality of receptive fields, plus output-kernel summaries.

A receptive field is one row of G (r, n): the response of one cell over the
dataset.

sparsity(cell)  fraction of points where the response is below ``tau``
locality(cell)  response-weighted mean squared distance to the cell's weighted
                centroid, over the dataset's mean squared distance to its centroid
"""

from dataclasses import dataclass

import numpy as np
import pandas as pd

from src.application.common.errors import ShapeError
from src.infrastructure.logging_config import get_logger

logger = get_logger("evaluation.receptive_fields")


@dataclass(frozen=True, eq=False)
class RfMetrics:
    sparsity: np.ndarray
    locality: np.ndarray
    undefined: np.ndarray

    @property
    def mean_sparsity(self) -> float:
        return float(np.nanmean(self.sparsity)) if np.any(~self.undefined) else float("nan")

    @property
    def mean_locality(self) -> float:
        return float(np.nanmean(self.locality)) if np.any(~self.undefined) else float("nan")

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "cell": np.arange(self.sparsity.size),
                "sparsity": self.sparsity,
                "locality": self.locality,
                "undefined": self.undefined,
            }
        )


def rf_metrics(G: np.ndarray, coords: np.ndarray, tau: float = 1e-3) -> RfMetrics:
    G = np.asarray(G, dtype=np.float64)
    X = np.asarray(coords, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if G.ndim != 2 or G.shape[1] != X.shape[0]:
        raise ShapeError("rf_metrics", G.shape, X.shape, detail="G must be r x n over the n coordinates")

    n = X.shape[0]
    sparsity = np.count_nonzero(G < tau, axis=1) / n

    global_spread = float(np.mean(np.sum((X - X.mean(axis=0)) ** 2, axis=1)))
    mass = G.sum(axis=1)
    undefined = ~(mass > 0)
    weights = np.divide(G, mass[:, None], out=np.zeros_like(G), where=~undefined[:, None])
    centroids = weights @ X                                       # (r, d)
    sq = (X ** 2).sum(axis=1)[None, :] - 2 * centroids @ X.T + (centroids ** 2).sum(axis=1)[:, None]
    spread = np.sum(weights * np.maximum(sq, 0.0), axis=1)
    locality = spread / global_spread if global_spread > 0 else np.zeros_like(spread)

    sparsity = np.where(undefined, np.nan, sparsity)
    locality = np.where(undefined, np.nan, locality)
    if np.any(undefined):
        logger.warning("%d cell(s) never respond; metrics undefined for them", int(undefined.sum()))
    return RfMetrics(sparsity, locality, undefined)


def spectrum_energy(H: np.ndarray, k: int = 2) -> float:
    """Share of ||H||_F^2 carried by the top-k singular values."""
    s = np.linalg.svd(np.asarray(H, dtype=np.float64), compute_uv=False)
    total = float(np.sum(s ** 2))
    return float(np.sum(s[:k] ** 2)) / total if total > 0 else 0.0


def cross_manifold_mass(K: np.ndarray, components) -> float:
    """Fraction of output-kernel mass on pairs from different components."""
    K = np.asarray(K, dtype=np.float64)
    components = np.asarray(components)
    total = float(K.sum())
    if total <= 0:
        return 0.0
    across = components[:, None] != components[None, :]
    return float(K[across].sum()) / total
