"""Seeded Lloyd's k-means with k-means++ seeding."""

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from src.application.common.errors import ClusteringError
from src.infrastructure.logging_config import get_logger

logger = get_logger("model.kmeans")


@dataclass(frozen=True)
class KMeansResult:
    centroids: np.ndarray
    labels: np.ndarray
    iterations: int


def kmeans_plusplus_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centroids = np.empty((k, X.shape[1]), dtype=np.float64)
    centroids[0] = X[rng.integers(0, n)]
    closest = cdist(X, centroids[:1], "sqeuclidean").reshape(-1)
    for i in range(1, k):
        total = closest.sum()
        if total > 0:
            next_idx = rng.choice(n, p=closest / total)
        else:
            # every point already coincides with a centroid
            next_idx = rng.integers(0, n)
        centroids[i] = X[next_idx]
        closest = np.minimum(closest, cdist(X, centroids[i:i + 1], "sqeuclidean").reshape(-1))
    return centroids


def kmeans(points: np.ndarray, r: int, seed: int, max_iter: int = 300, tol: float = 1e-8) -> KMeansResult:
    X = np.asarray(points, dtype=np.float64)
    n = X.shape[0]
    if r < 1 or r > n:
        raise ClusteringError(f"cannot form {r} clusters from {n} points")

    rng = np.random.default_rng(seed)
    centroids = kmeans_plusplus_init(X, r, rng)
    labels = np.zeros(n, dtype=np.intp)

    iteration = 0
    for iteration in range(1, max_iter + 1):
        dist = cdist(X, centroids, "sqeuclidean")
        labels = np.argmin(dist, axis=1)
        own = dist[np.arange(n), labels]

        new_centroids = np.empty_like(centroids)
        taken: set[int] = set()
        for j in range(r):
            mask = labels == j
            if np.any(mask):
                new_centroids[j] = X[mask].mean(axis=0)
                continue
            # Empty cluster: re-seed at the point farthest from its own centroid.
            order = np.argsort(-own, kind="stable")
            far = next((int(i) for i in order if int(i) not in taken), int(order[0]))
            taken.add(far)
            new_centroids[j] = X[far]
            logger.debug("k-means: re-seeded empty cluster %d at point %d", j, far)

        shift = float(np.max(np.linalg.norm(new_centroids - centroids, axis=1)))
        centroids = new_centroids
        if shift < tol:
            break

    labels = np.argmin(cdist(X, centroids, "sqeuclidean"), axis=1)
    return KMeansResult(centroids=centroids, labels=labels, iterations=iteration)
