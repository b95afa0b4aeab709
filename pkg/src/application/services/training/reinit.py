from typing import Callable

import numpy as np

from src.application.services.model.kmeans import kmeans
from src.application.services.model.network import BoundNetwork, NeuralNystromModel
from src.application.services.seeds import derive_seed
from src.infrastructure.logging_config import get_logger

logger = get_logger("training.reinit")


def kmeans_reinit(model: NeuralNystromModel, data: np.ndarray, seed: int) -> NeuralNystromModel:
    """Replace W by k-means centroids of the current embeddings; M and the embedding are kept."""
    V = model.embeddings(data)
    clusters = kmeans(V, model.landmark_count, derive_seed(seed, "kmeans"))
    logger.info("Re-initialized %d landmarks from current embeddings", model.landmark_count)
    return model.with_landmarks(clusters.centroids)


def reinit_hook(seed: int, snapshot: Callable[[NeuralNystromModel], object] | None = None):
    """Adapter for ``train_finite``'s re-init callback on a data-bound model.

    ``snapshot`` receives the re-initialized model before training resumes.
    """

    def hook(network: BoundNetwork) -> BoundNetwork:
        model = kmeans_reinit(network.model, network.data, seed)
        if snapshot is not None:
            snapshot(model)
        return BoundNetwork(model, network.data)

    return hook
