"""The full Neural Nyström network: embedding + kernel layer + place-cell head.

All trainable arrays live in one named parameter map so the tape, the
optimizer and the checkpoint container share the same keys.
"""

from dataclasses import dataclass, field

import numpy as np

from src.application.common.errors import CheckpointFormatError, ShapeError
from src.application.services.kernels.kernel_spec import KernelSpec
from src.application.services.kernels.rff import rff_layer, rff_sample
from src.application.services.model.embedding import EmbeddingShape, embed, init_embedding_params
from src.application.services.model.kmeans import kmeans
from src.application.services.model.nystrom import neustrom_feature
from src.application.services.numerics.autodiff import Tensor
from src.application.services.seeds import derive_seed
from src.infrastructure.logging_config import get_logger

logger = get_logger("model.network")

MIN_RFF_GAMMA = 1e-8
_FORWARD_BLOCK = 4096
_KERNEL_CODES = {"rbf": 0.0, "exp-dot": 1.0}


@dataclass(frozen=True)
class ModelConfig:
    landmarks: int
    hidden_width: int = 100
    embedding_dim: int = 100
    rff_half_count: int | None = None
    rff_gamma: float = 1.0
    output_kernel: KernelSpec = field(default_factory=KernelSpec)


@dataclass(frozen=True)
class NeuralNystromModel:
    shape: EmbeddingShape
    output_kernel: KernelSpec
    params: dict[str, np.ndarray]
    rff_base: np.ndarray | None = None

    @property
    def landmarks(self) -> np.ndarray:
        return self.params["W"]

    @property
    def readout(self) -> np.ndarray:
        return self.params["M"]

    @property
    def landmark_count(self) -> int:
        return self.params["W"].shape[0]

    def parameters(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.params.items()}

    def with_parameters(self, params: dict[str, np.ndarray]) -> "NeuralNystromModel":
        if set(params) != set(self.params):
            raise ShapeError("with_parameters", detail=f"expected keys {sorted(self.params)}, got {sorted(params)}")
        new = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
        if "rff_gamma" in new:
            new["rff_gamma"] = np.maximum(new["rff_gamma"], MIN_RFF_GAMMA)
        return NeuralNystromModel(self.shape, self.output_kernel, new, self.rff_base)

    def with_landmarks(self, W: np.ndarray) -> "NeuralNystromModel":
        params = self.parameters()
        if W.shape != params["W"].shape:
            raise ShapeError("with_landmarks", params["W"].shape, W.shape)
        params["W"] = np.array(W, dtype=np.float64)
        return self.with_parameters(params)

    def embed_forward(self, params: dict[str, Tensor], X: Tensor) -> Tensor:
        return embed(params, X, self.rff_base)

    def forward(self, params: dict[str, Tensor], X: Tensor) -> Tensor:
        """Place-cell features g for a row batch (recorded when a tape is active)."""
        V = self.embed_forward(params, X)
        return neustrom_feature(params["W"], params["M"], V, self.output_kernel)

    def _blocks(self, X: np.ndarray, fn) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.shape.input_dim:
            raise ShapeError("forward", X.shape, (None, self.shape.input_dim), detail="input dimension mismatch")
        const = {k: Tensor(v) for k, v in self.params.items()}
        parts = [fn(const, Tensor(X[s:s + _FORWARD_BLOCK])).values for s in range(0, X.shape[0], _FORWARD_BLOCK)]
        return np.concatenate(parts, axis=0)

    def embeddings(self, X: np.ndarray) -> np.ndarray:
        return self._blocks(X, self.embed_forward)

    def features(self, X: np.ndarray) -> np.ndarray:
        """(n, r) matrix whose rows are g_x."""
        return self._blocks(X, self.forward)

    def to_tensors(self) -> dict[str, np.ndarray]:
        tensors = {k: v for k, v in self.params.items()}
        if self.rff_base is not None:
            tensors["rff_base"] = self.rff_base
        tensors.update({
            "meta.input_dim": np.array(float(self.shape.input_dim)),
            "meta.hidden_width": np.array(float(self.shape.hidden_width)),
            "meta.embedding_dim": np.array(float(self.shape.output_dim)),
            "meta.rff_half_count": np.array(float(self.shape.rff_half_count or 0)),
            "meta.kernel_kind": np.array(_KERNEL_CODES[self.output_kernel.kind]),
            "meta.kernel_gamma": np.array(float(self.output_kernel.gamma)),
        })
        return tensors

    @classmethod
    def from_tensors(cls, tensors: dict[str, np.ndarray]) -> "NeuralNystromModel":
        try:
            meta = {k[len("meta."):]: float(np.asarray(v).reshape(-1)[0])
                    for k, v in tensors.items() if k.startswith("meta.")}
            half = int(meta["rff_half_count"]) or None
            shape = EmbeddingShape(
                input_dim=int(meta["input_dim"]),
                hidden_width=int(meta["hidden_width"]),
                output_dim=int(meta["embedding_dim"]),
                rff_half_count=half,
            )
            kind = next(k for k, code in _KERNEL_CODES.items() if code == meta["kernel_kind"])
            spec = KernelSpec(kind, meta["kernel_gamma"])
            names = ["A1", "b1", "A2", "b2", "prelu_slope", "W", "M"] + (["rff_gamma"] if half else [])
            params = {name: np.array(tensors[name], dtype=np.float64) for name in names}
            base = np.array(tensors["rff_base"], dtype=np.float64) if half else None
        except (KeyError, StopIteration) as exc:
            raise CheckpointFormatError(f"checkpoint is missing model tensor {exc}") from exc
        return cls(shape, spec, params, base)


def output_kernel(G: np.ndarray) -> np.ndarray:
    """Gram matrix g_x^T g_y of the rows of ``G``."""
    return G @ G.T


def init_model(data: np.ndarray, config: ModelConfig, seed: int) -> NeuralNystromModel:
    """Random embedding, W <- k-means of the untrained embeddings, M <- I."""
    X = np.asarray(data, dtype=np.float64)
    shape = EmbeddingShape(
        input_dim=X.shape[1],
        hidden_width=config.hidden_width,
        output_dim=config.embedding_dim,
        rff_half_count=config.rff_half_count,
    )
    base = None
    if config.rff_half_count:
        base = rff_sample(X.shape[1], config.rff_half_count, config.rff_gamma, derive_seed(seed, "rff")).base

    rng = np.random.default_rng(derive_seed(seed, "init"))
    params = init_embedding_params(shape, rng, config.rff_gamma)
    r = config.landmarks
    params["W"] = np.zeros((r, shape.output_dim))
    params["M"] = np.eye(r)
    model = NeuralNystromModel(shape, config.output_kernel, params, base)

    V = model.embeddings(X)
    clusters = kmeans(V, r, derive_seed(seed, "kmeans"))
    logger.info("Initialized model: n=%d input_dim=%d landmarks=%d rff=%s (k-means %d iterations)",
                X.shape[0], X.shape[1], r, config.rff_half_count or "off", clusters.iterations)
    return model.with_landmarks(clusters.centroids)


@dataclass(frozen=True)
class BoundNetwork:
    """A model bound to its dataset so training can address points by row index."""

    model: NeuralNystromModel
    data: np.ndarray

    @property
    def size(self) -> int:
        return self.data.shape[0]

    def parameters(self) -> dict[str, np.ndarray]:
        return self.model.parameters()

    def forward(self, params: dict[str, Tensor], rows: np.ndarray) -> Tensor:
        return self.model.forward(params, Tensor(self.data[rows]))

    def with_parameters(self, params: dict[str, np.ndarray]) -> "BoundNetwork":
        return BoundNetwork(self.model.with_parameters(params), self.data)

    def feature_matrix(self) -> np.ndarray:
        return self.model.features(self.data)


@dataclass(frozen=True)
class RffFeatureNetwork:
    """RFF map alone with only gamma trainable; pre-trains the bandwidth with the same loss."""

    base: np.ndarray
    data: np.ndarray
    gamma: float = 1.0

    @property
    def size(self) -> int:
        return self.data.shape[0]

    def parameters(self) -> dict[str, np.ndarray]:
        return {"rff_gamma": np.full((1, 1), self.gamma)}

    def forward(self, params: dict[str, Tensor], rows: np.ndarray) -> Tensor:
        return rff_layer(Tensor(self.data[rows]), self.base, params["rff_gamma"])

    def with_parameters(self, params: dict[str, np.ndarray]) -> "RffFeatureNetwork":
        gamma = max(float(np.asarray(params["rff_gamma"]).reshape(-1)[0]), MIN_RFF_GAMMA)
        return RffFeatureNetwork(self.base, self.data, gamma)

    def feature_matrix(self) -> np.ndarray:
        const = {"rff_gamma": Tensor(np.full((1, 1), self.gamma))}
        return self.forward(const, np.arange(self.size)).values
