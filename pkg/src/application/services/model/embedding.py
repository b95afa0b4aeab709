"""Two-layer PReLU embedding with an optional random-Fourier-feature front end."""

from dataclasses import dataclass

import numpy as np

from src.application.common.errors import ShapeError
from src.application.services.kernels.rff import rff_layer
from src.application.services.numerics.autodiff import Tensor, add, matmul, prelu

EMBEDDING_DIM = 100
PRELU_SLOPE_INIT = 0.25


@dataclass(frozen=True)
class EmbeddingShape:
    input_dim: int
    hidden_width: int = 100
    output_dim: int = EMBEDDING_DIM
    rff_half_count: int | None = None

    @property
    def first_layer_input(self) -> int:
        return 2 * self.rff_half_count if self.rff_half_count else self.input_dim


def _uniform(rng: np.random.Generator, fan_in: int, shape: tuple[int, ...]) -> np.ndarray:
    bound = np.sqrt(1.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


def init_embedding_params(shape: EmbeddingShape, rng: np.random.Generator,
                          rff_gamma: float | None = None) -> dict[str, np.ndarray]:
    fan1 = shape.first_layer_input
    params = {
        "A1": _uniform(rng, fan1, (fan1, shape.hidden_width)),
        "b1": _uniform(rng, fan1, (1, shape.hidden_width)),
        "A2": _uniform(rng, shape.hidden_width, (shape.hidden_width, shape.output_dim)),
        "b2": _uniform(rng, shape.hidden_width, (1, shape.output_dim)),
        "prelu_slope": np.full((1, 1), PRELU_SLOPE_INIT),
    }
    if shape.rff_half_count:
        params["rff_gamma"] = np.full((1, 1), float(rff_gamma if rff_gamma is not None else 1.0))
    return params


def embed(params: dict[str, Tensor], x: Tensor, rff_base: np.ndarray | None = None) -> Tensor:
    """v = PReLU(PReLU(u A1 + b1) A2 + b2) for a row batch ``x``; u = rff(x) when a base is given."""
    if len(x.shape) != 2:
        raise ShapeError("embed", x.shape, detail="expects a row batch")
    if rff_base is not None:
        u = rff_layer(x, rff_base, params["rff_gamma"])
    else:
        u = x
    if u.shape[1] != params["A1"].shape[0]:
        raise ShapeError("embed", x.shape, params["A1"].shape, detail="input dimension mismatch")
    slope = params["prelu_slope"]
    h = prelu(add(matmul(u, params["A1"]), params["b1"]), slope)
    return prelu(add(matmul(h, params["A2"]), params["b2"]), slope)
