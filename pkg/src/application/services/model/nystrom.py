"""Kernel layer, classical Nyström baseline and the Neural Nyström head.

Row-batch convention: embeddings ``V`` are (b, p), landmarks ``W`` are (r, p)
and every feature matrix comes back as (b, r), one feature vector per row.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from src.application.common.errors import NumericalError, ShapeError
from src.application.services.kernels.kernel_spec import KernelSpec, kernel_matrix
from src.application.services.numerics.autodiff import (
    Tensor,
    divide,
    exp,
    l2norm,
    matmul,
    mul,
    relu,
    scale,
    sub,
    tensor_sum,
    transpose,
)
from src.infrastructure.logging_config import get_logger

logger = get_logger("model.nystrom")

SIGMA_EPS = 1e-12
DEFAULT_REGULARIZATION = 1e-10


def kernel_layer(W: Tensor, V: Tensor, spec: KernelSpec) -> Tensor:
    """K(w_k, v) for every landmark k and row v, shape (b, r)."""
    if W.shape[1] != V.shape[1]:
        raise ShapeError("kernel_layer", W.shape, V.shape, detail="landmark dimension mismatch")
    cross = matmul(V, transpose(W))
    if spec.kind == "exp-dot":
        return exp(cross)
    v_sq = tensor_sum(mul(V, V), axis=1, keepdims=True)
    w_sq = transpose(tensor_sum(mul(W, W), axis=1, keepdims=True))
    sqdist = relu(sub(v_sq + w_sq, scale(cross, 2.0)))
    return exp(scale(sqdist, -spec.gamma))


def self_kernel_root(V: Tensor, spec: KernelSpec) -> Tensor | float:
    """sqrt(K(v, v)) per row: 1 for RBF, exp(||v||^2 / 2) for exp-dot."""
    if spec.kind == "rbf":
        return 1.0
    return exp(scale(tensor_sum(mul(V, V), axis=1, keepdims=True), 0.5))


def place_cell_activation(a: Tensor, lam: Tensor | float = 1.0) -> Tensor:
    """sigma(a, lam) = lam [a]_+ / (||[a]_+|| + eps), row-wise."""
    pos = relu(a)
    unit = divide(pos, l2norm(pos, axis=1) + SIGMA_EPS)
    if isinstance(lam, Tensor):
        return mul(unit, lam)
    return unit if lam == 1.0 else scale(unit, float(lam))


def neustrom_feature(W: Tensor, M: Tensor, V: Tensor, spec: KernelSpec) -> Tensor:
    """g = sigma(M k_{W,v}, sqrt(K(v,v))) for a row batch of embeddings."""
    if M.shape != (W.shape[0], W.shape[0]):
        raise ShapeError("neustrom_feature", W.shape, M.shape, detail="M must be r x r")
    k = kernel_layer(W, V, spec)
    return place_cell_activation(matmul(k, transpose(M)), self_kernel_root(V, spec))


@dataclass
class NystromBaseline:
    landmarks: np.ndarray
    spec: KernelSpec = field(default_factory=KernelSpec)
    eps: float = DEFAULT_REGULARIZATION
    _inv_sqrt: np.ndarray | None = field(default=None, init=False, repr=False)

    @property
    def inverse_sqrt(self) -> np.ndarray:
        """(K_WW + eps I)^(-1/2) by symmetric eigendecomposition; null directions are dropped."""
        if self._inv_sqrt is None:
            W = np.asarray(self.landmarks, dtype=np.float64)
            K = kernel_matrix(self.spec, W, W) + self.eps * np.eye(W.shape[0])
            K = 0.5 * (K + K.T)
            try:
                evals, evecs = linalg.eigh(K)
            except (linalg.LinAlgError, ValueError) as exc:
                cond = float(np.linalg.cond(K)) if np.all(np.isfinite(K)) else float("inf")
                raise NumericalError(f"eigendecomposition of K_WW failed: {exc}", condition_number=cond) from exc
            cutoff = max(float(evals.max()), 0.0) * W.shape[0] * np.finfo(np.float64).eps
            keep = evals > cutoff
            if not np.all(keep):
                logger.warning("Nystrom: %d near-singular direction(s) dropped (cond=%.3e)",
                               int((~keep).sum()), float(evals.max() / max(evals.min(), 1e-300)))
            inv_root = np.zeros_like(evals)
            inv_root[keep] = 1.0 / np.sqrt(evals[keep])
            self._inv_sqrt = (evecs * inv_root) @ evecs.T
        return self._inv_sqrt

    def features(self, V: np.ndarray) -> np.ndarray:
        """f_x = (K_WW + eps I)^(-1/2) k_{W,v} per row of ``V``."""
        V = np.atleast_2d(np.asarray(V, dtype=np.float64))
        if V.shape[1] != self.landmarks.shape[1]:
            raise ShapeError("nystrom_feature", self.landmarks.shape, V.shape, detail="landmark dimension mismatch")
        return kernel_matrix(self.spec, V, self.landmarks) @ self.inverse_sqrt


def nystrom_feature(baseline: NystromBaseline, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    out = baseline.features(v)
    return out[0] if v.ndim == 1 else out
