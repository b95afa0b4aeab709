"""Random Fourier features for the RBF kernel.

Frequencies are drawn once as unit-variance Gaussian ``base`` samples and scaled
by sqrt(gamma), so omega ~ N(0, gamma I) and the draw stays fixed under the seed
when gamma is learned. Inner products of the features approximate the RBF
kernel of variance 1/gamma, exp(-gamma ||x - y||^2 / 2).
"""

from dataclasses import dataclass

import numpy as np

from src.application.common.errors import ShapeError
from src.application.services.kernels.kernel_spec import KernelSpec
from src.application.services.numerics.autodiff import Tensor, concat, cos, matmul, mul, sin, sqrt, transpose


@dataclass(frozen=True)
class RffBank:
    base: np.ndarray   # (D, d) unit-variance draws
    gamma: float = 1.0

    @property
    def half_count(self) -> int:
        return self.base.shape[0]

    @property
    def input_dim(self) -> int:
        return self.base.shape[1]

    @property
    def feature_dim(self) -> int:
        return 2 * self.half_count

    @property
    def frequencies(self) -> np.ndarray:
        return np.sqrt(self.gamma) * self.base

    def target_kernel(self) -> KernelSpec:
        return KernelSpec("rbf", self.gamma / 2.0)


def rff_sample(d: int, D: int, gamma: float, seed: int) -> RffBank:
    if D < 1:
        raise ValueError(f"RFF half-count must be >= 1, got {D}")
    if not gamma > 0:
        raise ValueError(f"RFF gamma must be positive, got {gamma}")
    rng = np.random.default_rng(seed)
    return RffBank(base=rng.standard_normal((D, d)), gamma=float(gamma))


def rff_map(bank: RffBank, x: np.ndarray) -> np.ndarray:
    """(1/sqrt(D)) [cos(omega_l . x) ..., sin(omega_l . x) ...] for a vector or row batch."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != bank.input_dim:
        raise ShapeError("rff_map", x.shape, bank.base.shape, detail="input dimension mismatch")
    z = x @ bank.frequencies.T
    return np.concatenate([np.cos(z), np.sin(z)], axis=-1) / np.sqrt(bank.half_count)


def rff_layer(x: Tensor, base: np.ndarray, gamma: Tensor) -> Tensor:
    """Tape version of ``rff_map`` over a row batch, differentiable in ``gamma``."""
    if x.shape[-1] != base.shape[1]:
        raise ShapeError("rff_layer", x.shape, base.shape, detail="input dimension mismatch")
    omega_t = mul(sqrt(gamma), transpose(Tensor(base)))   # (d, D)
    z = matmul(x, omega_t)
    return concat([cos(z), sin(z)], axis=1) * (1.0 / np.sqrt(base.shape[0]))
