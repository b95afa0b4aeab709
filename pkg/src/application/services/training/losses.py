import numpy as np

from src.application.services.numerics.autodiff import Tensor, dot, log, mul, sub, tensor_sum

LOSS_EPS = 1e-12


def pair_loss(g_i: Tensor, g_j: Tensor, c: Tensor, weight: float) -> Tensor:
    """-weight * log((g_i.g_j + eps) / (g_i.c + eps)); ``c`` must be a constant tensor."""
    if c.grad_enabled:
        raise ValueError("the accumulator must not carry gradients")
    ratio = sub(log(dot(g_i, g_j) + LOSS_EPS), log(dot(g_i, c) + LOSS_EPS))
    return ratio * (-float(weight))


def batch_pair_loss(G_i: Tensor, G_j: Tensor, c: Tensor, weights: np.ndarray) -> Tensor:
    """Sum of ``pair_loss`` over the rows of a batch; ``G_i``/``G_j`` are (b, r)."""
    if c.grad_enabled:
        raise ValueError("the accumulator must not carry gradients")
    c_rows = Tensor(np.broadcast_to(c.values.reshape(1, -1), G_i.shape))
    ratio = sub(log(dot(G_i, G_j) + LOSS_EPS), log(dot(G_i, c_rows) + LOSS_EPS))
    w = Tensor(-np.asarray(weights, dtype=np.float64).reshape(-1, 1))
    return tensor_sum(mul(ratio, w))


def starved_denominators(G_i: np.ndarray, c: np.ndarray) -> int:
    """Pairs whose g_i.c sits at or below the log floor (loss kept finite by the clamp)."""
    return int(np.count_nonzero(G_i @ c <= LOSS_EPS))
