"""Central finite-difference checks for tape gradients."""

from typing import Callable

import numpy as np

from src.application.services.numerics.autodiff import Tape, Tensor, backward

LossFn = Callable[[dict[str, Tensor]], Tensor]


def analytic_gradient(loss_fn: LossFn, params: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    with Tape(check_finite=True) as tape:
        leaves = {name: Tensor.parameter(value, name) for name, value in params.items()}
        loss = loss_fn(leaves)
    grads = backward(tape, loss)
    return {name: grads[name].values if name in grads else np.zeros_like(value)
            for name, value in params.items()}


def numerical_gradient(loss_fn: LossFn, params: dict[str, np.ndarray], h: float = 1e-5) -> dict[str, np.ndarray]:
    def evaluate(values: dict[str, np.ndarray]) -> float:
        return loss_fn({name: Tensor(v) for name, v in values.items()}).item()

    out: dict[str, np.ndarray] = {}
    for name, value in params.items():
        grad = np.zeros_like(value, dtype=np.float64)
        for idx in np.ndindex(*value.shape):
            shifted = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
            shifted[name][idx] = value[idx] + h
            plus = evaluate(shifted)
            shifted[name][idx] = value[idx] - h
            minus = evaluate(shifted)
            grad[idx] = (plus - minus) / (2.0 * h)
        out[name] = grad
    return out


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> float:
    # max-norm of the difference, relative to the larger of the two gradients
    if not analytic.size:
        return 0.0
    scale = max(float(np.max(np.abs(analytic))), float(np.max(np.abs(numeric))), floor)
    return float(np.max(np.abs(analytic - numeric))) / scale


def gradcheck(loss_fn: LossFn, params: dict[str, np.ndarray], h: float = 1e-5) -> float:
    """Largest relative error between tape and central-difference gradients."""
    analytic = analytic_gradient(loss_fn, params)
    numeric = numerical_gradient(loss_fn, params, h=h)
    return max((relative_error(analytic[k], numeric[k]) for k in params), default=0.0)
