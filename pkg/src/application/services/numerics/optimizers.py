"""AMSGrad and a reduce-on-plateau learning-rate scheduler.

Parameters live in plain ``dict[str, np.ndarray]`` maps keyed by the same names
the tape uses for its leaves, so ``backward()`` output plugs straight into
``amsgrad_step``.
"""

from dataclasses import dataclass, field

import numpy as np

from src.application.common.errors import ParameterKeyError
from src.infrastructure.logging_config import get_logger

logger = get_logger("numerics.optimizers")

MIN_LEARNING_RATE = 1e-8


@dataclass
class AmsGradState:
    first_moment: dict[str, np.ndarray]
    second_moment: dict[str, np.ndarray]
    max_second_moment: dict[str, np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def create(cls, params: dict[str, np.ndarray], beta1: float = 0.9, beta2: float = 0.999,
               eps: float = 1e-8) -> "AmsGradState":
        zeros = lambda: {k: np.zeros_like(v, dtype=np.float64) for k, v in params.items()}
        return cls(zeros(), zeros(), zeros(), 0, beta1, beta2, eps)

    @property
    def keys(self) -> set[str]:
        return set(self.first_moment)


def amsgrad_step(state: AmsGradState, params: dict[str, np.ndarray], grads: dict,
                 lr: float) -> dict[str, np.ndarray]:
    """One bias-corrected AMSGrad update. Returns new parameter arrays; ``state`` advances.

    ``grads`` values may be arrays or Tensors (anything exposing ``.values``).
    """
    if set(grads) != state.keys or set(params) != state.keys:
        missing = sorted(state.keys - set(grads))
        unknown = sorted((set(grads) | set(params)) - state.keys)
        raise ParameterKeyError(f"gradient keys do not match optimizer state: missing={missing} unknown={unknown}")
    if lr <= 0:
        raise ValueError(f"learning rate must be positive, got {lr}")

    state.step += 1
    b1, b2 = state.beta1, state.beta2
    bias1 = 1.0 - b1 ** state.step
    bias2 = 1.0 - b2 ** state.step

    updated: dict[str, np.ndarray] = {}
    for name, param in params.items():
        g = getattr(grads[name], "values", grads[name])
        m = b1 * state.first_moment[name] + (1.0 - b1) * g
        v = b2 * state.second_moment[name] + (1.0 - b2) * g * g
        v_max = np.maximum(state.max_second_moment[name], v)
        state.first_moment[name] = m
        state.second_moment[name] = v
        state.max_second_moment[name] = v_max
        updated[name] = param - lr * (m / bias1) / (np.sqrt(v_max / bias2) + state.eps)
    return updated


@dataclass
class PlateauScheduler:
    lr: float
    patience: int = 10
    cooldown: int = 10
    threshold: float = 1e-5
    factor: float = 0.5
    min_lr: float = MIN_LEARNING_RATE
    best: float = field(default=float("inf"))
    num_bad_epochs: int = 0
    cooldown_counter: int = 0
    reductions: int = 0

    @property
    def should_stop(self) -> bool:
        return self.lr <= self.min_lr


def scheduler_step(sched: PlateauScheduler, epoch_loss: float) -> tuple[float, bool]:
    """Feed one epoch loss. Returns ``(lr, stop)``; stop is true once lr <= 1e-8."""
    if epoch_loss < sched.best - sched.threshold:
        sched.best = epoch_loss
        sched.num_bad_epochs = 0
    else:
        sched.num_bad_epochs += 1

    if sched.cooldown_counter > 0:
        sched.cooldown_counter -= 1
        sched.num_bad_epochs = 0

    if sched.num_bad_epochs >= sched.patience:
        new_lr = max(sched.lr * sched.factor, sched.min_lr)
        if new_lr < sched.lr:
            logger.debug("Plateau: lr %.3e -> %.3e", sched.lr, new_lr)
            sched.lr = new_lr
            sched.reductions += 1
        sched.cooldown_counter = sched.cooldown
        sched.num_bad_epochs = 0

    return sched.lr, sched.should_stop
