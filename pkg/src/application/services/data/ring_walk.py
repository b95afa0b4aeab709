"""Random walk on a ring of positions, emitting 2-D coordinates as observations."""

from dataclasses import dataclass, field

import numpy as np

from src.application.common.errors import EmptyTrajectoryError
from src.application.services.data.synthetic import SyntheticSpec, gen_synthetic

DEFAULT_STEP_KERNEL = {-1: 0.5, 1: 0.5}


@dataclass(frozen=True, eq=False)
class RingWalkSource:
    size: int
    step_kernel: dict[int, float] = field(default_factory=lambda: dict(DEFAULT_STEP_KERNEL))
    length: int = 10
    radius: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.size < 3:
            raise ValueError(f"ring needs at least 3 positions, got {self.size}")
        if self.length < 1:
            raise EmptyTrajectoryError(f"trajectory length T must be >= 1, got {self.length}")
        probs = np.array(list(self.step_kernel.values()), dtype=np.float64)
        if probs.size == 0 or np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-9:
            raise ValueError(f"step kernel must be a probability distribution, got {self.step_kernel}")

    @property
    def observations(self) -> np.ndarray:
        return gen_synthetic(SyntheticSpec("ring-walk-environment", n=self.size, radius=self.radius)).points

    def transition_matrix(self) -> np.ndarray:
        P = np.zeros((self.size, self.size))
        for offset, prob in self.step_kernel.items():
            for s in range(self.size):
                P[s, (s + offset) % self.size] += prob
        return P

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        offsets = np.array(list(self.step_kernel), dtype=np.int64)
        probs = np.array(list(self.step_kernel.values()), dtype=np.float64)
        start = rng.integers(0, self.size)
        steps = rng.choice(offsets, size=self.length, p=probs / probs.sum())
        return np.mod(start + np.concatenate([[0], np.cumsum(steps)]), self.size)

    def trajectories(self, count: int):
        rng = np.random.default_rng(self.seed)
        for _ in range(count):
            yield self.sample(rng)


def ring_walk(size: int, step_kernel: dict[int, float] | None = None, seed: int = 0, length: int = 10) -> RingWalkSource:
    return RingWalkSource(size, dict(step_kernel or DEFAULT_STEP_KERNEL), length, seed=seed)
