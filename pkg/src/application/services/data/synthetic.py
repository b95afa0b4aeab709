"""Synthetic point clouds: one circle, a square lattice, two concentric circles, ring positions."""

from dataclasses import dataclass, field
from typing import Literal

import numpy as np

SyntheticKind = Literal["one-circle", "square-grid", "two-circles", "ring-walk-environment"]

DEFAULT_SIZES = {"one-circle": 500, "square-grid": 32, "two-circles": 250, "ring-walk-environment": 20}


@dataclass(frozen=True)
class SyntheticSpec:
    kind: SyntheticKind
    n: int | None = None          # points (per circle for two-circles), lattice side for square-grid
    radius: float = 1.0
    outer_radius: float = 2.0
    spacing: float = 1.0
    noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in DEFAULT_SIZES:
            raise ValueError(f"Unknown synthetic kind '{self.kind}'")
        if self.size < 2:
            raise ValueError(f"synthetic size must be >= 2, got {self.size}")
        if self.noise < 0:
            raise ValueError(f"noise must be >= 0, got {self.noise}")
        if self.kind == "two-circles" and not self.outer_radius > self.radius:
            raise ValueError("two-circles needs outer_radius > radius")

    @property
    def size(self) -> int:
        return self.n if self.n is not None else DEFAULT_SIZES[self.kind]


@dataclass(frozen=True, eq=False)
class SyntheticDataset:
    points: np.ndarray
    labels: dict[str, np.ndarray] = field(default_factory=dict)


def _circle(count: int, radius: float) -> np.ndarray:
    angles = 2.0 * np.pi * np.arange(count) / count
    return radius * np.column_stack([np.cos(angles), np.sin(angles)])


def gen_synthetic(spec: SyntheticSpec) -> SyntheticDataset:
    rng = np.random.default_rng(spec.seed)
    labels: dict[str, np.ndarray] = {}
    m = spec.size

    if spec.kind in ("one-circle", "ring-walk-environment"):
        points = _circle(m, spec.radius)
    elif spec.kind == "square-grid":
        axis = spec.spacing * np.arange(m)
        gx, gy = np.meshgrid(axis, axis, indexing="ij")
        points = np.column_stack([gx.reshape(-1), gy.reshape(-1)])
    else:
        points = np.vstack([_circle(m, spec.radius), _circle(m, spec.outer_radius)])
        labels["circle"] = np.repeat([0, 1], m)
        # each circle cut in two halves by the horizontal axis, the lower half (angle >= pi) is 1; the task crosses circles
        angles = 2.0 * np.pi * np.arange(m) / m
        half = (angles >= np.pi).astype(np.int64)
        labels["half"] = np.concatenate([half, half])

    if spec.noise > 0:
        points = points + rng.normal(0.0, spec.noise, size=points.shape)
    return SyntheticDataset(points, labels)
