"""Class-specific readouts on top of a frozen base model.

A task head only learns M_k; its features are h = sigma(M_k g_x, 1) with g_x the
(frozen) base features. Training reuses the finite-dataset loop with p_in
replaced by the label conditional over the labeled points.
"""

from dataclasses import dataclass

import numpy as np

from src.application.common.errors import LabelError, ShapeError
from src.application.services.kernels.conditional import build_supervised
from src.application.services.model.network import NeuralNystromModel
from src.application.services.model.nystrom import place_cell_activation
from src.application.services.numerics.autodiff import Tensor, matmul, transpose
from src.application.services.training.finite import LossHistory, TrainConfig, train_finite
from src.infrastructure.logging_config import get_logger

logger = get_logger("supervised.task_head")


@dataclass(frozen=True, eq=False)
class TaskHead:
    task_id: str
    M: np.ndarray

    def features(self, G: np.ndarray) -> np.ndarray:
        """h rows for base feature rows ``G`` (n, r)."""
        return place_cell_activation(Tensor(G) @ Tensor(self.M.T)).values

    def to_tensors(self) -> dict[str, np.ndarray]:
        return {f"task.{self.task_id}.M": self.M}


def task_heads_from_tensors(tensors: dict[str, np.ndarray]) -> list[TaskHead]:
    heads = []
    for name, value in tensors.items():
        if name.startswith("task.") and name.endswith(".M"):
            heads.append(TaskHead(name[len("task."):-len(".M")], np.array(value, dtype=np.float64)))
    return sorted(heads, key=lambda h: h.task_id)


def task_feature(head: TaskHead, base: NeuralNystromModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    h = head.features(base.features(np.atleast_2d(x)))
    return h[0] if x.ndim == 1 else h


@dataclass(frozen=True, eq=False)
class TaskNetwork:
    """Trainable M over constant base features of the labeled subset."""

    base_features: np.ndarray
    M: np.ndarray

    @property
    def size(self) -> int:
        return self.base_features.shape[0]

    def parameters(self) -> dict[str, np.ndarray]:
        return {"M": self.M.copy()}

    def forward(self, params: dict[str, Tensor], rows: np.ndarray) -> Tensor:
        return place_cell_activation(matmul(Tensor(self.base_features[rows]), transpose(params["M"])))

    def with_parameters(self, params: dict[str, np.ndarray]) -> "TaskNetwork":
        return TaskNetwork(self.base_features, np.array(params["M"], dtype=np.float64))

    def feature_matrix(self) -> np.ndarray:
        return self.forward({"M": Tensor(self.M)}, np.arange(self.size)).values


@dataclass
class TaskTrainResult:
    head: TaskHead
    history: LossHistory


def check_labels(labels: np.ndarray, expected_classes=None) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.size == 0:
        raise LabelError("no labeled samples")
    present = np.unique(labels)
    if expected_classes is not None:
        missing = sorted(set(np.asarray(expected_classes).tolist()) - set(present.tolist()))
        if missing:
            raise LabelError(f"class(es) {missing} have no labeled samples")
    if present.size < 2:
        raise LabelError(f"a task needs at least two classes, got {present.tolist()}")
    return present


def train_task(labeled: np.ndarray, labels: np.ndarray, base: NeuralNystromModel, data: np.ndarray,
               config: TrainConfig, task_id: str = "0", expected_classes=None) -> TaskTrainResult:
    labeled = np.asarray(labeled, dtype=np.intp)
    labels = np.asarray(labels)
    if labeled.shape[0] != labels.shape[0]:
        raise ShapeError("train_task", labeled.shape, labels.shape, detail="one label per labeled index")
    classes = check_labels(labels, expected_classes)

    G = base.features(np.asarray(data, dtype=np.float64)[labeled])
    p_task = build_supervised(labels)
    network = TaskNetwork(G, np.eye(G.shape[1]))
    logger.info("Training task '%s' on %d labeled points, %d classes", task_id, labeled.size, classes.size)
    result = train_finite(network, p_task, config)
    return TaskTrainResult(TaskHead(task_id, result.network.M), result.history)
