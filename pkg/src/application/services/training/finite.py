"""Stochastic optimization over a finite dataset with the accumulator neuron.

Every epoch walks all supported pairs (i, j) of p_in in a seeded random order,
grouped into batches. The first time a point i shows up in an epoch its current
feature g_i is added to both the running partition estimate ``c`` and the
next-epoch estimate ``c_prime``; only then is the batch loss evaluated. At the
end of the epoch ``c`` is replaced by ``c_prime``. Neither accumulator is ever
differentiated.
"""

from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np
import pandas as pd

from src.application.common.errors import ShapeError
from src.application.services.kernels.conditional import ConditionalMatrix
from src.application.services.numerics.autodiff import Tape, Tensor, backward, gather
from src.application.services.numerics.optimizers import AmsGradState, PlateauScheduler, amsgrad_step, scheduler_step
from src.application.services.seeds import derive_seed
from src.application.services.training.losses import batch_pair_loss, starved_denominators
from src.infrastructure.logging_config import get_logger

logger = get_logger("training.finite")


class FeatureNetwork(Protocol):
    """Anything producing place-cell features for rows of a fixed dataset."""

    @property
    def size(self) -> int: ...

    def parameters(self) -> dict[str, np.ndarray]: ...

    def forward(self, params: dict[str, Tensor], rows: np.ndarray) -> Tensor: ...

    def with_parameters(self, params: dict[str, np.ndarray]) -> "FeatureNetwork": ...

    def feature_matrix(self) -> np.ndarray: ...


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    learning_rate: float = 1e-3
    batch_size: int = 10
    seed: int = 0
    kmeans_reinit: bool = False
    patience: int = 10
    cooldown: int = 10
    discount: float = 0.9
    rho: float = 1.0
    episodes_per_epoch: int = 100

    def __post_init__(self):
        for name in ("epochs", "batch_size", "episodes_per_epoch"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate}")
        if not 0 < self.discount < 1:
            raise ValueError(f"discount must lie in (0, 1), got {self.discount}")
        if not self.rho > 0:
            raise ValueError(f"rho must be positive, got {self.rho}")


@dataclass
class AccumulatorState:
    c: np.ndarray
    c_prime: np.ndarray
    updated: np.ndarray
    encounter_order: list[int] = field(default_factory=list)
    encountered: np.ndarray | None = None

    @classmethod
    def create(cls, n: int, r: int) -> "AccumulatorState":
        return cls(np.zeros(r), np.zeros(r), np.zeros(n, dtype=bool), [], np.zeros((n, r)))

    def start_epoch(self):
        self.updated[:] = False
        self.encounter_order = []

    def encounter(self, rows: np.ndarray, values: np.ndarray):
        """Add g_i for each row not yet seen this epoch, in batch order."""
        for k, i in enumerate(rows):
            i = int(i)
            if self.updated[i]:
                continue
            self.updated[i] = True
            self.c += values[k]
            self.c_prime += values[k]
            self.encountered[i] = values[k]
            self.encounter_order.append(i)

    def end_epoch(self):
        self.c = self.c_prime
        self.c_prime = np.zeros_like(self.c)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    mean_loss: float
    learning_rate: float
    reinitialized: bool = False
    kl: float | None = None


@dataclass
class LossHistory:
    records: list[EpochRecord] = field(default_factory=list)

    def append(self, record: EpochRecord):
        self.records.append(record)

    @property
    def losses(self) -> np.ndarray:
        return np.array([r.mean_loss for r in self.records])

    @property
    def kls(self) -> np.ndarray:
        return np.array([np.nan if r.kl is None else r.kl for r in self.records])

    def __len__(self) -> int:
        return len(self.records)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(
            {
                "epoch": [r.epoch for r in self.records],
                "mean_loss": [r.mean_loss for r in self.records],
                "learning_rate": [r.learning_rate for r in self.records],
            }
        )
        if any(r.kl is not None for r in self.records):
            frame["kl"] = self.kls
        return frame


@dataclass
class TrainResult:
    network: FeatureNetwork
    history: LossHistory
    accumulator: AccumulatorState | np.ndarray
    starved_pairs: int = 0
    stopped_early: bool = False


ReinitHook = Callable[[FeatureNetwork], FeatureNetwork]
EpochMonitor = Callable[[FeatureNetwork], float]


def take_step(network: FeatureNetwork, params: dict[str, np.ndarray], state: AmsGradState, lr: float,
              loss_fn: Callable[[dict[str, Tensor]], Tensor]) -> tuple[dict[str, np.ndarray], float]:
    """Record ``loss_fn`` on a fresh tape, update with AMSGrad, re-apply parameter constraints."""
    with Tape() as tape:
        leaves = {name: Tensor.parameter(value, name) for name, value in params.items()}
        loss = loss_fn(leaves)
    grads = backward(tape, loss) if loss.node is not None else {}
    full = {name: grads[name].values if name in grads else np.zeros_like(value) for name, value in params.items()}
    stepped = amsgrad_step(state, params, full, lr)
    return network.with_parameters(stepped).parameters(), loss.item()


def train_finite(network: FeatureNetwork, p_in: ConditionalMatrix, config: TrainConfig,
                 reinit: ReinitHook | None = None, monitor: EpochMonitor | None = None) -> TrainResult:
    """Train on every supported pair of ``p_in``. ``monitor`` is evaluated once per epoch (KL tracking)."""
    if p_in.n != network.size:
        raise ShapeError("train_finite", (p_in.n, p_in.n), (network.size,), detail="p_in does not match the data")

    rows, cols, probs = p_in.pairs()
    params = network.parameters()
    state = AmsGradState.create(params)
    sched = PlateauScheduler(lr=config.learning_rate, patience=config.patience, cooldown=config.cooldown)
    rng = np.random.default_rng(derive_seed(config.seed, "shuffle"))
    acc: AccumulatorState | None = None
    history = LossHistory()
    starved = 0
    reinit_done = False
    stopped = False

    for epoch in range(1, config.epochs + 1):
        if acc is not None:
            acc.start_epoch()
        order = rng.permutation(rows.size)
        batch_losses: list[float] = []
        lr = sched.lr

        for start in range(0, order.size, config.batch_size):
            sel = order[start:start + config.batch_size]
            bi, bj, bw = rows[sel], cols[sel], probs[sel]
            touched, inverse = np.unique(np.concatenate([bi, bj]), return_inverse=True)
            at_i, at_j = inverse[:bi.size], inverse[bi.size:]

            def loss_fn(leaves: dict[str, Tensor]) -> Tensor:
                nonlocal acc, starved
                G = network.forward(leaves, touched)
                if acc is None:
                    acc = AccumulatorState.create(network.size, G.shape[1])
                acc.encounter(bi, G.values[at_i])
                G_i, G_j = gather(G, at_i), gather(G, at_j)
                starved += starved_denominators(G_i.values, acc.c)
                return batch_pair_loss(G_i, G_j, Tensor(acc.c), bw)

            params, loss = take_step(network, params, state, lr, loss_fn)
            batch_losses.append(loss)

        acc.end_epoch()
        network = network.with_parameters(params)
        mean_loss = float(np.mean(batch_losses))
        previous_reductions = sched.reductions
        new_lr, stop = scheduler_step(sched, mean_loss)

        reinitialized = False
        if config.kmeans_reinit and reinit is not None and not reinit_done and sched.reductions > previous_reductions:
            network = reinit(network)
            params = network.parameters()
            state = AmsGradState.create(params)
            reinit_done = reinitialized = True
            logger.debug("Epoch %d: k-means re-initialization of landmarks", epoch)

        kl = monitor(network) if monitor is not None else None
        history.append(EpochRecord(epoch, mean_loss, lr, reinitialized, kl))
        logger.info("Epoch %d/%d: mean loss %.6f, lr %.3e", epoch, config.epochs, mean_loss, lr)
        if stop:
            logger.info("Learning rate reached %.1e, stopping after epoch %d", new_lr, epoch)
            stopped = True
            break

    if starved:
        logger.warning("%d pair(s) hit the clamped partition denominator", starved)
    return TrainResult(network, history, acc, starved, stopped)
