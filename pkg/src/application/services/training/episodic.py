"""Online optimization over sampled trajectories with a forgetting accumulator.

Each episode samples tau = [x_0, ..., x_T], decays the accumulator with
beta_t = (1 - 1/t)^rho and adds g_{x_0}; then, for every t' = 1..T, one optimizer
step is taken on -discount^t' * log(g_{x_0}.g_{x_t'} / g_{x_0}.c).
"""

from typing import Protocol

import numpy as np

from src.application.common.errors import EmptyTrajectoryError, ShapeError
from src.application.services.numerics.autodiff import Tensor, gather
from src.application.services.numerics.optimizers import AmsGradState, PlateauScheduler, scheduler_step
from src.application.services.seeds import derive_seed
from src.application.services.training.finite import (
    EpochRecord,
    FeatureNetwork,
    LossHistory,
    TrainConfig,
    TrainResult,
    take_step,
)
from src.application.services.training.losses import batch_pair_loss
from src.infrastructure.logging_config import get_logger

logger = get_logger("training.episodic")


class EpisodeSource(Protocol):
    """Trajectory sampler over a fixed table of observation vectors."""

    @property
    def observations(self) -> np.ndarray: ...

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        """State indices [s_0, ..., s_T] of one trajectory, T >= 1."""
        ...


def forgetting_factor(t: int, rho: float) -> float:
    if t < 1:
        raise ValueError(f"episode counter starts at 1, got {t}")
    return (1.0 - 1.0 / t) ** rho


def episode_features(network: FeatureNetwork, params: dict[str, np.ndarray], rows: np.ndarray) -> np.ndarray:
    return network.forward({k: Tensor(v) for k, v in params.items()}, rows).values


def train_episodic(network: FeatureNetwork, source: EpisodeSource, config: TrainConfig) -> TrainResult:
    if network.size != source.observations.shape[0]:
        raise ShapeError("train_episodic", (network.size,), source.observations.shape,
                         detail="network is not bound to the source observations")

    params = network.parameters()
    state = AmsGradState.create(params)
    sched = PlateauScheduler(lr=config.learning_rate, patience=config.patience, cooldown=config.cooldown)
    rng = np.random.default_rng(derive_seed(config.seed, "episodes"))
    history = LossHistory()
    c: np.ndarray | None = None
    t = 0
    stopped = False

    for epoch in range(1, config.epochs + 1):
        lr = sched.lr
        episode_losses: list[float] = []
        for _ in range(config.episodes_per_epoch):
            t += 1
            trajectory = np.asarray(source.sample(rng), dtype=np.intp)
            if trajectory.size < 2:
                raise EmptyTrajectoryError(f"episode {t} produced {trajectory.size} state(s); need T >= 1")

            g0 = episode_features(network, params, trajectory[:1])[0]
            c = g0.copy() if c is None else forgetting_factor(t, config.rho) * c + g0
            c_const = Tensor(c)

            total = 0.0
            for step in range(1, trajectory.size):
                pair = np.array([trajectory[0], trajectory[step]])
                weight = np.array([config.discount ** step])

                def loss_fn(leaves: dict[str, Tensor]) -> Tensor:
                    G = network.forward(leaves, pair)
                    return batch_pair_loss(gather(G, [0]), gather(G, [1]), c_const, weight)

                params, loss = take_step(network, params, state, lr, loss_fn)
                total += loss
            episode_losses.append(total)

        network = network.with_parameters(params)
        mean_loss = float(np.mean(episode_losses))
        history.append(EpochRecord(epoch, mean_loss, lr))
        logger.info("Episodes %d-%d: mean loss %.6f, lr %.3e", t - config.episodes_per_epoch + 1, t, mean_loss, lr)
        _, stop = scheduler_step(sched, mean_loss)
        if stop:
            stopped = True
            break

    return TrainResult(network, history, c if c is not None else np.zeros(0), 0, stopped)
