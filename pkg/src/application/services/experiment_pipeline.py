"""Pipeline stages shared by the run and eval handlers.

Each stage is a plain, synchronous function of the validated config so the
handlers can push whole stages onto worker threads.
"""

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from src.application.common.errors import ConfigValidationError, LabelError
from src.application.dtos.experiment_config_dto import DataConfigDto, ExperimentConfigDto
from src.application.services.data.idx import load_idx
from src.application.services.data.ring_walk import RingWalkSource, ring_walk
from src.application.services.data.splits import LabeledSplit, split_covering_classes
from src.application.services.data.synthetic import SyntheticSpec, gen_synthetic
from src.application.services.data.tabular import load_csv_dataset, load_digits_dataset
from src.application.services.evaluation.kl import kl_eval
from src.application.services.evaluation.matching import MatchedConfusion, accuracy_with_matching
from src.application.services.evaluation.nmf import nmf_ha
from src.application.services.evaluation.prg import PrgCurve, label_truth, prg_curve
from src.application.services.evaluation.receptive_fields import RfMetrics, rf_metrics, spectrum_energy
from src.application.services.kernels.conditional import ConditionalMatrix, build_row_normalized
from src.application.services.kernels.kernel_spec import KernelSpec
from src.application.services.kernels.rff import rff_sample
from src.application.services.model.network import (
    BoundNetwork,
    ModelConfig,
    NeuralNystromModel,
    RffFeatureNetwork,
    init_model,
)
from src.application.services.seeds import derive_seed
from src.application.services.supervised.task_head import TaskHead, train_task
from src.application.services.training.episodic import train_episodic
from src.application.services.training.finite import LossHistory, TrainConfig, train_finite
from src.application.services.training.reinit import reinit_hook
from src.infrastructure.checkpoint import save_checkpoint
from src.infrastructure.logging_config import get_logger

logger = get_logger("experiment_pipeline")

REINIT_CHECKPOINT = "model_reinit.neus"


@dataclass(frozen=True, eq=False)
class Dataset:
    points: np.ndarray
    labels: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.points.shape[0]


@dataclass(eq=False)
class FitResult:
    model: NeuralNystromModel
    history: LossHistory
    data: np.ndarray
    p_in: ConditionalMatrix | None = None
    accumulator: np.ndarray | None = None
    rff_pretrain: LossHistory | None = None


@dataclass(eq=False)
class TrialOutcome:
    task: str
    fraction: float
    trial: int
    split: LabeledSplit
    head: TaskHead
    prg: PrgCurve
    matched: MatchedConfusion
    energy: float


def load_dataset(cfg: DataConfigDto, seed: int) -> Dataset:
    if cfg.source in ("one-circle", "square-grid", "two-circles"):
        spec = SyntheticSpec(cfg.source, n=cfg.n, radius=cfg.radius, outer_radius=cfg.outer_radius,
                             spacing=cfg.spacing, noise=cfg.noise, seed=derive_seed(seed, "data"))
        synthetic = gen_synthetic(spec)
        dataset = Dataset(synthetic.points, synthetic.labels)
    elif cfg.source == "ring-walk":
        dataset = Dataset(ring_source(cfg, None, seed).observations)
    elif cfg.source == "digits":
        X, labels = load_digits_dataset()
        dataset = Dataset(X, labels)
    elif cfg.source == "idx":
        images = load_idx(cfg.path)
        X = images.reshape(images.shape[0], -1).astype(np.float64)
        labels = {"label": load_idx(cfg.labels_path)} if cfg.labels_path else {}
        if labels and labels["label"].shape[0] != X.shape[0]:
            raise LabelError(f"{labels['label'].shape[0]} labels for {X.shape[0]} images")
        dataset = Dataset(X, labels)
    else:
        X, labels = load_csv_dataset(cfg.path, cfg.label_columns)
        dataset = Dataset(X, labels)

    if cfg.limit and cfg.limit < dataset.n:
        rng = np.random.default_rng(derive_seed(seed, "subset"))
        keep = np.sort(rng.choice(dataset.n, size=cfg.limit, replace=False))
        dataset = Dataset(dataset.points[keep], {k: v[keep] for k, v in dataset.labels.items()})
    logger.info("Dataset '%s': %d points, dimension %d, label sets %s",
                cfg.source, dataset.n, dataset.points.shape[1], sorted(dataset.labels) or "none")
    return dataset


def ring_source(cfg: DataConfigDto, episodic, seed: int) -> RingWalkSource:
    size = cfg.n if cfg.n is not None else 20
    if episodic is None:
        return ring_walk(size, seed=derive_seed(seed, "episodes"))
    return RingWalkSource(size, dict(episodic.step_kernel), episodic.length, cfg.radius, derive_seed(seed, "episodes"))


def input_conditional(config: ExperimentConfigDto, X: np.ndarray) -> ConditionalMatrix:
    spec = KernelSpec(config.input.kernel, config.input.gamma)
    return build_row_normalized(X, spec, config.input.knn)


def model_config(config: ExperimentConfigDto, rff_gamma: float | None = None) -> ModelConfig:
    emb = config.embedding
    return ModelConfig(
        landmarks=config.model.r,
        hidden_width=emb.hidden_width,
        embedding_dim=emb.embedding_dim,
        rff_half_count=emb.rff_count if emb.rff else None,
        rff_gamma=rff_gamma if rff_gamma is not None else emb.rff_gamma,
        output_kernel=KernelSpec(config.model.output_kernel, config.model.output_gamma),
    )


def train_config(config: ExperimentConfigDto) -> TrainConfig:
    t = config.training
    cfg = TrainConfig(
        epochs=t.epochs,
        learning_rate=t.learning_rate,
        batch_size=t.batch_size,
        seed=config.output.seed,
        kmeans_reinit=t.kmeans_reinit,
        patience=t.patience,
        cooldown=t.cooldown,
    )
    if config.episodic is not None:
        e = config.episodic
        cfg = replace(cfg, discount=e.discount, rho=e.rho, episodes_per_epoch=e.episodes_per_epoch,
                      epochs=math.ceil(e.episodes / e.episodes_per_epoch) if t.mode == "episodic" else cfg.epochs)
    return cfg


def pretrain_rff_gamma(config: ExperimentConfigDto, X: np.ndarray, p_in: ConditionalMatrix) -> tuple[float, LossHistory]:
    """Fit only the RFF bandwidth on the input conditional, using the same base draw as the model."""
    emb = config.embedding
    seed = config.output.seed
    bank = rff_sample(X.shape[1], emb.rff_count, emb.rff_gamma, derive_seed(seed, "rff"))
    network = RffFeatureNetwork(bank.base, X, emb.rff_gamma)
    cfg = replace(train_config(config), epochs=emb.pretrain_rff_epochs, kmeans_reinit=False)
    result = train_finite(network, p_in, cfg)
    logger.info("RFF pre-training: gamma %.4g -> %.4g", emb.rff_gamma, result.network.gamma)
    return result.network.gamma, result.history


def check_dataset_fits(config: ExperimentConfigDto, dataset: Dataset) -> None:
    """Size checks the config validator cannot make for file-backed sources."""
    problems = []
    if config.model.r > dataset.n:
        problems.append(f"model.r: {config.model.r} landmarks exceed the {dataset.n} loaded points")
    if config.input.knn is not None and config.input.knn >= dataset.n:
        problems.append(f"input.knn: must be below the loaded point count {dataset.n}")
    if problems:
        raise ConfigValidationError(problems)


def fit_unsupervised(config: ExperimentConfigDto, dataset: Dataset) -> FitResult:
    check_dataset_fits(config, dataset)
    X = dataset.points
    seed = config.output.seed
    p_in = input_conditional(config, X)
    gamma, pretrain = None, None
    if config.embedding.rff and config.embedding.pretrain_rff_epochs > 0:
        gamma, pretrain = pretrain_rff_gamma(config, X, p_in)
    model = init_model(X, model_config(config, gamma), seed)
    monitor = (lambda net: kl_eval(p_in, net.feature_matrix().T)) if config.training.track_kl else None
    hook = reinit_hook(seed, snapshot=lambda m: save_checkpoint(Path(config.output.dir) / REINIT_CHECKPOINT, m.to_tensors()))
    result = train_finite(BoundNetwork(model, X), p_in, train_config(config), reinit=hook, monitor=monitor)
    return FitResult(result.network.model, result.history, X, p_in, result.accumulator.c, pretrain)


def fit_episodic(config: ExperimentConfigDto) -> FitResult:
    source = ring_source(config.data, config.episodic, config.output.seed)
    obs = source.observations
    model = init_model(obs, model_config(config), config.output.seed)
    result = train_episodic(BoundNetwork(model, obs), source, train_config(config))
    return FitResult(result.network.model, result.history, obs, None, result.accumulator)


def evaluate_features(model: NeuralNystromModel, X: np.ndarray, p_in: ConditionalMatrix | None,
                      tau: float) -> tuple[np.ndarray, float | None, RfMetrics]:
    """(n, r) features, KL against p_in (when given) and receptive-field metrics."""
    G = model.features(X)
    kl = kl_eval(p_in, G.T) if p_in is not None else None
    return G, kl, rf_metrics(G.T, X, tau)


def task_names(config: ExperimentConfigDto, dataset: Dataset) -> list[str]:
    requested = config.supervised.tasks if config.supervised else []
    names = requested or sorted(dataset.labels)
    missing = [name for name in names if name not in dataset.labels]
    if missing:
        raise LabelError(f"dataset has no label set(s) {missing}")
    return names


def run_task_trial(config: ExperimentConfigDto, model: NeuralNystromModel, dataset: Dataset, G: np.ndarray,
                   task: str, fraction: float, trial: int) -> TrialOutcome:
    sup = config.supervised
    seed = config.output.seed
    labels = dataset.labels[task]
    classes = np.unique(labels)
    split = split_covering_classes(labels, fraction, seed, trial)

    cfg = TrainConfig(epochs=sup.epochs, learning_rate=sup.learning_rate, batch_size=sup.batch_size,
                      seed=derive_seed(seed, f"task:{task}:{fraction}:{trial}"),
                      patience=config.training.patience, cooldown=config.training.cooldown)
    head = train_task(split.train, labels[split.train], model, dataset.points, cfg,
                      task_id=task, expected_classes=classes).head

    H = head.features(G[split.test])
    test_labels = labels[split.test]
    prg = prg_curve(H @ H.T, label_truth(test_labels))
    pred = nmf_ha(H.T, classes.size, sup.nmf_iterations, derive_seed(seed, f"nmf:{trial}"))
    matched = accuracy_with_matching(pred, test_labels)
    energy = spectrum_energy(head.features(G).T, classes.size)
    logger.info("Task '%s' %.0f%% trial %d: accuracy %.4f, PRG AUC %.4f, top-%d energy %.4f",
                task, 100 * fraction, trial, matched.accuracy, prg.auc, classes.size, energy)
    return TrialOutcome(task, fraction, trial, split, head, prg, matched, energy)
