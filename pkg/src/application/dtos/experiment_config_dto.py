"""Experiment configuration, one model per config-file section.

Values arrive as strings from the sectioned properties file (or as JSON values
from a manifest); pydantic's lax coercion turns them into numbers and booleans.
Cross-field rules live on ``ExperimentConfigDto`` and report every violation at
once.
"""

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

SYNTHETIC_SIZES = {"one-circle": 500, "square-grid": 32 * 32, "two-circles": 500, "ring-walk": 20}
DIGITS_SIZE = 1797
SYNTHETIC_LABELS = {"two-circles": ("circle", "half")}


def _split_list(value):
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DataConfigDto(_Section):
    source: Literal["one-circle", "square-grid", "two-circles", "ring-walk", "digits", "idx", "csv"]
    n: int | None = Field(default=None, ge=2, description="points (per circle for two-circles) or grid side")
    radius: float = Field(default=1.0, gt=0)
    outer_radius: float = Field(default=2.0, gt=0)
    spacing: float = Field(default=1.0, gt=0)
    noise: float = Field(default=0.0, ge=0)
    path: str | None = None
    labels_path: str | None = None
    label_columns: int = Field(default=0, ge=0)
    limit: int | None = Field(default=None, ge=2, description="random subset size (e.g. 10^4 MNIST points)")

    def known_size(self) -> int | None:
        """Point count when it is known without touching the disk."""
        if self.source == "square-grid":
            side = self.n if self.n is not None else 32
            size = side * side
        elif self.source == "two-circles":
            size = 2 * (self.n if self.n is not None else 250)
        elif self.source in SYNTHETIC_SIZES:
            size = self.n if self.n is not None else SYNTHETIC_SIZES[self.source]
        elif self.source == "digits":
            size = DIGITS_SIZE
        else:
            return self.limit
        return min(size, self.limit) if self.limit else size

    def has_labels(self) -> bool:
        if self.source in ("two-circles", "digits"):
            return True
        if self.source == "idx":
            return self.labels_path is not None
        if self.source == "csv":
            return self.label_columns > 0
        return False


class InputConfigDto(_Section):
    kernel: Literal["rbf", "exp-dot"] = "rbf"
    gamma: float = Field(default=1.0, gt=0)
    knn: int | None = Field(default=None, ge=1)


class EmbeddingConfigDto(_Section):
    rff: bool = False
    rff_count: int = Field(default=100, ge=1, description="RFF half-count D")
    rff_gamma: float = Field(default=1.0, gt=0)
    pretrain_rff_epochs: int = Field(default=0, ge=0)
    hidden_width: int = Field(default=100, ge=1)
    embedding_dim: int = Field(default=100, ge=1)


class ModelConfigDto(_Section):
    r: int = Field(ge=1, description="landmark count")
    output_kernel: Literal["rbf", "exp-dot"] = "rbf"
    output_gamma: float = Field(default=1.0, gt=0)


class TrainingConfigDto(_Section):
    mode: Literal["unsupervised", "supervised", "episodic"] = "unsupervised"
    epochs: int = Field(default=100, ge=1)
    learning_rate: float = Field(default=1e-3, gt=0)
    batch_size: int = Field(default=10, ge=1)
    kmeans_reinit: bool = False
    patience: int = Field(default=10, ge=0)
    cooldown: int = Field(default=10, ge=0)
    track_kl: bool = Field(default=False, description="record the KL diagnostic after every epoch")


class SupervisedConfigDto(_Section):
    tasks: list[str] = Field(default_factory=list, description="label sets to train heads for; empty = all")
    fractions: list[float] = Field(default_factory=lambda: [0.1])
    trials: int = Field(default=10, ge=1)
    epochs: int = Field(default=100, ge=1)
    learning_rate: float = Field(default=1e-3, gt=0)
    batch_size: int = Field(default=100, ge=1)
    nmf_iterations: int = Field(default=500, ge=1)
    svm_points: str | None = None

    @field_validator("tasks", "fractions", mode="before")
    @classmethod
    def _comma_lists(cls, value):
        return _split_list(value)

    @field_validator("fractions")
    @classmethod
    def _fractions_in_range(cls, value: list[float]) -> list[float]:
        bad = [f for f in value if not 0 < f < 1]
        if bad:
            raise ValueError(f"label fractions must lie in (0, 1), got {bad}")
        return value


class EpisodicConfigDto(_Section):
    step_kernel: dict[int, float] = Field(default_factory=lambda: {-1: 0.5, 1: 0.5})
    length: int = Field(default=10, ge=1)
    discount: float = Field(default=0.9, gt=0, lt=1)
    rho: float = Field(default=1.0, gt=0)
    episodes: int = Field(default=2000, ge=1)
    episodes_per_epoch: int = Field(default=100, ge=1)

    @field_validator("step_kernel", mode="before")
    @classmethod
    def _parse_kernel(cls, value):
        # "-1:0.5, 1:0.5"
        if isinstance(value, str):
            kernel = {}
            for item in _split_list(value):
                offset, _, prob = item.partition(":")
                if not prob:
                    raise ValueError(f"step kernel entries look like 'offset:prob', got {item!r}")
                kernel[int(offset)] = float(prob)
            return kernel
        return value

    @field_validator("step_kernel")
    @classmethod
    def _kernel_is_distribution(cls, value: dict[int, float]) -> dict[int, float]:
        if not value or any(p < 0 for p in value.values()) or abs(sum(value.values()) - 1.0) > 1e-9:
            raise ValueError("step kernel probabilities must be nonnegative and sum to 1")
        return value


class OutputConfigDto(_Section):
    dir: str = "runs/experiment"
    seed: int = Field(default=0, ge=0, lt=2**64)
    rf_tau: float = Field(default=1e-3, gt=0)
    heatmaps: bool = True
    max_workers: int = Field(default=4, ge=1)


class ExperimentConfigDto(_Section):
    data: DataConfigDto
    input: InputConfigDto = Field(default_factory=InputConfigDto)
    embedding: EmbeddingConfigDto = Field(default_factory=EmbeddingConfigDto)
    model: ModelConfigDto
    training: TrainingConfigDto = Field(default_factory=TrainingConfigDto)
    supervised: SupervisedConfigDto | None = None
    episodic: EpisodicConfigDto | None = None
    output: OutputConfigDto = Field(default_factory=OutputConfigDto)

    @model_validator(mode="after")
    def _cross_field(self) -> "ExperimentConfigDto":
        problems: list[str] = []
        mode = self.training.mode
        n = self.data.known_size()

        if n is not None and self.model.r > n:
            problems.append(f"model.r: {self.model.r} landmarks exceed the {n} available points")
        if n is not None and self.input.knn is not None and self.input.knn >= n:
            problems.append(f"input.knn: must be below the point count {n}")
        if self.data.source == "two-circles" and self.data.outer_radius <= self.data.radius:
            problems.append("data.outer_radius: must exceed data.radius")
        if self.data.source in ("idx", "csv") and not self.data.path:
            problems.append(f"data.path: required for source '{self.data.source}'")

        if mode == "supervised":
            if not self.data.has_labels():
                problems.append("data: supervised mode needs a label source")
            if self.supervised is None:
                problems.append("supervised: section required for supervised mode")
            known = SYNTHETIC_LABELS.get(self.data.source)
            if self.supervised is not None and known:
                unknown = sorted(set(self.supervised.tasks) - set(known))
                if unknown:
                    problems.append(f"supervised.tasks: unknown label set(s) {unknown}, available {list(known)}")
        if mode == "episodic":
            if self.data.source != "ring-walk":
                problems.append("data.source: episodic mode needs the 'ring-walk' environment")
            if self.episodic is None:
                problems.append("episodic: section required for episodic mode")
        if self.data.source == "ring-walk" and mode != "episodic":
            problems.append("training.mode: the ring-walk environment only supports episodic training")
        if self.data.source == "ring-walk" and (self.data.n or SYNTHETIC_SIZES["ring-walk"]) < 3:
            problems.append("data.n: ring needs at least 3 positions")

        if problems:
            raise ValueError("\n".join(problems))
        return self


class ValidationReportDto(BaseModel):
    valid: bool
    errors: list[str] = Field(default_factory=list)
    config: dict | None = None


class TrialReportDto(BaseModel):
    task: str
    fraction: float
    trial: int
    seed: int
    accuracy: float
    prg_auc: float
    spectrum_energy: float


class RunReportDto(BaseModel):
    out_dir: str
    version: str
    mode: str
    final_loss: float | None = None
    kl: float | None = None
    mean_sparsity: float | None = None
    mean_locality: float | None = None
    artifacts: list[str] = Field(default_factory=list)
    trials: list[TrialReportDto] = Field(default_factory=list)


class EvaluationReportDto(BaseModel):
    checkpoint: str
    n: int
    landmarks: int
    kl: float
    mean_sparsity: float
    mean_locality: float
    tasks: dict[str, float] = Field(default_factory=dict, description="PRG AUC per task head")
