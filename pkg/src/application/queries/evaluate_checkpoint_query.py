import asyncio
from dataclasses import dataclass

from mediatorx import IQuery, IQueryHandler

from src.application.dtos.experiment_config_dto import EvaluationReportDto, ExperimentConfigDto
from src.application.services import experiment_pipeline as pipeline
from src.application.services.evaluation.prg import label_truth, prg_curve
from src.application.services.model.network import NeuralNystromModel
from src.application.services.supervised.task_head import task_heads_from_tensors
from src.infrastructure.checkpoint import load_checkpoint
from src.infrastructure.logging_config import get_logger
from src.infrastructure.monitoring import monitor_performance

logger = get_logger("evaluate_checkpoint_query")


@dataclass
class EvaluateCheckpointQuery(IQuery[EvaluationReportDto]):
    checkpoint: str
    config: ExperimentConfigDto


def _evaluate(query: EvaluateCheckpointQuery) -> EvaluationReportDto:
    config = query.config
    tensors = load_checkpoint(query.checkpoint)
    model = NeuralNystromModel.from_tensors(tensors)

    if config.training.mode == "episodic":
        X = pipeline.ring_source(config.data, config.episodic, config.output.seed).observations
        labels = {}
    else:
        dataset = pipeline.load_dataset(config.data, config.output.seed)
        X, labels = dataset.points, dataset.labels
    p_in = pipeline.input_conditional(config, X)
    G, kl, rf = pipeline.evaluate_features(model, X, p_in, config.output.rf_tau)

    scores: dict[str, float] = {}
    for head in task_heads_from_tensors(tensors):
        label_set = head.task_id.rsplit("_", 2)[0]
        if label_set not in labels:
            logger.warning("Task head '%s' has no matching label set in the dataset", head.task_id)
            continue
        H = head.features(G)
        scores[head.task_id] = prg_curve(H @ H.T, label_truth(labels[label_set])).auc

    return EvaluationReportDto(
        checkpoint=query.checkpoint,
        n=X.shape[0],
        landmarks=model.landmark_count,
        kl=kl,
        mean_sparsity=rf.mean_sparsity,
        mean_locality=rf.mean_locality,
        tasks=scores,
    )


class EvaluateCheckpointHandler(IQueryHandler[EvaluateCheckpointQuery, EvaluationReportDto]):
    """Re-score a saved checkpoint against the dataset its config describes."""

    @monitor_performance("experiment.eval")
    async def handle(self, query: EvaluateCheckpointQuery) -> EvaluationReportDto:
        return await asyncio.to_thread(_evaluate, query)
