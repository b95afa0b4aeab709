"""Run one configured experiment end to end and write its artifact directory.

Layout of ``output.dir``:

    manifest.json            resolved config, derived seeds, version, status
    loss_history.csv         epoch, mean_loss, learning_rate (+ kl when training.track_kl)
    model.neus               checkpoint (base model + task heads)
    model_reinit.neus        model as re-initialized by k-means (training.kmeans_reinit)
    output_kernel.csv/.pgm/.svg
    receptive_fields.csv/.pgm/.svg   (n x r, the transposed feature matrix)
    rf_metrics.csv
    supervised runs: prg_<task>_<pct>_<trial>.csv, confusion_<task>_<pct>_<trial>.csv, summary.csv
"""

import asyncio
from dataclasses import dataclass
from pathlib import Path

import pandas as pd
from mediatorx import ICommand, ICommandHandler

from src.application.dtos.experiment_config_dto import ExperimentConfigDto, RunReportDto, TrialReportDto
from src.application.services import experiment_pipeline as pipeline
from src.application.services.app_config_service import app_config
from src.application.services.model.network import output_kernel
from src.application.services.seeds import seed_table
from src.infrastructure import artifacts
from src.infrastructure.checkpoint import save_checkpoint
from src.infrastructure.logging_config import get_logger
from src.infrastructure.monitoring import add_breadcrumb, monitor_performance, tag_run

logger = get_logger("run_experiment_command")


@dataclass
class RunExperimentCommand(ICommand[RunReportDto]):
    config: ExperimentConfigDto
    config_source: str | None = None


def write_manifest(out: Path, config: ExperimentConfigDto, status: str, source: str | None) -> Path:
    trials = config.supervised.trials if config.supervised else 0
    extra = tuple(f"split:{t}" for t in range(trials)) + tuple(f"nmf:{t}" for t in range(trials))
    return artifacts.write_json(out / "manifest.json", {
        "version": app_config.get_version(),
        "status": status,
        "config_source": source,
        "config": config.model_dump(mode="json"),
        "seeds": {k: str(v) for k, v in seed_table(config.output.seed, extra).items()},
    })


def _pct(fraction: float) -> str:
    return f"{100 * fraction:g}"


class RunExperimentHandler(ICommandHandler[RunExperimentCommand, RunReportDto]):

    @monitor_performance("experiment.run")
    async def handle(self, command: RunExperimentCommand) -> RunReportDto:
        config = command.config
        out = Path(config.output.dir)
        out.mkdir(parents=True, exist_ok=True)
        stale = out / artifacts.FAILED_MARKER
        if stale.exists():
            stale.unlink()

        write_manifest(out, config, "running", command.config_source)
        try:
            report = await self._run(config, out)
        except Exception as e:
            artifacts.mark_failed(out, e)
            raise
        write_manifest(out, config, "complete", command.config_source)
        report.artifacts = sorted(p.name for p in out.iterdir() if p.is_file())
        return report

    async def _run(self, config: ExperimentConfigDto, out: Path) -> RunReportDto:
        mode = config.training.mode
        tag_run(mode, config.data.source, config.output.seed)
        add_breadcrumb(f"run {mode}", category="experiment", data={"out": str(out)})

        dataset = None
        if mode == "episodic":
            fit = await asyncio.to_thread(pipeline.fit_episodic, config)
        else:
            dataset = await asyncio.to_thread(pipeline.load_dataset, config.data, config.output.seed)
            fit = await asyncio.to_thread(pipeline.fit_unsupervised, config, dataset)

        G, kl, rf = await asyncio.to_thread(pipeline.evaluate_features, fit.model, fit.data, fit.p_in,
                                            config.output.rf_tau)
        kernel = output_kernel(G)

        artifacts.write_frame_csv(out / "loss_history.csv", fit.history.to_frame())
        if fit.rff_pretrain is not None:
            artifacts.write_frame_csv(out / "rff_pretrain_history.csv", fit.rff_pretrain.to_frame())
        artifacts.write_matrix_csv(out / "output_kernel.csv", kernel)
        artifacts.write_matrix_csv(out / "receptive_fields.csv", G)
        artifacts.write_frame_csv(out / "rf_metrics.csv", rf.to_frame())
        if config.output.heatmaps:
            artifacts.write_heatmaps(out, "output_kernel", kernel)
            artifacts.write_heatmaps(out, "receptive_fields", G)

        tensors = fit.model.to_tensors()
        report = RunReportDto(
            out_dir=str(out),
            version=app_config.get_version(),
            mode=mode,
            final_loss=float(fit.history.losses[-1]) if len(fit.history) else None,
            kl=kl,
            mean_sparsity=rf.mean_sparsity,
            mean_locality=rf.mean_locality,
        )

        if mode == "supervised":
            outcomes = await self._run_trials(config, fit, dataset, G)
            for outcome in outcomes:
                stem = f"{outcome.task}_{_pct(outcome.fraction)}_{outcome.trial}"
                artifacts.write_frame_csv(out / f"prg_{stem}.csv", outcome.prg.to_frame())
                artifacts.write_frame_csv(out / f"confusion_{stem}.csv", outcome.matched.to_frame(), index=True)
                tensors[f"task.{stem}.M"] = outcome.head.M
                report.trials.append(TrialReportDto(
                    task=outcome.task, fraction=outcome.fraction, trial=outcome.trial,
                    seed=outcome.split.trial_seed, accuracy=outcome.matched.accuracy,
                    prg_auc=outcome.prg.auc, spectrum_energy=outcome.energy,
                ))
            summary = self._summary(report.trials)
            artifacts.write_frame_csv(out / "summary.csv", summary)
            self._copy_svm_points(config, out)

        save_checkpoint(out / "model.neus", tensors)
        logger.info("Run complete: %s (final loss %s)", out, report.final_loss)
        return report

    async def _run_trials(self, config: ExperimentConfigDto, fit, dataset, G) -> list:
        sup = config.supervised
        semaphore = asyncio.Semaphore(config.output.max_workers)
        tasks = pipeline.task_names(config, dataset)

        async def one(task: str, fraction: float, trial: int):
            async with semaphore:
                return await asyncio.to_thread(pipeline.run_task_trial, config, fit.model, dataset, G,
                                               task, fraction, trial)

        jobs = [one(task, fraction, trial) for task in tasks for fraction in sup.fractions for trial in range(sup.trials)]
        return list(await asyncio.gather(*jobs))

    @staticmethod
    def _summary(trials: list[TrialReportDto]) -> pd.DataFrame:
        frame = pd.DataFrame([t.model_dump() for t in trials])
        grouped = frame.groupby(["task", "fraction"], sort=True)
        summary = grouped.agg(
            trials=("trial", "count"),
            accuracy_mean=("accuracy", "mean"),
            accuracy_std=("accuracy", lambda s: s.std(ddof=0)),
            prg_auc_mean=("prg_auc", "mean"),
            prg_auc_std=("prg_auc", lambda s: s.std(ddof=0)),
            spectrum_energy_mean=("spectrum_energy", "mean"),
        )
        return summary.reset_index()

    @staticmethod
    def _copy_svm_points(config: ExperimentConfigDto, out: Path):
        if config.supervised.svm_points:
            frame = pd.read_csv(config.supervised.svm_points)
            artifacts.write_frame_csv(out / "svm_points.csv", frame)
