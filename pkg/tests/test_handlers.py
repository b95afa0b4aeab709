import json

import numpy as np
import pytest

from src.application.commands import run_experiment_command as run_module
from src.application.commands.export_heatmaps_command import ExportHeatmapsCommand
from src.application.commands.run_experiment_command import RunExperimentCommand, RunExperimentHandler
from src.application.dtos.experiment_config_dto import ExperimentConfigDto
from src.application.queries.evaluate_checkpoint_query import EvaluateCheckpointQuery
from src.application.queries.validate_config_query import ValidateConfigQuery
from src.cli.dependencies import get_mediator
from src.infrastructure.artifacts import FAILED_MARKER, write_matrix_csv
from src.infrastructure.checkpoint import checkpoint_digest, load_checkpoint


def _config(out_dir, **sections) -> ExperimentConfigDto:
    raw = {
        "data": {"source": "one-circle", "n": 30, "noise": 0.01},
        "input": {"gamma": 5},
        "embedding": {"hidden_width": 8, "embedding_dim": 6},
        "model": {"r": 5},
        "training": {"epochs": 2, "batch_size": 20},
        "output": {"dir": str(out_dir), "seed": 3},
    }
    for name, values in sections.items():
        raw[name] = {**raw.get(name, {}), **values}
    return ExperimentConfigDto.model_validate(raw)


@pytest.mark.asyncio
async def test_unsupervised_run_writes_artifacts(tmp_path):
    report = await RunExperimentHandler().handle(RunExperimentCommand(_config(tmp_path), "inline"))

    for name in ("manifest.json", "loss_history.csv", "model.neus", "output_kernel.csv", "output_kernel.pgm",
                 "output_kernel.svg", "receptive_fields.csv", "rf_metrics.csv"):
        assert name in report.artifacts
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["status"] == "complete"
    assert manifest["config_source"] == "inline"
    assert all(isinstance(v, str) for v in manifest["seeds"].values())
    assert report.kl is not None and report.kl >= 0
    assert report.mode == "unsupervised"
    assert not (tmp_path / FAILED_MARKER).exists()


@pytest.mark.asyncio
async def test_same_seed_gives_identical_artifacts(tmp_path):
    for name in ("a", "b"):
        await RunExperimentHandler().handle(RunExperimentCommand(_config(tmp_path / name)))
    assert (tmp_path / "a" / "output_kernel.csv").read_bytes() == (tmp_path / "b" / "output_kernel.csv").read_bytes()
    assert checkpoint_digest(tmp_path / "a" / "model.neus") == checkpoint_digest(tmp_path / "b" / "model.neus")


@pytest.mark.asyncio
async def test_failed_run_leaves_marker(tmp_path, monkeypatch):
    def explode(config, dataset):
        raise RuntimeError("diverged")

    monkeypatch.setattr(run_module.pipeline, "fit_unsupervised", explode)
    with pytest.raises(RuntimeError):
        await RunExperimentHandler().handle(RunExperimentCommand(_config(tmp_path)))

    assert (tmp_path / FAILED_MARKER).read_text() == "RuntimeError: diverged\n"
    assert json.loads((tmp_path / "manifest.json").read_text())["status"] == "running"


@pytest.mark.asyncio
async def test_supervised_run_and_checkpoint_evaluation(tmp_path):
    config = _config(
        tmp_path,
        data={"source": "two-circles", "n": 15},
        input={"knn": 3},
        model={"r": 4},
        training={"mode": "supervised", "epochs": 1},
        supervised={"tasks": "circle", "fractions": "0.5", "trials": 2, "epochs": 2, "batch_size": 10},
    )
    report = await get_mediator().send(RunExperimentCommand(config))

    assert [t.trial for t in report.trials] == [0, 1]
    for name in ("prg_circle_50_0.csv", "confusion_circle_50_1.csv", "summary.csv"):
        assert name in report.artifacts
    assert "task.circle_50_0.M" in load_checkpoint(tmp_path / "model.neus")

    evaluation = await get_mediator().send(EvaluateCheckpointQuery(str(tmp_path / "model.neus"), config))
    assert evaluation.n == 30
    assert evaluation.landmarks == 4
    assert set(evaluation.tasks) == {"circle_50_0", "circle_50_1"}
    assert all(0.0 <= auc <= 1.0 for auc in evaluation.tasks.values())


@pytest.mark.asyncio
async def test_episodic_run(tmp_path):
    config = _config(
        tmp_path,
        data={"source": "ring-walk", "n": 8, "noise": 0.0},
        model={"r": 3},
        training={"mode": "episodic"},
        episodic={"episodes": 6, "episodes_per_epoch": 3, "length": 3},
    )
    report = await RunExperimentHandler().handle(RunExperimentCommand(config))
    assert report.kl is None
    assert "receptive_fields.csv" in report.artifacts


@pytest.mark.asyncio
async def test_validate_query_reports_problems(tmp_path):
    path = tmp_path / "bad.conf"
    path.write_text("[data]\nsource = one-circle\nn = 5\n[model]\nr = 9\n")
    report = await get_mediator().send(ValidateConfigQuery(str(path)))
    assert not report.valid
    assert any("model.r" in e for e in report.errors)


@pytest.mark.asyncio
async def test_export_renders_heatmaps(tmp_path):
    source = write_matrix_csv(tmp_path / "kernel.csv", np.eye(3))
    written = await get_mediator().send(ExportHeatmapsCommand([str(source)], str(tmp_path / "out")))
    assert sorted(p.rsplit("/", 1)[-1] for p in written) == ["kernel.pgm", "kernel.svg"]


@pytest.mark.asyncio
async def test_reinit_checkpoint_and_kl_tracking(tmp_path):
    config = _config(tmp_path, training={"epochs": 3, "kmeans_reinit": True, "patience": 0, "track_kl": True})
    report = await RunExperimentHandler().handle(RunExperimentCommand(config))

    assert "model_reinit.neus" in report.artifacts
    assert "W" in load_checkpoint(tmp_path / "model_reinit.neus")
    history = (tmp_path / "loss_history.csv").read_text().splitlines()
    assert history[0] == "epoch,mean_loss,learning_rate,kl"
    assert len(history) == 4
