import asyncio
from dataclasses import dataclass
from pathlib import Path

from mediatorx import ICommand, ICommandHandler

from src.infrastructure import artifacts
from src.infrastructure.logging_config import get_logger
from src.infrastructure.monitoring import monitor_performance

logger = get_logger("export_heatmaps_command")


@dataclass
class ExportHeatmapsCommand(ICommand[list[str]]):
    """Re-render PGM/SVG heatmaps from headerless matrix CSVs."""
    inputs: list[str]
    out_dir: str | None = None


class ExportHeatmapsHandler(ICommandHandler[ExportHeatmapsCommand, list[str]]):

    @monitor_performance("experiment.export")
    async def handle(self, command: ExportHeatmapsCommand) -> list[str]:
        written: list[str] = []
        for source in map(Path, command.inputs):
            matrix = await asyncio.to_thread(artifacts.read_matrix_csv, source)
            target = Path(command.out_dir) if command.out_dir else source.parent
            paths = await asyncio.to_thread(artifacts.write_heatmaps, target, source.stem, matrix)
            logger.info("Rendered %s (%dx%d)", source.name, *matrix.shape)
            written.extend(str(p) for p in paths)
        return written
