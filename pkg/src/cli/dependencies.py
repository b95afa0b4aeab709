"""Composition root for MediatorX.

Registers every command and query handler; the CLI obtains the mediator via
`get_mediator()` and dispatches with `mediator.send(...)`.
"""

from mediatorx import Mediator

from src.application.commands.export_heatmaps_command import (
    ExportHeatmapsCommand,
    ExportHeatmapsHandler,
)
from src.application.commands.run_experiment_command import (
    RunExperimentCommand,
    RunExperimentHandler,
)
from src.application.queries.evaluate_checkpoint_query import (
    EvaluateCheckpointQuery,
    EvaluateCheckpointHandler,
)
from src.application.queries.validate_config_query import (
    ValidateConfigQuery,
    ValidateConfigHandler,
)


def build_mediator() -> Mediator:
    m = Mediator()

    # Commands
    m.register(RunExperimentCommand, RunExperimentHandler)
    m.register(ExportHeatmapsCommand, ExportHeatmapsHandler)

    # Queries
    m.register(ValidateConfigQuery, ValidateConfigHandler)
    m.register(EvaluateCheckpointQuery, EvaluateCheckpointHandler)

    return m

_mediator = build_mediator()

def get_mediator() -> Mediator:
    """Returns the process-wide Mediator instance."""
    return _mediator
