from dataclasses import dataclass, field

from mediatorx import IQuery, IQueryHandler

from src.application.common.errors import ConfigParseError, ConfigValidationError
from src.application.dtos.experiment_config_dto import ValidationReportDto
from src.application.services.experiment_config_service import load_experiment_config
from src.infrastructure.logging_config import get_logger

logger = get_logger("validate_config_query")


@dataclass
class ValidateConfigQuery(IQuery[ValidationReportDto]):
    path: str
    overrides: list[str] = field(default_factory=list)
    seed: int | None = None
    out_dir: str | None = None
    trials: int | None = None


class ValidateConfigHandler(IQueryHandler[ValidateConfigQuery, ValidationReportDto]):
    """Structural and cross-field validation without running anything."""

    async def handle(self, query: ValidateConfigQuery) -> ValidationReportDto:
        try:
            config = load_experiment_config(query.path, query.overrides, query.seed, query.out_dir, query.trials)
        except ConfigValidationError as e:
            return ValidationReportDto(valid=False, errors=e.errors)
        except ConfigParseError as e:
            return ValidationReportDto(valid=False, errors=[str(e)])
        logger.info("Config %s is valid", query.path)
        return ValidationReportDto(valid=True, config=config.model_dump(mode="json"))
