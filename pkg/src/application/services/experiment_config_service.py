"""Load, override and validate experiment configs.

A config is either a sectioned properties file or a ``manifest.json`` written
by a previous run (its ``config`` object is the fully resolved config).
"""

import json
from pathlib import Path

from pydantic import ValidationError

from src.application.common.errors import ConfigParseError, ConfigValidationError
from src.application.dtos.experiment_config_dto import ExperimentConfigDto
from src.application.services.properties_parser import PropertyEntry, parse_properties
from src.infrastructure.logging_config import get_logger

logger = get_logger("experiment_config_service")


def read_raw_config(path: str | Path) -> tuple[dict[str, dict], dict[str, int]]:
    """Nested ``{section: {key: value}}`` plus the source line of every key (properties files only)."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigParseError(f"cannot read config '{path}': {exc.strerror or exc}") from exc

    if path.suffix == ".json":
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigParseError(exc.msg, line=exc.lineno) from exc
        config = payload.get("config", payload) if isinstance(payload, dict) else None
        if not isinstance(config, dict):
            raise ConfigParseError("manifest does not contain a config object")
        return config, {}

    entries = parse_properties(text, allow_sections=True)
    return nest_entries(entries), {key: entry.line for key, entry in entries.items()}


def nest_entries(entries: dict[str, PropertyEntry]) -> dict[str, dict]:
    raw: dict[str, dict] = {}
    for key, entry in entries.items():
        section, dot, name = key.partition(".")
        if not dot:
            raise ConfigParseError("keys must live inside a [section]", line=entry.line, field=key)
        raw.setdefault(section, {})[name] = entry.value
    return raw


def apply_overrides(raw: dict[str, dict], overrides: list[str]) -> dict[str, dict]:
    """Apply ``section.key=value`` overrides on top of the file values."""
    merged = {section: dict(values) for section, values in raw.items() if values is not None}
    for override in overrides:
        key, eq, value = override.partition("=")
        section, dot, name = key.strip().partition(".")
        if not eq or not dot or not section or not name:
            raise ConfigParseError(f"override must look like 'section.key=value', got {override!r}", field=key.strip())
        merged.setdefault(section, {})[name] = value.strip()
    return merged


def validate_config(raw: dict[str, dict], lines: dict[str, int] | None = None) -> ExperimentConfigDto:
    try:
        return ExperimentConfigDto.model_validate(raw)
    except ValidationError as exc:
        raise ConfigValidationError(describe_errors(exc, lines or {})) from None


def describe_errors(exc: ValidationError, lines: dict[str, int]) -> list[str]:
    messages: list[str] = []
    for error in exc.errors():
        field = ".".join(str(part) for part in error["loc"])
        message = error["msg"].removeprefix("Value error, ")
        if error["type"] == "value_error" and not error["loc"]:
            messages.extend(message.splitlines())
            continue
        where = f" (line {lines[field]})" if field in lines else ""
        messages.append(f"{field}{where}: {message}" if field else message)
    return messages


def load_experiment_config(path: str | Path, overrides: list[str] | None = None, seed: int | None = None,
                           out_dir: str | None = None, trials: int | None = None) -> ExperimentConfigDto:
    raw, lines = read_raw_config(path)
    extra = list(overrides or [])
    if seed is not None:
        extra.append(f"output.seed={seed}")
    if out_dir is not None:
        extra.append(f"output.dir={out_dir}")
    if trials is not None:
        extra.append(f"supervised.trials={trials}")
        if raw.get("supervised") is None:
            logger.warning("--trials given but the config has no [supervised] section")
    config = validate_config(apply_overrides(raw, extra), lines)
    logger.debug("Loaded config %s (mode=%s, seed=%d)", path, config.training.mode, config.output.seed)
    return config
