import logging
import os
from functools import wraps
from typing import Any

import sentry_sdk
from sentry_sdk.integrations.logging import LoggingIntegration

from src.application.common.errors import ConfigParseError, ConfigValidationError
from src.application.services.app_config_service import app_config

logger = logging.getLogger("sentry_sdk.errors")

SENSITIVE_KEYS = ["dsn", "token", "secret", "password", "api_key"]

# user input problems end in exit code 2 and are not worth an event
_IGNORED = (KeyboardInterrupt, ConfigParseError, ConfigValidationError)


def initialize_sentry(dsn: str | None = None, traces_sample_rate: float | None = None) -> bool:
    """
    Initialize error tracking for experiment runs.

    Args:
        dsn: Sentry DSN; falls back to SENTRY_DSN
        traces_sample_rate: Handler transaction sampling; falls back to
            SENTRY_TRACES_SAMPLE_RATE in application.properties

    Returns:
        True when error tracking is active
    """
    dsn = dsn or os.getenv("SENTRY_DSN")
    if not dsn:
        logger.debug("Sentry DSN not configured. Error tracking disabled.")
        return False

    if traces_sample_rate is None:
        traces_sample_rate = float(app_config.get_config("SENTRY_TRACES_SAMPLE_RATE", "0.0"))
    environment = app_config.get_environment()

    sentry_sdk.init(
        dsn=dsn,
        environment=environment,
        release=f"neustrom@{app_config.get_version()}",
        traces_sample_rate=traces_sample_rate,
        integrations=[LoggingIntegration(level=logging.INFO, event_level=logging.ERROR)],
        before_send=before_send_filter,
        attach_stacktrace=True,
        send_default_pii=False,
    )
    logger.info(f"Sentry initialized for environment: {environment}")
    return True


def _redact(mapping: dict[str, Any]):
    for key in list(mapping):
        if any(sensitive in key.lower() for sensitive in SENSITIVE_KEYS):
            mapping[key] = "[Filtered]"


def before_send_filter(event: dict[str, Any], hint: dict[str, Any]) -> dict[str, Any] | None:
    """Drop interrupts and configuration mistakes, redact secrets in extras and contexts."""
    exc_info = (hint or {}).get("exc_info")
    if exc_info and exc_info[0] is not None and issubclass(exc_info[0], _IGNORED):
        return None

    ignored_names = {cls.__name__ for cls in _IGNORED}
    for exception in event.get("exception", {}).get("values", []):
        if exception.get("type") in ignored_names:
            return None

    _redact(event.get("extra", {}))
    for context in event.get("contexts", {}).values():
        if isinstance(context, dict):
            _redact(context)
    return event


def tag_run(mode: str, source: str, seed: int) -> None:
    """Tags every later event with the experiment being run."""
    sentry_sdk.set_tag("experiment.mode", mode)
    sentry_sdk.set_tag("experiment.source", source)
    sentry_sdk.set_tag("experiment.seed", str(seed))


def add_breadcrumb(message: str, category: str | None = None, level: str = "info",
                   data: dict[str, Any] | None = None) -> None:
    sentry_sdk.add_breadcrumb(message=message, category=category, level=level, data=data)


def capture_exception(error: Exception, context: dict[str, Any] | None = None) -> str | None:
    with sentry_sdk.new_scope() as scope:
        for key, value in (context or {}).items():
            scope.set_context(key, value)
        return sentry_sdk.capture_exception(error)


def monitor_performance(operation: str):
    """Wraps an async handler in a transaction; failures are captured and re-raised."""

    def decorator(func):
        @wraps(func)
        async def wrapper(*args, **kwargs):
            with sentry_sdk.start_transaction(op=operation, name=func.__qualname__):
                try:
                    return await func(*args, **kwargs)
                except Exception as e:
                    capture_exception(e, context={"operation": {"name": operation, "handler": func.__qualname__}})
                    raise

        return wrapper

    return decorator
