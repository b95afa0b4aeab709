import pytest

from src.application.common.errors import ConfigValidationError, NumericalError
from src.infrastructure import monitoring


def test_sentry_stays_off_without_dsn(monkeypatch):
    monkeypatch.delenv("SENTRY_DSN", raising=False)
    assert monitoring.initialize_sentry() is False


def test_config_mistakes_are_not_reported():
    hint = {"exc_info": (ConfigValidationError, ConfigValidationError(["model.r: missing"]), None)}
    assert monitoring.before_send_filter({}, hint) is None
    assert monitoring.before_send_filter({"exception": {"values": [{"type": "KeyboardInterrupt"}]}}, {}) is None


def test_runtime_failures_are_reported_with_secrets_redacted():
    event = {
        "extra": {"sentry_dsn": "https://key@host/1", "epoch": 3},
        "contexts": {"operation": {"name": "experiment.run", "api_key": "x"}},
    }
    hint = {"exc_info": (NumericalError, NumericalError("loss became NaN"), None)}
    kept = monitoring.before_send_filter(event, hint)
    assert kept["extra"] == {"sentry_dsn": "[Filtered]", "epoch": 3}
    assert kept["contexts"]["operation"] == {"name": "experiment.run", "api_key": "[Filtered]"}


@pytest.mark.asyncio
async def test_monitored_handler_reraises_and_captures(monkeypatch):
    captured = []
    monkeypatch.setattr(monitoring, "capture_exception", lambda e, context=None: captured.append((e, context)))

    @monitoring.monitor_performance("experiment.test")
    async def failing():
        raise RuntimeError("diverged")

    with pytest.raises(RuntimeError):
        await failing()
    assert captured[0][1]["operation"]["name"] == "experiment.test"
