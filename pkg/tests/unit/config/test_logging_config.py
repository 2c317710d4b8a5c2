"""
Tests for centralized logging configuration.

Tests logging setup, environment overrides, the numerics filter and JSON output.
"""

import json
import logging
from logging.handlers import RotatingFileHandler

import pytest

from config.logging_config import JSONFormatter, NumericsFilter, get_logger, setup_logging


@pytest.fixture(autouse=True)
def clean_root_logger(monkeypatch):
    """Reset root logger and logging env before and after each test."""
    for name in ("LOG_LEVEL", "LOG_DIR", "LOG_TO_FILE", "ENABLE_NUMERICS_LOG", "RUN_NAME"):
        monkeypatch.delenv(name, raising=False)
    root_logger = logging.getLogger()
    yield
    for handler in root_logger.handlers[:]:
        handler.close()
        root_logger.removeHandler(handler)
    root_logger.setLevel(logging.WARNING)


def file_handlers():
    return [h for h in logging.getLogger().handlers if isinstance(h, RotatingFileHandler)]


class TestLoggingSetup:
    """Test basic logging setup and configuration."""

    def test_setup_logging_console_only(self):
        """Test setup with console logging only."""
        setup_logging(log_level='INFO', log_to_file=False)

        assert logging.getLogger().level == logging.INFO
        assert file_handlers() == []

    def test_log_level_from_env(self, monkeypatch):
        """LOG_LEVEL should apply when no level is passed."""
        monkeypatch.setenv("LOG_LEVEL", "debug")
        setup_logging(log_to_file=False)

        assert logging.getLogger().level == logging.DEBUG

    def test_get_logger_returns_logger(self):
        """Test get_logger returns proper logger instance."""
        logger = get_logger('src.integrator')

        assert isinstance(logger, logging.Logger)
        assert logger.name == 'src.integrator'

    def test_reconfiguration_replaces_handlers(self):
        """Calling setup_logging twice should not duplicate handlers."""
        setup_logging(log_level='INFO', log_to_file=False)
        setup_logging(log_level='INFO', log_to_file=False)

        assert len(logging.getLogger().handlers) == 1


class TestLogFiles:
    """Test rotating file handlers and LOG_DIR."""

    def test_app_and_error_logs(self, tmp_path, monkeypatch):
        """LOG_DIR should receive rotating app.log and error.log."""
        monkeypatch.setenv("LOG_DIR", str(tmp_path))
        setup_logging(log_level='INFO', log_to_console=False)

        handlers = file_handlers()
        names = sorted(h.baseFilename.rsplit("/", 1)[-1] for h in handlers)
        assert names == ["app.log", "error.log"]
        assert all(h.maxBytes == 10 * 1024 * 1024 for h in handlers)
        assert all(h.backupCount == 5 for h in handlers)

        get_logger("tests.files").error("checkpoint write failed")
        for h in handlers:
            h.flush()
        assert "checkpoint write failed" in (tmp_path / "error.log").read_text()

    def test_log_to_file_env_disables_files(self, tmp_path, monkeypatch):
        """LOG_TO_FILE=false should override log_to_file=True."""
        monkeypatch.setenv("LOG_DIR", str(tmp_path))
        monkeypatch.setenv("LOG_TO_FILE", "false")
        setup_logging(log_level='INFO')

        assert file_handlers() == []
        assert not (tmp_path / "app.log").exists()

    def test_numerics_log_only_numerics_records(self, tmp_path, monkeypatch):
        """numerics.log should contain only records flagged as numerics."""
        monkeypatch.setenv("LOG_DIR", str(tmp_path))
        setup_logging(log_level='INFO', log_to_console=False, log_to_file=False,
                      enable_numerics_log=True)

        logger = get_logger("tests.numerics")
        logger.warning("CFL 0.93 above 0.8", extra={"numerics": True})
        logger.warning("unrelated warning")
        for h in file_handlers():
            h.flush()

        text = (tmp_path / "numerics.log").read_text()
        assert "CFL 0.93" in text
        assert "unrelated" not in text


class TestFormatters:
    """Test NumericsFilter and JSONFormatter."""

    def make_record(self, **extra):
        record = logging.LogRecord("src.x", logging.WARNING, __file__, 10, "msg %s", ("a",), None)
        for key, value in extra.items():
            setattr(record, key, value)
        return record

    def test_numerics_filter(self):
        """NumericsFilter should pass only flagged records."""
        f = NumericsFilter()

        assert f.filter(self.make_record(numerics=True))
        assert not f.filter(self.make_record())

    def test_json_formatter(self):
        """JSONFormatter should emit one parseable object with run name."""
        line = JSONFormatter("tgv-test").format(self.make_record())
        data = json.loads(line)

        assert data["run"] == "tgv-test"
        assert data["level"] == "WARNING"
        assert data["message"] == "msg a"
