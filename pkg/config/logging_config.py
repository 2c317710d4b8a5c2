"""
Zentrale Logging-Konfiguration für tgv-ratio-lab.

Features:
- Log-Rotation (10MB pro File, 5 Backups = max 60MB)
- Separate app.log (alle Levels) und error.log (nur Errors)
- Console + File Output
- Numerics-Log optional (Stabilitäts-Warnungen, Blow-up, Peak-at-boundary)
- Environment-basierte Konfiguration (LOG_LEVEL, LOG_DIR, LOG_TO_FILE)

Integration:
- CLI (src/main.py) ruft setup_logging() genau einmal auf
- Alle anderen Module: logger = get_logger(__name__)
"""

import json
import logging
import logging.handlers
import os
import sys
from pathlib import Path
from typing import Optional


# Projekt-Root und Default-Logs-Verzeichnis
PROJECT_ROOT = Path(__file__).parent.parent
LOGS_DIR = PROJECT_ROOT / "logs"

_TRUE_VALUES = ('true', '1', 'yes', 'on')
_FALSE_VALUES = ('false', '0', 'no', 'off')


class NumericsFilter(logging.Filter):
    """
    Filter für numerische Advisories.

    Lässt nur Records durch, die mit ``extra={"numerics": True}`` geloggt wurden
    (CFL-/Viskositäts-Warnungen, Blow-up, Peak am Rand der Zeitreihe).
    """

    def filter(self, record):
        return bool(getattr(record, "numerics", False))


class JSONFormatter(logging.Formatter):
    """Ein JSON-Objekt pro Zeile (für Log-Aggregation)."""

    def __init__(self, run_name: str, datefmt: Optional[str] = None):
        super().__init__(datefmt=datefmt)
        self.run_name = run_name

    def format(self, record):
        log_data = {
            'timestamp': self.formatTime(record, self.datefmt),
            'run': self.run_name,
            'level': record.levelname,
            'logger': record.name,
            'message': record.getMessage(),
            'module': record.module,
            'function': record.funcName,
            'line': record.lineno,
            'process': record.process,
            'thread': record.thread
        }
        if record.exc_info:
            log_data['exception'] = self.formatException(record.exc_info)
        return json.dumps(log_data)


def _env_flag(name: str, default: bool) -> bool:
    raw = os.getenv(name)
    if raw is None:
        return default
    raw = raw.lower()
    if raw in _TRUE_VALUES:
        return True
    if raw in _FALSE_VALUES:
        return False
    return default


def resolve_logs_dir() -> Path:
    """LOG_DIR aus Environment, sonst <project>/logs."""
    override = os.getenv("LOG_DIR")
    return Path(override) if override else LOGS_DIR


def setup_logging(
    log_level: Optional[str] = None,
    enable_numerics_log: bool = False,
    log_to_console: bool = True,
    log_to_file: bool = True,
    enable_json: bool = False,
) -> None:
    """
    Konfiguriert Logging für Simulator, Analyse und CLI.

    Args:
        log_level: Log-Level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
                   Falls None, wird LOG_LEVEL aus Environment gelesen (default: INFO)
        enable_numerics_log: Schreibt numerische Advisories zusätzlich in numerics.log
        log_to_console: Logs in Console ausgeben (stderr, stdout bleibt für Ergebnisse frei)
        log_to_file: Logs in Dateien schreiben (app.log, error.log)
        enable_json: JSON-Format für strukturiertes Logging

    Environment Variables:
        LOG_LEVEL: DEBUG, INFO, WARNING, ERROR, CRITICAL (default: INFO)
        LOG_DIR: Verzeichnis für Log-Dateien (default: <project>/logs)
        LOG_TO_FILE: true/false (default: true)
        ENABLE_NUMERICS_LOG: true/false (default: false)
        RUN_NAME: Kennung im Log-Format (default: tgv)

    Files Created:
        logs/app.log       - Alle Logs (DEBUG+), rotiert bei 10MB
        logs/error.log     - Nur Errors (ERROR+), rotiert bei 10MB
        logs/numerics.log  - Nur numerische Advisories (optional)
    """

    if log_level is None:
        log_level = os.getenv("LOG_LEVEL", "INFO")
    log_level = log_level.upper()

    if not enable_numerics_log:
        enable_numerics_log = _env_flag("ENABLE_NUMERICS_LOG", False)

    if not _env_flag("LOG_TO_FILE", True):
        log_to_file = False

    logs_dir = resolve_logs_dir()
    if log_to_file or enable_numerics_log:
        logs_dir.mkdir(parents=True, exist_ok=True)

    root_logger = logging.getLogger()
    numeric_level = getattr(logging, log_level)
    root_logger.setLevel(numeric_level)

    # Alte Handler entfernen (wichtig bei Re-Konfiguration, z.B. in Tests)
    for handler in root_logger.handlers[:]:
        handler.close()
        root_logger.removeHandler(handler)

    run_name = os.getenv('RUN_NAME', 'tgv')

    if enable_json:
        formatter = JSONFormatter(run_name, datefmt='%Y-%m-%d %H:%M:%S')
    else:
        formatter = logging.Formatter(
            f'%(asctime)s - [{run_name}] - %(name)s - %(levelname)s - [%(module)s:%(funcName)s:%(lineno)d] - %(message)s',
            datefmt='%Y-%m-%d %H:%M:%S'
        )

    if log_to_console:
        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setLevel(log_level)
        console_handler.setFormatter(formatter)
        root_logger.addHandler(console_handler)

    if log_to_file:
        app_handler = logging.handlers.RotatingFileHandler(
            logs_dir / "app.log",
            maxBytes=10 * 1024 * 1024,  # 10 MB
            backupCount=5,               # 5 Backups = max 60 MB
            encoding='utf-8'
        )
        app_handler.setLevel(logging.DEBUG)
        app_handler.setFormatter(formatter)
        root_logger.addHandler(app_handler)

        error_handler = logging.handlers.RotatingFileHandler(
            logs_dir / "error.log",
            maxBytes=10 * 1024 * 1024,
            backupCount=5,
            encoding='utf-8'
        )
        error_handler.setLevel(logging.ERROR)
        error_handler.setFormatter(formatter)
        root_logger.addHandler(error_handler)

    if enable_numerics_log:
        numerics_handler = logging.handlers.RotatingFileHandler(
            logs_dir / "numerics.log",
            maxBytes=10 * 1024 * 1024,
            backupCount=2,
            encoding='utf-8'
        )
        numerics_handler.setLevel(logging.DEBUG)
        numerics_handler.addFilter(NumericsFilter())
        numerics_handler.setFormatter(formatter)
        root_logger.addHandler(numerics_handler)

    # Externe Libraries auf WARNING setzen (reduziert Noise)
    for noisy in ("matplotlib", "PIL", "numexpr", "fontTools"):
        logging.getLogger(noisy).setLevel(logging.WARNING)

    root_logger.debug("=" * 70)
    root_logger.debug("Logging configured:")
    root_logger.debug(f"  Run: {run_name}")
    root_logger.debug(f"  Level: {log_level}")
    root_logger.debug(f"  Console: {log_to_console}")
    root_logger.debug(f"  File: {log_to_file}")
    root_logger.debug(f"  Numerics log: {enable_numerics_log}")
    root_logger.debug(f"  JSON: {enable_json}")
    root_logger.debug(f"  Logs Dir: {logs_dir}")
    root_logger.debug("=" * 70)


def get_logger(name: str) -> logging.Logger:
    """
    Holt einen Logger für ein bestimmtes Modul.

    Example:
        from config.logging_config import get_logger
        logger = get_logger(__name__)

        logger.warning("CFL above threshold", extra={"numerics": True})
    """
    return logging.getLogger(name)
