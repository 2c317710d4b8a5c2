"""
Structured Event Logging for simulation and analysis runs.

Events are logged as single-line JSON for easy parsing of long runs.

Events tracked:
- run_started / run_finished
- checkpoint_written
- blowup
- analysis_finished

Usage:
    from src.event_logger import EventLogger

    EventLogger.log_checkpoint_written("checkpoints/ckpt_000005000.bin", 5000, 5.0)
"""

import json
from datetime import datetime, timezone
from typing import Any, Dict, Optional

from config.logging_config import get_logger

logger = get_logger(__name__)


def _json_default(value):
    # numpy scalars and paths
    if hasattr(value, "item"):
        return value.item()
    return str(value)


class EventLogger:
    """
    Structured event logger.

    Logs events in JSON format with standardized fields:
    - timestamp: ISO 8601 timestamp
    - event_type: Type of event (e.g., "checkpoint_written")
    - data: Event-specific data
    - metadata: Additional context (optional)
    """

    @staticmethod
    def log_event(
        event_type: str,
        data: Dict[str, Any],
        metadata: Optional[Dict[str, Any]] = None,
        level: str = "INFO"
    ):
        """
        Log a structured event.

        Args:
            event_type: Type of event (e.g., "run_started")
            data: Event-specific data dictionary
            metadata: Optional metadata (host, output dir, ...)
            level: Log level (INFO, WARNING, ERROR)
        """
        event = {
            "timestamp": datetime.now(timezone.utc).replace(tzinfo=None).isoformat() + "Z",
            "event_type": event_type,
            "data": data
        }

        if metadata:
            event["metadata"] = metadata

        event_json = json.dumps(event, default=_json_default)

        log_method = getattr(logger, level.lower(), logger.info)
        log_method(f"EVENT: {event_json}")

    @staticmethod
    def log_run_started(
        n: int,
        nu: float,
        dt: float,
        t_end: float,
        start_step: int = 0,
        output_dir: Optional[str] = None
    ):
        """Log the start (or resumption) of a time integration."""
        data = {
            "n": n,
            "nu": nu,
            "dt": dt,
            "t_end": t_end,
            "start_step": start_step,
            "resumed": start_step > 0
        }

        if output_dir is not None:
            data["output_dir"] = output_dir

        EventLogger.log_event("run_started", data)

    @staticmethod
    def log_checkpoint_written(path: str, step_index: int, t: float):
        EventLogger.log_event("checkpoint_written", {
            "path": path,
            "step_index": step_index,
            "t": round(t, 12)
        }, level="DEBUG")

    @staticmethod
    def log_run_finished(
        steps: int,
        t: float,
        samples: int,
        duration: Optional[float] = None,
        max_cfl: Optional[float] = None,
        dissipation: Optional[float] = None
    ):
        """Log a completed time integration; dissipation is 2νℰ of the final state."""
        data = {
            "steps": steps,
            "t": round(t, 12),
            "samples": samples
        }

        if duration is not None:
            data["duration_seconds"] = round(duration, 3)

        if max_cfl is not None:
            data["max_cfl"] = round(max_cfl, 6)

        if dissipation is not None:
            data["dissipation_rate"] = dissipation

        EventLogger.log_event("run_finished", data)

    @staticmethod
    def log_blowup(step_index: int, t: float, last_checkpoint: Optional[str] = None):
        """Log a non-finite state."""
        data = {
            "step_index": step_index,
            "t": t
        }

        if last_checkpoint:
            data["last_checkpoint"] = last_checkpoint

        EventLogger.log_event("blowup", data, level="ERROR")

    @staticmethod
    def log_analysis_finished(
        t_star: float,
        a: float,
        k_set: list,
        advisory: bool = False
    ):
        """Log the outcome of the ratio analysis."""
        data = {
            "t_star": t_star,
            "a": a,
            "k_set": list(k_set),
            "advisory": advisory
        }

        level = "WARNING" if advisory else "INFO"
        EventLogger.log_event("analysis_finished", data, level=level)

