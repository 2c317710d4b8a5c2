"""
Step timing for the time loop.

Features:
- Wall-time per RK4 step
- Slow step warnings
- Aggregated statistics logged at the end of a run

Configuration (via .env):
    SLOW_STEP_THRESHOLD=5.0        # Slow step warning (default: 5.0s)
    VERY_SLOW_STEP_THRESHOLD=20.0  # Very slow step error (default: 20.0s)
"""

import os
import time
from contextlib import contextmanager
from typing import Optional

from config.logging_config import get_logger

logger = get_logger(__name__)


class StepTimer:
    """
    Times integration steps and keeps running statistics.

    Tracks:
    - Step duration for every step
    - Slow and very slow step counts against configurable thresholds
    """

    def __init__(
        self,
        slow_threshold: Optional[float] = None,
        very_slow_threshold: Optional[float] = None
    ):
        self.slow_threshold = (
            slow_threshold if slow_threshold is not None
            else float(os.getenv('SLOW_STEP_THRESHOLD', '5.0'))
        )
        self.very_slow_threshold = (
            very_slow_threshold if very_slow_threshold is not None
            else float(os.getenv('VERY_SLOW_STEP_THRESHOLD', '20.0'))
        )

        self.step_count = 0
        self.total_duration = 0.0
        self.min_duration = float('inf')
        self.max_duration = 0.0
        self.slow_steps = 0
        self.very_slow_steps = 0

        logger.debug(
            f"Step timer initialized: slow={self.slow_threshold}s, "
            f"very_slow={self.very_slow_threshold}s"
        )

    def record(self, step_index: int, duration: float):
        """
        Record one step duration.

        Args:
            step_index: Index of the completed step
            duration: Wall time in seconds
        """
        self.step_count += 1
        self.total_duration += duration
        self.min_duration = min(self.min_duration, duration)
        self.max_duration = max(self.max_duration, duration)

        if duration >= self.very_slow_threshold:
            self.very_slow_steps += 1
            logger.error(
                f"VERY SLOW STEP: step {step_index} - {duration:.2f}s "
                f"(threshold: {self.very_slow_threshold}s)"
            )
        elif duration >= self.slow_threshold:
            self.slow_steps += 1
            logger.warning(
                f"Slow step: step {step_index} - {duration:.2f}s "
                f"(threshold: {self.slow_threshold}s)"
            )

    @contextmanager
    def time_step(self, step_index: int):
        start = time.perf_counter()
        try:
            yield
        finally:
            self.record(step_index, time.perf_counter() - start)

    def get_summary(self) -> dict:
        """
        Get step timing summary.

        Returns:
            Dictionary with aggregated metrics
        """
        avg_duration = (
            self.total_duration / self.step_count
            if self.step_count > 0
            else 0.0
        )

        return {
            'total_steps': self.step_count,
            'total_duration': round(self.total_duration, 3),
            'average_duration': round(avg_duration, 6),
            'min_duration': round(self.min_duration, 6) if self.step_count else 0.0,
            'max_duration': round(self.max_duration, 6),
            'slow_steps': self.slow_steps,
            'very_slow_steps': self.very_slow_steps
        }

    def log_summary(self):
        """Log step timing summary."""
        logger.info(f"Step timing summary: {self.get_summary()}")
