"""
Resource Guard - Prevent Memory Overload

Estimates the working set of a run from its grid size and refuses to start
when the machine cannot hold it. A 256³ run needs several GB.
"""

import os
from typing import Optional

import psutil

from config.logging_config import get_logger

logger = get_logger(__name__)

# Spectral arrays alive during one RK4 step: state, stage input, 4 stage slopes,
# accumulator and the nonlinear output.
_SPECTRAL_FIELDS = 8
# Real N³ arrays inside the nonlinear kernel: u (3), one gradient batch (3),
# advection (3), plus transform scratch.
_PHYSICAL_ARRAYS = 12


class InsufficientMemoryError(Exception):
    """Raised when a run would not fit into available memory."""

    def __init__(self, message: str, context: dict = None):
        super().__init__(message)
        self.context = context or {}


def estimate_run_bytes(n: int) -> int:
    """Approximate peak bytes for the time loop of an n³ grid."""
    spectral_field = 3 * n * n * (n // 2 + 1) * 16
    physical_array = n ** 3 * 8
    return _SPECTRAL_FIELDS * spectral_field + _PHYSICAL_ARRAYS * physical_array


class ResourceGuard:
    """
    Checks available memory before a run starts.
    """

    def __init__(self, memory_threshold_percent: Optional[float] = None):
        """
        Args:
            memory_threshold_percent: Reject runs if memory usage already exceeds this %,
                or if the run would push usage past it (default: TGV_MEMORY_THRESHOLD or 90%)
        """
        if memory_threshold_percent is None:
            memory_threshold_percent = float(os.getenv("TGV_MEMORY_THRESHOLD", "90.0"))
        self.memory_threshold = memory_threshold_percent
        self.checks = 0
        self.rejections = 0

    def can_run(self, n: int) -> tuple[bool, Optional[str]]:
        """
        Check whether an n³ run fits.

        Returns:
            (can_run, reason_if_rejected)
        """
        self.checks += 1
        required = estimate_run_bytes(n)
        memory = psutil.virtual_memory()

        if memory.percent >= self.memory_threshold:
            reason = f"Memory threshold exceeded ({memory.percent:.1f}% >= {self.memory_threshold}%)"
            logger.warning(f"🚫 {reason}")
            self.rejections += 1
            return False, reason

        budget = memory.total * self.memory_threshold / 100.0 - (memory.total - memory.available)
        if required > budget:
            reason = (
                f"Run with N={n} needs ~{required / 1024**3:.2f}GB, "
                f"only {max(budget, 0) / 1024**3:.2f}GB below the {self.memory_threshold}% threshold"
            )
            logger.warning(f"🚫 {reason}")
            self.rejections += 1
            return False, reason

        logger.info(
            f"ℹ️  Memory check passed for N={n}: needs ~{required / 1024**3:.2f}GB, "
            f"available {memory.available / 1024**3:.1f}GB"
        )
        return True, None

    def ensure(self, n: int) -> None:
        """Raise InsufficientMemoryError when can_run() rejects."""
        ok, reason = self.can_run(n)
        if not ok:
            raise InsufficientMemoryError(reason, context={"n": n})

    def get_stats(self) -> dict:
        """Get current guard statistics"""
        memory = psutil.virtual_memory()
        return {
            'checks': self.checks,
            'rejections': self.rejections,
            'memory_usage_percent': memory.percent,
            'memory_available_gb': memory.available / 1024**3,
            'memory_total_gb': memory.total / 1024**3,
            'memory_threshold': self.memory_threshold
        }
