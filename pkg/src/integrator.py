"""
Time integration of the projected Fourier-space Navier-Stokes system

    dû/dt = -P_k(FT[(u·∇)u]) - ν|k|² û

with classical fourth-order Runge-Kutta, periodic diagnostics and checkpoints.

The time loop is the single owner of the state. Diagnostics receive an
immutable snapshot and, with ``async_diagnostics``, are evaluated on a worker
thread while the next step runs; samples are always delivered in order and
before any checkpoint of the same step is written.
"""

import time
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from tqdm import tqdm

from config.logging_config import get_logger
from src.checkpoint import checkpoint_name, list_checkpoints, prune_checkpoints, write_checkpoint
from src.diagnostics import dissipation_rate, sample
from src.event_logger import EventLogger
from src.models import DiagnosticsRecord, SolverConfig, StabilityAdvisory
from src.performance_monitor import StepTimer
from src.spectral_core import (
    TWO_PI,
    GridMismatchError,
    SpectralVectorField,
    inverse_transform,
    make_wave_grid,
    nonlinear_coeffs,
    project_coeffs,
    resolved_mode_magnitude,
    taylor_green_init,
)

logger = get_logger(__name__)

DiagnosticsSink = Callable[[DiagnosticsRecord], None]


# ============================================================================
# Custom Exceptions
# ============================================================================

class IntegrationError(Exception):
    """Base exception for time integration failures."""

    def __init__(self, message: str, context: dict = None, cause: Exception = None):
        super().__init__(message)
        self.context = context or {}
        self.__cause__ = cause


class BlowUpError(IntegrationError):
    """A coefficient became NaN or infinite."""

    def __init__(self, step_index: int, t: float, last_checkpoint: Optional[str] = None):
        super().__init__(
            f"Non-finite coefficients at step {step_index} (t={t:.6f}); "
            f"numerical instability or blow-up",
            context={"step_index": step_index, "t": t, "last_checkpoint": last_checkpoint},
        )
        self.step_index = step_index
        self.t = t
        self.last_checkpoint = last_checkpoint


@dataclass(frozen=True)
class SolverState:
    """Spectral velocity at time t = step_index · dt."""
    t: float
    field: SpectralVectorField
    step_index: int


def initial_state(cfg: SolverConfig) -> SolverState:
    grid = make_wave_grid(cfg.n, workers=cfg.workers)
    return SolverState(t=0.0, field=taylor_green_init(grid), step_index=0)


# ============================================================================
# One step
# ============================================================================

def _nonlinear_rhs(grid, c, cfg: SolverConfig) -> np.ndarray:
    return -nonlinear_coeffs(grid, c, cfg.nonlinear_form, cfg.dealias)


def _step_explicit(grid, c0, cfg: SolverConfig, include_nonlinear: bool) -> np.ndarray:
    h = cfg.dt
    viscous = cfg.nu * grid.k2

    def rhs(c):
        out = -viscous * c
        if include_nonlinear:
            out = out + _nonlinear_rhs(grid, c, cfg)
        return out

    k1 = rhs(c0)
    k2 = rhs(c0 + 0.5 * h * k1)
    k3 = rhs(c0 + 0.5 * h * k2)
    k4 = rhs(c0 + h * k3)
    return c0 + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _step_integrating_factor(grid, c0, cfg: SolverConfig, include_nonlinear: bool) -> np.ndarray:
    # Lawson RK4 on v = exp(ν|k|²t) û; the viscous decay is exact
    h = cfg.dt
    e_half = np.exp(-cfg.nu * grid.k2 * (0.5 * h))
    e_full = np.exp(-cfg.nu * grid.k2 * h)

    if not include_nonlinear:
        return e_full * c0

    k1 = _nonlinear_rhs(grid, c0, cfg)
    k2 = _nonlinear_rhs(grid, e_half * (c0 + 0.5 * h * k1), cfg)
    k3 = _nonlinear_rhs(grid, e_half * c0 + 0.5 * h * k2, cfg)
    k4 = _nonlinear_rhs(grid, e_full * c0 + h * e_half * k3, cfg)
    return e_full * c0 + (h / 6.0) * (e_full * k1 + 2.0 * e_half * (k2 + k3) + k4)


def rk4_step(state: SolverState, cfg: SolverConfig, include_nonlinear: bool = True) -> SolverState:
    """
    Advance one time step.

    The nonlinear term is projected at every stage; the combined update is
    projected and dealiased once more.

    Args:
        include_nonlinear: False drops the convective term (pure heat equation)

    Raises:
        GridMismatchError: state grid differs from cfg.n
        BlowUpError: any coefficient is NaN or infinite after the step
    """
    grid = state.field.grid
    if grid.N != cfg.n:
        raise GridMismatchError(
            f"State grid N={grid.N} does not match config n={cfg.n}",
            context={"state_N": grid.N, "config_n": cfg.n},
        )

    if cfg.viscous_scheme == "integrating_factor":
        c = _step_integrating_factor(grid, state.field.coeffs, cfg, include_nonlinear)
    else:
        c = _step_explicit(grid, state.field.coeffs, cfg, include_nonlinear)

    c = project_coeffs(grid, c)
    if cfg.dealias:
        c = c * grid.dealias_mask

    step_index = state.step_index + 1
    t = step_index * cfg.dt
    if not np.all(np.isfinite(c)):
        raise BlowUpError(step_index, t)

    return SolverState(t=t, field=state.field.with_coeffs(c), step_index=step_index)


# ============================================================================
# Stability advisory
# ============================================================================

def viscous_number(nu: float, n: int, dt: float) -> float:
    """ν(2π m_max)²·dt with m_max the largest mode magnitude kept on an n³ grid."""
    return nu * (TWO_PI * resolved_mode_magnitude(n)) ** 2 * dt


def stability_monitor(state: SolverState, cfg: SolverConfig) -> StabilityAdvisory:
    """
    CFL number max|u|·dt·N and viscous number ν(2π m_max)²·dt.

    Values above cfg.cfl_warn / cfg.viscous_warn are logged as warnings; the
    run is never stopped by this check.
    """
    grid = state.field.grid
    u = inverse_transform(state.field).values
    max_u = float(np.max(np.abs(u))) if u.size else 0.0
    cfl = max_u * cfg.dt * grid.N
    viscous = viscous_number(cfg.nu, grid.N, cfg.dt)

    warnings = []
    if cfl > cfg.cfl_warn:
        warnings.append(f"CFL number {cfl:.3f} above {cfg.cfl_warn}")
    if viscous > cfg.viscous_warn:
        warnings.append(f"viscous number {viscous:.3f} above {cfg.viscous_warn}")
    for message in warnings:
        logger.warning(f"Step {state.step_index} (t={state.t:.4f}): {message}", extra={"numerics": True})

    return StabilityAdvisory(cfl=cfl, viscous_number=viscous, warnings=warnings)


# ============================================================================
# Time loop
# ============================================================================

class _SampleDispatcher:
    """Delivers diagnostics in step order, optionally on one worker thread."""

    def __init__(self, cfg: SolverConfig, sink: Optional[DiagnosticsSink]):
        self.cfg = cfg
        self.sink = sink
        self.samples = 0
        self._pending: Optional[Future] = None
        self._executor = (
            ThreadPoolExecutor(max_workers=1, thread_name_prefix="diagnostics")
            if sink is not None and cfg.async_diagnostics
            else None
        )

    def _deliver(self, snapshot: SolverState) -> None:
        self.sink(sample(snapshot, self.cfg))

    def submit(self, snapshot: SolverState) -> None:
        self.samples += 1
        if self.sink is None:
            return
        if self._executor is None:
            self._deliver(snapshot)
            return
        self.drain()
        self._pending = self._executor.submit(self._deliver, snapshot)

    def drain(self) -> None:
        if self._pending is not None:
            pending, self._pending = self._pending, None
            pending.result()

    def close(self) -> None:
        if self._executor is not None:
            self._executor.shutdown(wait=True)


def run(
    cfg: SolverConfig,
    sink: Optional[DiagnosticsSink] = None,
    *,
    initial: Optional[SolverState] = None,
    checkpoint_dir: Optional[Path] = None,
    on_checkpoint: Optional[Callable[[Path], None]] = None,
    progress: bool = False,
    include_nonlinear: bool = True,
) -> SolverState:
    """
    Integrate from the Taylor-Green initial state (or ``initial``) to cfg.t_end.

    A fresh run samples at step 0; a resumed run does not resample its starting
    step. Samples are taken every cfg.diag_stride steps, checkpoints every
    cfg.checkpoint_stride steps plus one at the final step.

    Raises:
        BlowUpError: non-finite state; ``last_checkpoint`` names the newest good checkpoint
        CheckpointWriteError: a checkpoint could not be written
    """
    fresh = initial is None
    state = initial_state(cfg) if fresh else initial
    if state.field.grid.N != cfg.n:
        raise GridMismatchError(
            f"Initial state grid N={state.field.grid.N} does not match config n={cfg.n}",
            context={"state_N": state.field.grid.N, "config_n": cfg.n},
        )

    n_total = cfg.n_steps
    timer = StepTimer()
    dispatcher = _SampleDispatcher(cfg, sink)
    checkpoint_dir = Path(checkpoint_dir) if checkpoint_dir is not None else None
    last_checkpoint: Optional[Path] = None
    max_cfl = 0.0
    started = time.perf_counter()

    EventLogger.log_run_started(
        cfg.n, cfg.nu, cfg.dt, cfg.t_end, start_step=state.step_index,
        output_dir=str(checkpoint_dir) if checkpoint_dir else None,
    )
    initial_advisory = stability_monitor(state, cfg)
    logger.info(
        f"Integrating N={cfg.n} from step {state.step_index} to {n_total} "
        f"(CFL {initial_advisory.cfl:.3f}, viscous number {initial_advisory.viscous_number:.3f})"
    )

    def checkpoint(current: SolverState) -> Path:
        dispatcher.drain()
        path = write_checkpoint(
            checkpoint_dir / checkpoint_name(current.step_index),
            current.field, cfg.nu, cfg.dt, current.t, current.step_index,
        )
        prune_checkpoints(checkpoint_dir, cfg.checkpoint_keep)
        EventLogger.log_checkpoint_written(str(path), current.step_index, current.t)
        if on_checkpoint is not None:
            on_checkpoint(path)
        return path

    try:
        if fresh:
            dispatcher.submit(state)

        with tqdm(total=n_total, initial=min(state.step_index, n_total), disable=not progress,
                  unit="step", desc=f"TGV N={cfg.n}") as bar:
            while state.step_index < n_total:
                with timer.time_step(state.step_index + 1):
                    state = rk4_step(state, cfg, include_nonlinear=include_nonlinear)
                bar.update(1)

                if state.step_index % cfg.diag_stride == 0:
                    max_cfl = max(max_cfl, stability_monitor(state, cfg).cfl)
                    dispatcher.submit(state)

                if (
                    checkpoint_dir is not None
                    and cfg.checkpoint_stride
                    and state.step_index % cfg.checkpoint_stride == 0
                ):
                    last_checkpoint = checkpoint(state)

        dispatcher.drain()
        if checkpoint_dir is not None:
            final_path = checkpoint_dir / checkpoint_name(state.step_index)
            if last_checkpoint != final_path and not final_path.exists():
                last_checkpoint = checkpoint(state)

    except BlowUpError as e:
        try:
            dispatcher.drain()
        except Exception:
            logger.error("Diagnostics failed while handling blow-up", exc_info=True)
        last_good = last_checkpoint or _newest_checkpoint(checkpoint_dir)
        e.last_checkpoint = str(last_good) if last_good else None
        e.context["last_checkpoint"] = e.last_checkpoint
        EventLogger.log_blowup(e.step_index, e.t, e.last_checkpoint)
        logger.error(f"{e}; last good checkpoint: {e.last_checkpoint}", extra={"numerics": True})
        raise
    finally:
        dispatcher.close()

    timer.log_summary()
    EventLogger.log_run_finished(
        steps=timer.step_count, t=state.t, samples=dispatcher.samples,
        duration=time.perf_counter() - started, max_cfl=max_cfl,
        dissipation=dissipation_rate(state.field, cfg.nu),
    )
    return state


def _newest_checkpoint(checkpoint_dir: Optional[Path]) -> Optional[Path]:
    if checkpoint_dir is None:
        return None
    existing = list_checkpoints(checkpoint_dir)
    return existing[-1] if existing else None
