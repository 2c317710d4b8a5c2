import os
from datetime import datetime
from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from config.logging_config import get_logger

logger = get_logger(__name__)


# Ratio orders used by the fits: k_j = 5j, j = 1..20
DEFAULT_K_LIST: List[int] = [5 * j for j in range(1, 21)]


def _default_workers() -> int:
    raw = os.getenv("TGV_FFT_WORKERS")
    if raw is None:
        return -1
    try:
        return int(raw)
    except ValueError:
        logger.warning(f"Invalid TGV_FFT_WORKERS={raw!r}, using all cores")
        return -1


# ============================================================================
# Run configuration
# ============================================================================

class SolverConfig(BaseModel):
    """Configuration of one Taylor-Green run plus the analysis defaults carried with it."""

    model_config = ConfigDict(extra="forbid", validate_assignment=True)

    n: int = Field(default=256, description="Grid points per axis (even, >= 4)")
    nu: float = Field(default=1.0 / 1600.0, gt=0, description="Kinematic viscosity")
    dt: float = Field(default=0.001, gt=0, description="Uniform time step")
    t_end: float = Field(default=20.0, ge=0, description="Final simulation time")
    diag_stride: int = Field(default=10, ge=1, description="Steps between diagnostic samples")
    k_list: List[int] = Field(default_factory=lambda: list(DEFAULT_K_LIST))
    checkpoint_stride: int = Field(
        default=1000, ge=0, description="Steps between checkpoints (0: final checkpoint only)"
    )
    checkpoint_keep: int = Field(default=3, ge=1, description="Rolling checkpoints retained")

    nonlinear_form: Literal["convection", "divergence"] = "convection"
    viscous_scheme: Literal["explicit", "integrating_factor"] = "explicit"
    dealias: bool = True

    cfl_warn: float = Field(default=0.8, gt=0)
    viscous_warn: float = Field(default=2.5, gt=0)

    output_dir: str = "tgv_run"
    workers: int = Field(default_factory=_default_workers, description="scipy.fft workers (-1: all cores)")
    async_diagnostics: bool = Field(
        default=True, description="Evaluate diagnostics on a worker thread while the next step runs"
    )

    # Analysis defaults
    beta_min: Optional[float] = Field(default=None, gt=0, description="Smallest T*-t in the fit window (default: dt)")
    tstar_override: Optional[float] = None
    fit_intercept: bool = False

    @field_validator('n')
    @classmethod
    def validate_n(cls, v):
        if v < 4 or v % 2 != 0:
            raise ValueError(f"n must be even and >= 4, got {v}")
        if v & (v - 1):
            logger.warning(f"n={v} is not a power of two; FFTs will be slower")
        return v

    @field_validator('k_list')
    @classmethod
    def validate_k_list(cls, v):
        if any(k < 1 for k in v):
            raise ValueError(f"k_list entries must be >= 1, got {v}")
        return sorted(set(v))

    @property
    def n_steps(self) -> int:
        """Number of steps from t=0 to t_end."""
        return int(round(self.t_end / self.dt))

    @property
    def effective_beta_min(self) -> float:
        return self.beta_min if self.beta_min is not None else self.dt

    @model_validator(mode='after')
    def check_step_alignment(self):
        steps = self.t_end / self.dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            logger.warning(
                f"t_end={self.t_end} is not a multiple of dt={self.dt}; "
                f"running {int(round(steps))} steps"
            )
        return self


class AnalysisOptions(BaseModel):
    """Options of the two-step ratio analysis (CLI flags override config defaults)."""

    model_config = ConfigDict(extra="forbid")

    t_star: Optional[float] = Field(default=None, description="Skip peak detection and use this T*")
    beta_min: Optional[float] = Field(default=None, gt=0)
    k_set: Optional[List[int]] = Field(default=None, description="Orders to fit (default: all in CSV)")
    intercept: bool = False
    min_samples: int = Field(default=10, ge=2)
    dt: Optional[float] = Field(default=None, gt=0, description="Sample spacing for the T*±2dt band")

    @field_validator('k_set')
    @classmethod
    def validate_k_set(cls, v):
        if v is None:
            return v
        if not v:
            raise ValueError("k_set must not be empty")
        if any(k < 1 for k in v):
            raise ValueError(f"k_set entries must be >= 1, got {v}")
        return sorted(set(v))


# ============================================================================
# Diagnostics
# ============================================================================

class DiagnosticsRecord(BaseModel):
    """One time sample of the scalar diagnostics."""

    model_config = ConfigDict(frozen=True)

    t: float
    energy: float = Field(ge=0)
    enstrophy: float = Field(ge=0)
    log_norms: Dict[int, float] = Field(default_factory=dict, description="order n -> ln ||D^n u||_inf")
    log_ratios: Dict[int, float] = Field(default_factory=dict, description="k -> ln R^k")
    max_divergence: Optional[float] = None

    @property
    def k_list(self) -> List[int]:
        return sorted(self.log_ratios)


class StabilityAdvisory(BaseModel):
    """CFL and viscous numbers of one state."""

    cfl: float
    viscous_number: float
    warnings: List[str] = Field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.warnings


# ============================================================================
# Analysis results
# ============================================================================

class PeakEstimate(BaseModel):
    """Location of the global enstrophy maximum."""

    t_star: float
    index: int
    refined: bool = False
    at_boundary: bool = False


class GammaFit(BaseModel):
    """No-intercept power-law fit ln R^k = gamma_k ln(T* - t)."""

    k: int
    gamma: float
    residual_norm: float
    window: Tuple[float, float]
    n_samples: int
    intercept: Optional[float] = None


class AlphaFit(BaseModel):
    """Fit of gamma_k = k^(-a) over the ratio orders."""

    a: float
    residuals: List[float]
    k_set: List[int]
    residual_norm: float
    intercept: Optional[float] = None

    @model_validator(mode='after')
    def check_lengths(self):
        if len(self.residuals) != len(self.k_set):
            raise ValueError("residuals and k_set must have equal length")
        return self


class ScaleReport(BaseModel):
    """Sparseness scale vs analyticity scale at differential level 2k."""

    k: int
    alpha: float
    epsilon_2k: float
    log_norm_2k: float
    log_r: float
    log_rho: float
    dominant: bool
    regime: Literal["dominant", "not_dominant", "log_norm_nonpositive"]


class AnalysisReport(BaseModel):
    """Everything the two-step ratio analysis produces."""

    t_star: float
    peak: Optional[PeakEstimate] = None
    gamma_fits: List[GammaFit]
    gamma_bands: Dict[int, Tuple[float, float]] = Field(default_factory=dict)
    alpha_fit: AlphaFit
    scale_reports: List[ScaleReport]
    scale_sample_t: float
    advisory: bool = False


# ============================================================================
# Run manifest
# ============================================================================

class ManifestEntry(BaseModel):
    path: str
    size_bytes: int
    checksum: str


class RunManifest(BaseModel):
    """Config echo, code version, wall times and output inventory of a run."""

    config: Dict[str, object]
    code_version: str
    started_at: datetime
    finished_at: Optional[datetime] = None
    status: Literal["running", "finished", "failed"] = "running"
    files: List[ManifestEntry] = Field(default_factory=list)
