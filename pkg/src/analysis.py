"""
Two-step ratio analysis.

1. For every order k the ratio series is fitted to ln R^k = γ_k ln β with
   β = T* - t over the unit interval before the enstrophy peak T*.
2. The exponents are fitted to γ_k = k^(-a).

The fitted a then feeds the comparison of the level-2k sparseness scale with
the analyticity-radius scale. All fits are closed-form normal equations
without intercept unless ``intercept=True``.
"""

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from config.logging_config import get_logger
from src.event_logger import EventLogger
from src.models import (
    AlphaFit,
    AnalysisReport,
    DiagnosticsRecord,
    GammaFit,
    PeakEstimate,
    ScaleReport,
)

logger = get_logger(__name__)

# Upper end of the fit window: β <= 1, with slack for floating-point T*
_WINDOW_LENGTH = 1.0
_WINDOW_SLACK = 1e-9


# ============================================================================
# Custom Exceptions
# ============================================================================

class AnalysisError(Exception):
    """Base exception for analysis failures."""

    def __init__(self, message: str, context: dict = None):
        super().__init__(message)
        self.context = context or {}


class PeakDetectionError(AnalysisError):
    """Series too short, constant or non-finite."""
    pass


class FitWindowError(AnalysisError):
    """Too few usable samples in the fit window."""
    pass


class NonPowerLawError(AnalysisError):
    """Data cannot follow the assumed power law (e.g. γ_k <= 0)."""
    pass


# ============================================================================
# Ratio series
# ============================================================================

@dataclass(frozen=True)
class RatioSeries:
    """ln R^k(t_i) for several orders on a common, strictly increasing time axis."""
    t: np.ndarray
    log_ratios: Dict[int, np.ndarray]
    metadata: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        if t.ndim != 1:
            raise AnalysisError("time axis must be one-dimensional")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise AnalysisError("time axis must be strictly increasing")
        for k, values in self.log_ratios.items():
            if np.asarray(values).shape != t.shape:
                raise AnalysisError(f"ratio series k={k} has {np.size(values)} samples, expected {t.size}")
        object.__setattr__(self, "t", t)
        object.__setattr__(
            self, "log_ratios", {int(k): np.asarray(v, dtype=float) for k, v in self.log_ratios.items()}
        )

    @property
    def k_list(self) -> List[int]:
        return sorted(self.log_ratios)

    @classmethod
    def from_records(cls, records: Sequence[DiagnosticsRecord],
                     metadata: Optional[Dict[str, object]] = None) -> "RatioSeries":
        k_list = records[0].k_list if records else []
        t = np.array([r.t for r in records], dtype=float)
        log_ratios = {}
        for k in k_list:
            try:
                log_ratios[k] = np.array([r.log_ratios[k] for r in records], dtype=float)
            except KeyError:
                raise AnalysisError(f"ratio order k={k} missing from some records")
        return cls(t=t, log_ratios=log_ratios, metadata=dict(metadata or {}))


# ============================================================================
# Peak detection
# ============================================================================

def _parabola_vertex(t: np.ndarray, y: np.ndarray) -> Optional[float]:
    # Vertex of the parabola through three points, in coordinates centred on t[1]
    x0, x2 = t[0] - t[1], t[2] - t[1]
    d0, d2 = y[0] - y[1], y[2] - y[1]
    denom = x0 * x2 * (x0 - x2)
    if denom == 0:
        return None
    a = (x2 * d0 - x0 * d2) / denom
    b = (x0 * x0 * d2 - x2 * x2 * d0) / denom
    if not a < 0:
        return None
    return t[1] - b / (2.0 * a)


def detect_peak(t: Sequence[float], values: Sequence[float]) -> PeakEstimate:
    """
    Time of the global maximum of a sampled series.

    The discrete argmax is refined by the vertex of the parabola through it and
    its two neighbours, clamped to the neighbours' interval. An argmax at either
    end is returned unrefined and flagged ``at_boundary``.

    Raises:
        PeakDetectionError: fewer than 3 samples, non-finite or constant values
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(values, dtype=float)
    if t.shape != y.shape or t.ndim != 1:
        raise PeakDetectionError("time and value series must be 1-D and of equal length")
    if t.size < 3:
        raise PeakDetectionError(f"peak detection needs >= 3 samples, got {t.size}")
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(y))):
        raise PeakDetectionError("series contains non-finite values")
    if np.ptp(y) == 0:
        raise PeakDetectionError("series is constant; no peak")

    i = int(np.argmax(y))
    if i == 0 or i == t.size - 1:
        logger.warning(
            f"Enstrophy maximum at series boundary (t={t[i]:.6f}); results are advisory",
            extra={"numerics": True},
        )
        return PeakEstimate(t_star=float(t[i]), index=i, refined=False, at_boundary=True)

    vertex = _parabola_vertex(t[i - 1:i + 2], y[i - 1:i + 2])
    if vertex is None or not np.isfinite(vertex):
        return PeakEstimate(t_star=float(t[i]), index=i)
    vertex = float(np.clip(vertex, t[i - 1], t[i + 1]))
    return PeakEstimate(t_star=vertex, index=i, refined=True)


# ============================================================================
# γ_k fit
# ============================================================================

def gamma_normal_equation(log_beta: Sequence[float], log_ratio: Sequence[float]) -> float:
    """γ = Σ ln β · ln R / Σ (ln β)²."""
    x = np.asarray(log_beta, dtype=float)
    y = np.asarray(log_ratio, dtype=float)
    denom = float(np.dot(x, x))
    if denom == 0.0:
        raise FitWindowError("all samples have beta = 1; slope undefined")
    return float(np.dot(x, y)) / denom


def _window_mask(t: np.ndarray, t_star: float, beta_min: float) -> np.ndarray:
    beta = t_star - t
    return (beta >= beta_min) & (beta <= _WINDOW_LENGTH + _WINDOW_SLACK)


def fit_gamma(
    series: RatioSeries,
    k: int,
    t_star: float,
    beta_min: float,
    *,
    min_samples: int = 10,
    intercept: bool = False,
) -> GammaFit:
    """
    Fit ln R^k = γ_k ln β over the window β ∈ [beta_min, 1].

    Args:
        min_samples: smallest number of window samples accepted
        intercept: fit ln R^k = γ_k ln β + c instead (sensitivity mode)

    Raises:
        FitWindowError: beta_min <= 0, too few samples, or all β equal to 1
        NonPowerLawError: non-finite ratios inside the window
    """
    if k not in series.log_ratios:
        raise AnalysisError(f"no ratio series for k={k}", context={"k": k})
    if not beta_min > 0:
        raise FitWindowError(f"beta_min must be positive, got {beta_min}")

    mask = _window_mask(series.t, t_star, beta_min)
    n_samples = int(np.count_nonzero(mask))
    if n_samples < min_samples:
        raise FitWindowError(
            f"fit window [{t_star - _WINDOW_LENGTH:.6f}, {t_star - beta_min:.6f}] holds "
            f"{n_samples} samples for k={k}, need >= {min_samples}",
            context={"k": k, "n_samples": n_samples, "t_star": t_star},
        )

    log_beta = np.log(t_star - series.t[mask])
    log_ratio = series.log_ratios[k][mask]
    if not np.all(np.isfinite(log_ratio)):
        raise NonPowerLawError(f"non-finite ln R^{k} inside the fit window", context={"k": k})

    offset = None
    if intercept:
        design = np.column_stack([log_beta, np.ones_like(log_beta)])
        (gamma, offset), *_ = np.linalg.lstsq(design, log_ratio, rcond=None)
        gamma, offset = float(gamma), float(offset)
        residual = log_ratio - gamma * log_beta - offset
    else:
        gamma = gamma_normal_equation(log_beta, log_ratio)
        residual = log_ratio - gamma * log_beta

    return GammaFit(
        k=k,
        gamma=gamma,
        residual_norm=float(np.sqrt(np.mean(residual ** 2))),
        window=(t_star - _WINDOW_LENGTH, t_star - beta_min),
        n_samples=n_samples,
        intercept=offset,
    )


def gamma_uncertainty_band(
    series: RatioSeries,
    k: int,
    t_star: float,
    dt: float,
    beta_min: float,
    *,
    min_samples: int = 10,
    intercept: bool = False,
) -> Tuple[float, float]:
    """(low, high) of γ_k refitted with T* shifted by -2dt and +2dt."""
    gammas = [
        fit_gamma(series, k, t_star + shift, beta_min, min_samples=min_samples, intercept=intercept).gamma
        for shift in (-2.0 * dt, 2.0 * dt)
    ]
    return min(gammas), max(gammas)


# ============================================================================
# a fit
# ============================================================================

GammaPairs = Union[Mapping[int, float], Iterable[Tuple[int, float]]]


def fit_alpha(gammas: GammaPairs, *, intercept: bool = False) -> AlphaFit:
    """
    Fit γ_k = k^(-a): a = -Σ ln k ln γ_k / Σ (ln k)².

    k = 1 carries no weight (ln 1 = 0) and is dropped.

    Raises:
        NonPowerLawError: some γ_k <= 0 or non-finite
        AnalysisError: no order >= 2 left
    """
    pairs = sorted((gammas.items() if isinstance(gammas, Mapping) else gammas), key=lambda p: p[0])
    bad = [(k, g) for k, g in pairs if not (np.isfinite(g) and g > 0)]
    if bad:
        raise NonPowerLawError(
            f"non-power-law ratio data: gamma_k <= 0 for k={[k for k, _ in bad]}",
            context={"gammas": dict(bad)},
        )
    if any(k == 1 for k, _ in pairs):
        logger.info("Dropping k=1 from the a-fit (zero weight)")
    pairs = [(k, g) for k, g in pairs if k >= 2]
    if not pairs:
        raise AnalysisError("a-fit needs at least one order k >= 2")

    k_set = [int(k) for k, _ in pairs]
    log_k = np.log(np.array(k_set, dtype=float))
    log_gamma = np.log(np.array([g for _, g in pairs], dtype=float))
    gamma = np.exp(log_gamma)

    offset = None
    if intercept and len(pairs) >= 2:
        design = np.column_stack([log_k, np.ones_like(log_k)])
        (slope, offset), *_ = np.linalg.lstsq(design, log_gamma, rcond=None)
        a, offset = -float(slope), float(offset)
        residuals = gamma - np.exp(offset) * np.array(k_set, dtype=float) ** (-a)
    else:
        if intercept:
            logger.warning("Intercept a-fit needs >= 2 orders; fitting without intercept")
        a = -float(np.dot(log_k, log_gamma) / np.dot(log_k, log_k))
        residuals = gamma - np.array(k_set, dtype=float) ** (-a)

    return AlphaFit(
        a=a,
        residuals=[float(r) for r in residuals],
        k_set=k_set,
        residual_norm=float(np.sqrt(np.mean(residuals ** 2))),
        intercept=offset,
    )


# ============================================================================
# Scale comparison
# ============================================================================

def epsilon_2k(k, alpha):
    """4(k+1)/k^α; accepts scalars or numpy arrays of orders."""
    k_arr = np.asarray(k, dtype=float)
    result = 4.0 * (k_arr + 1.0) / k_arr ** alpha
    return float(result) if result.ndim == 0 else result


def scale_comparison(
    log_norm_2k: float,
    k: int,
    alpha: float,
    epsilon: Optional[float] = None,
) -> ScaleReport:
    """
    Compare the level-2k sparseness scale with the analyticity-radius scale.

        ln r   = -L / (2k + 3/2)
        ln rho = -L / ((1 + ε_2k)(2k + 1))

    with L = ln ||D^{2k} u||. Scales stay in log space. For L <= 0 the
    comparison reverses and the report is flagged instead of claiming dominance.

    Args:
        epsilon: override ε_2k (default: epsilon_2k(k, alpha))
    """
    if not np.isfinite(log_norm_2k):
        raise AnalysisError(f"log norm at level {2 * k} is not finite", context={"k": k})
    eps = epsilon_2k(k, alpha) if epsilon is None else float(epsilon)

    log_r = -log_norm_2k / (2 * k + 1.5)
    log_rho = -log_norm_2k / ((1.0 + eps) * (2 * k + 1))

    if log_norm_2k <= 0:
        dominant = False
        regime = "log_norm_nonpositive"
    else:
        dominant = bool(log_rho > log_r)
        regime = "dominant" if dominant else "not_dominant"

    return ScaleReport(
        k=k,
        alpha=alpha,
        epsilon_2k=eps,
        log_norm_2k=float(log_norm_2k),
        log_r=float(log_r),
        log_rho=float(log_rho),
        dominant=dominant,
        regime=regime,
    )


# ============================================================================
# Pipeline
# ============================================================================

def _sample_spacing(t: np.ndarray) -> Optional[float]:
    steps = np.diff(t)
    steps = steps[steps > 0]
    return float(np.min(steps)) if steps.size else None


def analysis_pipeline(
    records: Sequence[DiagnosticsRecord],
    k_set: Optional[Sequence[int]] = None,
    *,
    t_star: Optional[float] = None,
    beta_min: Optional[float] = None,
    dt: Optional[float] = None,
    intercept: bool = False,
    min_samples: int = 10,
) -> AnalysisReport:
    """
    detect_peak -> fit_gamma for every k -> fit_alpha -> scale_comparison.

    Args:
        records: diagnostics samples spanning the enstrophy peak
        k_set: orders to fit (default: every order in the records)
        t_star: use this T* and skip peak detection
        beta_min: smallest β in the window (default: dt)
        dt: time step for the T*±2dt band (default: sample spacing)

    Raises:
        AnalysisError and subclasses; a peak at the series boundary only marks
        the report as advisory
    """
    if not records:
        raise AnalysisError("no diagnostics records")

    series = RatioSeries.from_records(records)
    if k_set is None:
        k_set = series.k_list
    k_set = sorted(set(int(k) for k in k_set))
    if not k_set:
        raise AnalysisError("k_list empty: no ratio columns to fit")
    missing = [k for k in k_set if k not in series.log_ratios]
    if missing:
        raise AnalysisError(f"ratio orders {missing} not present in the data", context={"missing": missing})

    peak = None
    advisory = False
    if t_star is None:
        enstrophy = np.array([r.enstrophy for r in records], dtype=float)
        peak = detect_peak(series.t, enstrophy)
        t_star = peak.t_star
        advisory = peak.at_boundary
    logger.info(f"Analysing {len(records)} samples with T*={t_star:.6f} for k={k_set}")

    if dt is None:
        dt = _sample_spacing(series.t)
    if beta_min is None:
        if dt is None:
            raise FitWindowError("cannot derive beta_min from a single sample")
        beta_min = dt

    pre_peak = np.flatnonzero(series.t < t_star)
    if pre_peak.size < min_samples:
        raise FitWindowError(
            f"{pre_peak.size} samples before T*={t_star:.6f}, need >= {min_samples}",
            context={"t_star": t_star, "n_samples": int(pre_peak.size)},
        )

    gamma_fits = [
        fit_gamma(series, k, t_star, beta_min, min_samples=min_samples, intercept=intercept)
        for k in k_set
    ]

    gamma_bands: Dict[int, Tuple[float, float]] = {}
    if dt is not None:
        for k in k_set:
            try:
                gamma_bands[k] = gamma_uncertainty_band(
                    series, k, t_star, dt, beta_min, min_samples=min_samples, intercept=intercept
                )
            except AnalysisError as e:
                logger.warning(f"No T*±2dt band for k={k}: {e}")

    alpha_fit = fit_alpha([(g.k, g.gamma) for g in gamma_fits], intercept=intercept)

    last = records[int(pre_peak[-1])]
    scale_reports = []
    for k in k_set:
        log_norm = last.log_norms.get(2 * k)
        if log_norm is None:
            logger.warning(f"No order-{2 * k} log norm at t={last.t}; skipping scale comparison for k={k}")
            continue
        scale_reports.append(scale_comparison(log_norm, k, alpha_fit.a))

    EventLogger.log_analysis_finished(t_star, alpha_fit.a, alpha_fit.k_set, advisory)
    return AnalysisReport(
        t_star=t_star,
        peak=peak,
        gamma_fits=gamma_fits,
        gamma_bands=gamma_bands,
        alpha_fit=alpha_fit,
        scale_reports=scale_reports,
        scale_sample_t=last.t,
        advisory=advisory,
    )
