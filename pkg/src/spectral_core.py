"""
Fourier-space representation of periodic velocity fields on the unit cube.

Coefficients follow u(x) = sum_m û(m) exp(2πi m·x) with m integer, stored as the
half spectrum of a real field: axes (m1, m2) run over the full lattice in FFT
order with the Nyquist mode labelled +N/2, the last axis holds m3 = 0..N/2.

All operations are pure; fields are never modified in place. Transforms run on
scipy.fft with a configurable worker count.
"""

from dataclasses import dataclass, field
from typing import Dict, Iterable, Literal, Optional

import numpy as np
import scipy.fft

from config.logging_config import get_logger

logger = get_logger(__name__)

TWO_PI = 2.0 * np.pi
_AXES = (-3, -2, -1)


# ============================================================================
# Custom Exceptions
# ============================================================================

class SpectralError(Exception):
    """Base exception for spectral-core failures."""

    def __init__(self, message: str, context: dict = None, cause: Exception = None):
        super().__init__(message)
        self.context = context or {}
        self.__cause__ = cause


class GridError(SpectralError):
    """Invalid grid size."""
    pass


class GridMismatchError(SpectralError):
    """Two fields live on different grids."""
    pass


class ZeroFieldError(SpectralError):
    """A sup norm vanishes, so its logarithm is undefined."""
    pass


# ============================================================================
# Grid and fields
# ============================================================================

@dataclass(frozen=True, eq=False)
class WaveGrid:
    """
    Integer mode lattice of an N³ grid with its multiplier tables.

    Attributes:
        N: grid points per axis
        m1, m2, m3: integer modes, broadcastable to the half-spectrum shape
        kx, ky, kz: physical wavevector components 2πm
        kx_d, ky_d, kz_d: derivative multipliers (Nyquist modes zeroed)
        k2: |2πm|², with the zero mode kept at 0
        k2_safe: k2 with the zero mode replaced by 1 (divisor for projection)
        mode_magnitude: |m| per mode
        dealias_mask: True where every |m_i| <= N // 3
        weights: multiplicity of each stored mode in the full spectrum
        m_cut: per-axis dealias cutoff N // 3
        m_max: largest resolved mode magnitude, sqrt(3) * m_cut
        workers: scipy.fft worker count
    """
    N: int
    m1: np.ndarray
    m2: np.ndarray
    m3: np.ndarray
    kx: np.ndarray
    ky: np.ndarray
    kz: np.ndarray
    kx_d: np.ndarray
    ky_d: np.ndarray
    kz_d: np.ndarray
    k2: np.ndarray
    k2_safe: np.ndarray
    mode_magnitude: np.ndarray
    dealias_mask: np.ndarray
    weights: np.ndarray
    m_cut: int
    m_max: float
    workers: int = -1

    @property
    def spectral_shape(self):
        return (self.N, self.N, self.N // 2 + 1)

    @property
    def physical_shape(self):
        return (self.N, self.N, self.N)

    def matches(self, other: "WaveGrid") -> bool:
        return self is other or self.N == other.N

    def coordinates(self):
        """Grid points x_i = i / N as three broadcast-ready (N,N,N) arrays."""
        x = np.arange(self.N) / self.N
        return np.meshgrid(x, x, x, indexing="ij")

    def mode_index(self, m: int) -> int:
        """Array index of integer mode m along a full (non-halved) axis."""
        return m % self.N


def _axis_modes(N: int) -> np.ndarray:
    m = np.arange(N)
    m[m > N // 2] -= N
    return m


def resolved_mode_magnitude(N: int) -> float:
    """Largest mode magnitude kept by the two-thirds mask, sqrt(3) * (N // 3)."""
    return float(np.sqrt(3.0) * (N // 3))


def make_wave_grid(N: int, workers: Optional[int] = None) -> WaveGrid:
    """
    Build the mode lattice, multiplier tables and two-thirds dealias mask.

    Raises:
        GridError: N odd or below 4
    """
    if not isinstance(N, (int, np.integer)) or N < 4 or N % 2 != 0:
        raise GridError(f"Grid size must be an even integer >= 4, got {N!r}", context={"N": N})
    N = int(N)

    full = _axis_modes(N)
    half = np.arange(N // 2 + 1)

    m1 = full.reshape(N, 1, 1)
    m2 = full.reshape(1, N, 1)
    m3 = half.reshape(1, 1, N // 2 + 1)

    kx, ky, kz = TWO_PI * m1, TWO_PI * m2, TWO_PI * m3

    nyquist = N // 2
    kx_d = np.where(np.abs(m1) == nyquist, 0.0, kx)
    ky_d = np.where(np.abs(m2) == nyquist, 0.0, ky)
    kz_d = np.where(m3 == nyquist, 0.0, kz)

    k2 = kx ** 2 + ky ** 2 + kz ** 2
    k2_safe = np.where(k2 == 0.0, 1.0, k2)
    mode_magnitude = np.sqrt((m1 ** 2 + m2 ** 2 + m3 ** 2).astype(float))

    m_cut = N // 3
    dealias_mask = (np.abs(m1) <= m_cut) & (np.abs(m2) <= m_cut) & (m3 <= m_cut)

    # kz = 0 and kz = N/2 planes are their own conjugate partners
    w = np.full(N // 2 + 1, 2.0)
    w[0] = 1.0
    w[-1] = 1.0
    weights = np.broadcast_to(w.reshape(1, 1, -1), (N, N, N // 2 + 1))

    if workers is None:
        workers = -1

    return WaveGrid(
        N=N,
        m1=m1,
        m2=m2,
        m3=m3,
        kx=kx,
        ky=ky,
        kz=kz,
        kx_d=kx_d,
        ky_d=ky_d,
        kz_d=kz_d,
        k2=k2,
        k2_safe=k2_safe,
        mode_magnitude=mode_magnitude,
        dealias_mask=dealias_mask,
        weights=weights,
        m_cut=m_cut,
        m_max=resolved_mode_magnitude(N),
        workers=workers,
    )


@dataclass(frozen=True, eq=False)
class SpectralVectorField:
    """Three velocity components as half-spectrum complex coefficients, shape (3, N, N, N//2+1)."""
    grid: WaveGrid
    coeffs: np.ndarray

    def __post_init__(self):
        if self.coeffs.shape != (3,) + self.grid.spectral_shape:
            raise GridMismatchError(
                f"Coefficient shape {self.coeffs.shape} does not match grid N={self.grid.N}",
                context={"shape": self.coeffs.shape, "N": self.grid.N},
            )

    def with_coeffs(self, coeffs: np.ndarray) -> "SpectralVectorField":
        return SpectralVectorField(self.grid, coeffs)

    def is_zero(self) -> bool:
        return not np.any(self.coeffs)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.coeffs)))


@dataclass(frozen=True, eq=False)
class PhysicalVectorField:
    """Three velocity components sampled at x_i = (i1, i2, i3) / N, shape (3, N, N, N)."""
    grid: WaveGrid
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != (3,) + self.grid.physical_shape:
            raise GridMismatchError(
                f"Sample shape {self.values.shape} does not match grid N={self.grid.N}",
                context={"shape": self.values.shape, "N": self.grid.N},
            )


def zero_field(grid: WaveGrid) -> SpectralVectorField:
    return SpectralVectorField(grid, np.zeros((3,) + grid.spectral_shape, dtype=np.complex128))


def _check_same_grid(a: WaveGrid, b: WaveGrid) -> None:
    if not a.matches(b):
        raise GridMismatchError(
            f"Grid mismatch: N={a.N} vs N={b.N}", context={"left": a.N, "right": b.N}
        )


# ============================================================================
# Transforms
# ============================================================================

def _rfft(grid: WaveGrid, values: np.ndarray) -> np.ndarray:
    return scipy.fft.rfftn(values, axes=_AXES, norm="forward", workers=grid.workers)


def _irfft(grid: WaveGrid, coeffs: np.ndarray) -> np.ndarray:
    return scipy.fft.irfftn(
        coeffs, s=grid.physical_shape, axes=_AXES, norm="forward", workers=grid.workers
    )


def forward_transform(p: PhysicalVectorField, grid: Optional[WaveGrid] = None) -> SpectralVectorField:
    """Physical samples -> Fourier coefficients (û = mean of u e^{-2πi m·x})."""
    if grid is not None:
        _check_same_grid(grid, p.grid)
    return SpectralVectorField(p.grid, _rfft(p.grid, p.values))


def inverse_transform(s: SpectralVectorField, grid: Optional[WaveGrid] = None) -> PhysicalVectorField:
    """Fourier coefficients -> physical samples."""
    if grid is not None:
        _check_same_grid(grid, s.grid)
    return PhysicalVectorField(s.grid, _irfft(s.grid, s.coeffs))


def parseval_sum(grid: WaveGrid, coeffs: np.ndarray) -> float:
    """Sum of |û|² over the full implied spectrum (all components)."""
    return float(np.sum(grid.weights * (coeffs.real ** 2 + coeffs.imag ** 2)))


# ============================================================================
# Spectral operators
# ============================================================================

# Relative size |k·û| / (|k| |û|) below which a mode counts as divergence-free.
# One projection leaves roughly 20 eps / sin(angle(û, k)) behind.
SOLENOIDAL_TOLERANCE = 1e-12
# Modes nearly parallel to k can need a second pass to reach the tolerance.
_PROJECTION_PASSES = 3


def _solenoidal_modes(grid: WaveGrid, c: np.ndarray):
    k_dot_u = grid.kx * c[0] + grid.ky * c[1] + grid.kz * c[2]
    size = np.sqrt(grid.k2 * np.sum(c.real ** 2 + c.imag ** 2, axis=0))
    return k_dot_u, np.abs(k_dot_u) <= SOLENOIDAL_TOLERANCE * size


def project_coeffs(grid: WaveGrid, c: np.ndarray) -> np.ndarray:
    """
    Leray projection on a raw (3, N, N, N//2+1) coefficient array.

    Modes already divergence-free to SOLENOIDAL_TOLERANCE are returned bit for
    bit, so projecting a projected field reproduces it exactly.
    """
    out = c
    for _ in range(_PROJECTION_PASSES):
        k_dot_u, solenoidal = _solenoidal_modes(grid, out)
        if solenoidal.all():
            break
        correction = k_dot_u / grid.k2_safe
        projected = np.stack(
            (
                out[0] - grid.kx * correction,
                out[1] - grid.ky * correction,
                out[2] - grid.kz * correction,
            )
        )
        out = np.where(solenoidal, out, projected)
    return out


def leray_project(s: SpectralVectorField) -> SpectralVectorField:
    """Apply P_k = I - k⊗k/|k|²; the zero mode passes through unchanged."""
    return s.with_coeffs(project_coeffs(s.grid, s.coeffs))


def dealias(s: SpectralVectorField) -> SpectralVectorField:
    """Zero every mode with some |m_i| > N // 3."""
    return s.with_coeffs(s.coeffs * s.grid.dealias_mask)


def divergence_max(s: SpectralVectorField) -> float:
    """max_m |k_phys(m) · û(m)|."""
    g = s.grid
    c = s.coeffs
    return float(np.max(np.abs(g.kx * c[0] + g.ky * c[1] + g.kz * c[2])))


def _curl(grid: WaveGrid, c: np.ndarray) -> np.ndarray:
    return np.stack(
        (
            1j * (grid.ky_d * c[2] - grid.kz_d * c[1]),
            1j * (grid.kz_d * c[0] - grid.kx_d * c[2]),
            1j * (grid.kx_d * c[1] - grid.ky_d * c[0]),
        )
    )


def curl(s: SpectralVectorField) -> SpectralVectorField:
    """Vorticity coefficients i k × û."""
    return s.with_coeffs(_curl(s.grid, s.coeffs))


def _nonlinear_convection(grid: WaveGrid, c: np.ndarray) -> np.ndarray:
    u = _irfft(grid, c)
    deriv = (grid.kx_d, grid.ky_d, grid.kz_d)
    advection = np.zeros_like(u)
    for j in range(3):
        # ∂_i u_j for i = 1..3 in one batched inverse transform
        grad_hat = np.stack([1j * deriv[i] * c[j] for i in range(3)])
        grad_u = _irfft(grid, grad_hat)
        advection[j] = u[0] * grad_u[0] + u[1] * grad_u[1] + u[2] * grad_u[2]
    return _rfft(grid, advection)


def _nonlinear_divergence(grid: WaveGrid, c: np.ndarray) -> np.ndarray:
    u = _irfft(grid, c)
    pairs = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]
    products = _rfft(grid, np.stack([u[i] * u[j] for i, j in pairs]))
    uu = {}
    for idx, (i, j) in enumerate(pairs):
        uu[(i, j)] = uu[(j, i)] = products[idx]
    deriv = (grid.kx_d, grid.ky_d, grid.kz_d)
    return np.stack(
        [sum(1j * deriv[i] * uu[(i, j)] for i in range(3)) for j in range(3)]
    )


NonlinearForm = Literal["convection", "divergence"]


def nonlinear_coeffs(
    grid: WaveGrid,
    c: np.ndarray,
    form: NonlinearForm = "convection",
    apply_dealias: bool = True,
) -> np.ndarray:
    """Array-level kernel behind nonlinear_term, used directly by the time stepper."""
    if form == "convection":
        out = _nonlinear_convection(grid, c)
    elif form == "divergence":
        out = _nonlinear_divergence(grid, c)
    else:
        raise ValueError(f"Unknown nonlinear form {form!r}")
    if apply_dealias:
        out = out * grid.dealias_mask
    return project_coeffs(grid, out)


def nonlinear_term(
    s: SpectralVectorField,
    form: NonlinearForm = "convection",
    apply_dealias: bool = True,
) -> SpectralVectorField:
    """
    P_k applied to the transform of (u·∇)u, evaluated pseudo-spectrally.

    Spectral derivatives of u, pointwise products in physical space, forward
    transform, two-thirds mask, Leray projection. ``form="divergence"`` evaluates
    ∇·(u⊗u) instead, which equals (u·∇)u for divergence-free u.
    """
    return s.with_coeffs(nonlinear_coeffs(s.grid, s.coeffs, form, apply_dealias))


# ============================================================================
# Log-safe derivative sup norms
# ============================================================================

def log_sup_norms(s: SpectralVectorField, orders: Iterable[int]) -> Dict[int, float]:
    """
    ln ||Λ^n u||_∞ for each order n, with Λ = sqrt(-Δ) acting per component.

    value = n ln(2π m_max) + ln max|inverse((|m|/m_max)^n û)|. The multiplied
    coefficients are assembled in log space and shifted so the largest one has
    unit magnitude, so nothing overflows or underflows for orders in the hundreds.

    Raises:
        ZeroFieldError: the field, or its order-n derivative, vanishes identically
    """
    grid = s.grid
    c = s.coeffs
    mag = np.abs(c)
    if not np.any(mag):
        raise ZeroFieldError("norm undefined in log space: field is identically zero")

    with np.errstate(divide="ignore", invalid="ignore"):
        log_mag = np.log(mag)
        phase = np.where(mag > 0, c / np.where(mag > 0, mag, 1.0), 0.0)
        log_ratio = np.log(grid.mode_magnitude / grid.m_max)

    log_scale = np.log(TWO_PI * grid.m_max)
    results: Dict[int, float] = {}
    for n in sorted(set(int(o) for o in orders)):
        if n < 0:
            raise ValueError(f"Derivative order must be >= 0, got {n}")
        if n == 0:
            log_mult = np.zeros_like(log_ratio)
        else:
            log_mult = n * log_ratio  # -inf at the zero mode
        log_terms = log_mult + log_mag
        shift = np.max(log_terms)
        if not np.isfinite(shift):
            raise ZeroFieldError(
                f"norm undefined in log space: order-{n} derivative vanishes",
                context={"order": n},
            )
        with np.errstate(invalid="ignore"):
            scaled = phase * np.exp(log_terms - shift)
        scaled = np.where(np.isfinite(log_terms), scaled, 0.0)
        peak = float(np.max(np.abs(_irfft(grid, scaled))))
        if peak == 0.0:
            raise ZeroFieldError(
                f"norm undefined in log space: order-{n} derivative vanishes on the grid",
                context={"order": n},
            )
        results[n] = n * log_scale + shift + float(np.log(peak))
    return results


def log_sup_norm(s: SpectralVectorField, n: int) -> float:
    """ln ||D^n u||_∞ with D^n realised as the multiplier (2π|m|)^n."""
    return log_sup_norms(s, [n])[n]


# ============================================================================
# Initial condition
# ============================================================================

def taylor_green_init(grid: WaveGrid) -> SpectralVectorField:
    """
    Exact coefficients of
        u0 = ( sin(2πx1) cos(2πx2) cos(2πx3),
              -cos(2πx1) sin(2πx2) cos(2πx3),
               0 ).
    Only the eight modes with |m1| = |m2| = |m3| = 1 are populated.
    """
    coeffs = np.zeros((3,) + grid.spectral_shape, dtype=np.complex128)
    for s1 in (1, -1):
        for s2 in (1, -1):
            i1, i2 = grid.mode_index(s1), grid.mode_index(s2)
            # m3 = +1 is stored; m3 = -1 is its implied conjugate
            coeffs[0, i1, i2, 1] = -1j * s1 / 8.0
            coeffs[1, i1, i2, 1] = 1j * s2 / 8.0
    return SpectralVectorField(grid, coeffs)
