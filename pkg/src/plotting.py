"""
SVG figures of a diagnostics run and its analysis.

Identical inputs give byte-identical files: the SVG hash salt is fixed and
no creation date is embedded.
"""

import threading
from pathlib import Path
from typing import List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import numpy as np
from matplotlib.figure import Figure

from config.logging_config import get_logger
from src.models import AnalysisReport, DiagnosticsRecord

logger = get_logger(__name__)

# matplotlib is not thread safe
_lock = threading.Lock()

_RC = {
    "svg.hashsalt": "tgv-ratio-lab",
    "svg.fonttype": "path",
    "path.simplify": False,
}
_SAVE_KW = {"format": "svg", "metadata": {"Date": None}}

PLOT_FILES = {
    "enstrophy": "enstrophy.svg",
    "energy": "energy.svg",
    "ratios": "ratios.svg",
    "gamma": "gamma_fit.svg",
    "residuals": "gamma_residuals.svg",
}


def _save(fig: Figure, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, **_SAVE_KW)
    logger.debug(f"Wrote {path}")
    return path


def _time_series(path: Path, t, y, ylabel: str, title: str,
                 t_star: Optional[float] = None, log_y: bool = False) -> Path:
    with _lock, matplotlib.rc_context(_RC):
        fig = Figure(figsize=(6.4, 4.0))
        ax = fig.add_subplot(1, 1, 1)
        ax.plot(t, y, linewidth=1.5, color="#1f4e9c")
        if t_star is not None:
            ax.axvline(t_star, color="#b22222", linestyle="--", linewidth=1.0, label=f"T* = {t_star:.3f}")
            ax.legend(loc="best")
        if log_y:
            ax.set_yscale("log")
        ax.set_xlabel("t")
        ax.set_ylabel(ylabel)
        ax.set_title(title)
        ax.grid(True, which="major", linewidth=0.5)
        return _save(fig, path)


def plot_enstrophy(records: Sequence[DiagnosticsRecord], path: Path,
                   t_star: Optional[float] = None) -> Path:
    t = [r.t for r in records]
    return _time_series(path, t, [r.enstrophy for r in records], "enstrophy", "Enstrophy", t_star)


def plot_energy(records: Sequence[DiagnosticsRecord], path: Path,
                t_star: Optional[float] = None) -> Path:
    t = [r.t for r in records]
    return _time_series(path, t, [r.energy for r in records], "kinetic energy", "Energy", t_star)


def plot_ratios(records: Sequence[DiagnosticsRecord], path: Path,
                k_list: Optional[Sequence[int]] = None, t_star: Optional[float] = None) -> Path:
    """ln R^k against t, one curve per order."""
    k_list = list(k_list) if k_list is not None else (records[0].k_list if records else [])
    t = np.array([r.t for r in records], dtype=float)
    with _lock, matplotlib.rc_context(_RC):
        fig = Figure(figsize=(6.4, 4.0))
        ax = fig.add_subplot(1, 1, 1)
        colors = matplotlib.colormaps["viridis"](np.linspace(0.0, 1.0, max(len(k_list), 1)))
        for color, k in zip(colors, k_list):
            y = np.array([r.log_ratios.get(k, np.nan) for r in records], dtype=float)
            ax.plot(t, y, linewidth=1.0, color=color, label=f"k={k}")
        if t_star is not None:
            ax.axvline(t_star, color="#b22222", linestyle="--", linewidth=1.0)
        ax.set_xlabel("t")
        ax.set_ylabel("ln R^k")
        ax.set_title("Derivative ratios")
        ax.grid(True, which="major", linewidth=0.5)
        if 0 < len(k_list) <= 10:
            ax.legend(loc="best", fontsize="small")
        return _save(fig, path)


def plot_gamma_fit(report: AnalysisReport, path: Path) -> Path:
    """γ_k against k on log-log axes with the fitted k^(-a)."""
    ks = np.array([g.k for g in report.gamma_fits], dtype=float)
    gammas = np.array([g.gamma for g in report.gamma_fits], dtype=float)
    a = report.alpha_fit.a
    scale = np.exp(report.alpha_fit.intercept) if report.alpha_fit.intercept is not None else 1.0
    with _lock, matplotlib.rc_context(_RC):
        fig = Figure(figsize=(6.4, 4.0))
        ax = fig.add_subplot(1, 1, 1)
        positive = gammas > 0
        ax.plot(ks[positive], gammas[positive], "o", color="#1f4e9c", label="least-squares γ_k")
        bands = report.gamma_bands
        if bands:
            k_band = np.array(sorted(bands), dtype=float)
            low = np.array([bands[int(k)][0] for k in k_band])
            high = np.array([bands[int(k)][1] for k in k_band])
            ax.vlines(k_band, low, high, color="#7f7f7f", linewidth=1.0, label="T* ± 2dt")
        k_fine = np.linspace(max(ks.min(), 1.0), ks.max(), 200) if ks.size else np.array([])
        ax.plot(k_fine, scale * k_fine ** (-a), color="#b22222", label=f"k^(-{a:.3f})")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("k")
        ax.set_ylabel("γ_k")
        ax.set_title(f"Exponent fit, T* = {report.t_star:.3f}")
        ax.grid(True, which="both", linewidth=0.5)
        ax.legend(loc="best")
        return _save(fig, path)


def plot_gamma_residuals(report: AnalysisReport, path: Path) -> Path:
    """γ_k - k^(-a) against k."""
    with _lock, matplotlib.rc_context(_RC):
        fig = Figure(figsize=(6.4, 4.0))
        ax = fig.add_subplot(1, 1, 1)
        ax.plot(report.alpha_fit.k_set, report.alpha_fit.residuals, "s-", color="#1f4e9c", linewidth=1.0)
        ax.axhline(0.0, color="black", linewidth=0.5)
        ax.set_xlabel("k")
        ax.set_ylabel("γ_k - k^(-a)")
        ax.set_title(f"Residuals, a = {report.alpha_fit.a:.4f}")
        ax.grid(True, which="major", linewidth=0.5)
        return _save(fig, path)


def write_all_plots(records: Sequence[DiagnosticsRecord], report: Optional[AnalysisReport],
                    out_dir: Path) -> List[Path]:
    """Every figure for a run; the fit figures only when a report is given."""
    out_dir = Path(out_dir)
    t_star = report.t_star if report is not None else None
    written = [
        plot_enstrophy(records, out_dir / PLOT_FILES["enstrophy"], t_star),
        plot_energy(records, out_dir / PLOT_FILES["energy"], t_star),
        plot_ratios(records, out_dir / PLOT_FILES["ratios"], t_star=t_star),
    ]
    if report is not None:
        written.append(plot_gamma_fit(report, out_dir / PLOT_FILES["gamma"]))
        written.append(plot_gamma_residuals(report, out_dir / PLOT_FILES["residuals"]))
    logger.info(f"Wrote {len(written)} figures to {out_dir}")
    return written
