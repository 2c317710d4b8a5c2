"""
Command-line entry point.

    tgv-lab simulate <config>
    tgv-lab analyze <csv> [--tstar X] [--beta-min X] [--kset a,b,c] [--out DIR]
    tgv-lab resume <checkpoint> [--t-end X]

Exit codes: 0 success, 1 numerical failure, 2 configuration or input error,
3 checkpoint error.

A simulation writes into its output directory:

    run.conf          resolved configuration (read back by resume)
    diagnostics.csv   one row per sample
    checkpoints/      rolling ckpt_<step>.bin files
    manifest.txt      config echo and file inventory with hashes
"""

import argparse
import csv
import math
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from dotenv import load_dotenv
from pydantic import ValidationError

# Load environment variables first
load_dotenv()

from config.logging_config import get_logger, setup_logging
from src import __version__
from src.analysis import AnalysisError, analysis_pipeline
from src.checkpoint import (
    CheckpointError,
    CheckpointGridError,
    read_checkpoint,
    read_checkpoint_header,
)
from src.config_loader import ConfigError, load_config, write_config_echo
from src.diagnostics import DiagnosticsCSVError, DiagnosticsCSVWriter, read_diagnostics_csv
from src.integrator import IntegrationError, SolverState, run
from src.manifest import MANIFEST_NAME, ManifestError, ManifestWriter
from src.models import AnalysisOptions, AnalysisReport, SolverConfig
from src.plotting import write_all_plots
from src.resource_guard import InsufficientMemoryError, ResourceGuard
from src.spectral_core import SpectralError

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_CONFIG = 2
EXIT_CHECKPOINT = 3

RUN_CONFIG_NAME = "run.conf"
CSV_NAME = "diagnostics.csv"
CHECKPOINT_DIR = "checkpoints"

GAMMA_FIT_NAME = "gamma_fit.csv"
ALPHA_FIT_NAME = "alpha_fit.txt"
SCALE_REPORT_NAME = "scale_report.csv"


def exit_code_for(error: BaseException) -> int:
    """Map an exception family to the CLI exit code."""
    if isinstance(error, CheckpointError):
        return EXIT_CHECKPOINT
    if isinstance(error, (ConfigError, DiagnosticsCSVError, FileNotFoundError, ValidationError)):
        return EXIT_CONFIG
    if isinstance(error, (IntegrationError, AnalysisError, SpectralError, InsufficientMemoryError)):
        return EXIT_NUMERICAL
    return EXIT_NUMERICAL


def resolve_run_dir(cfg: SolverConfig, config_path: Path) -> Path:
    """Relative output directories are taken relative to the config file."""
    out = Path(cfg.output_dir)
    return out if out.is_absolute() else (Path(config_path).parent / out)


# ============================================================================
# simulate / resume
# ============================================================================

def _integrate(cfg: SolverConfig, run_dir: Path, writer: DiagnosticsCSVWriter,
               initial: Optional[SolverState], progress: bool) -> SolverState:
    manifest = ManifestWriter(run_dir, cfg.model_dump())
    manifest.refresh("running")
    try:
        with writer:
            state = run(
                cfg,
                writer,
                initial=initial,
                checkpoint_dir=run_dir / CHECKPOINT_DIR,
                on_checkpoint=manifest.on_checkpoint,
                progress=progress,
            )
    except Exception:
        manifest.refresh("failed")
        raise
    manifest.refresh("finished")
    return state


def cmd_simulate(config_path: Path, progress: bool = True) -> int:
    config_path = Path(config_path)
    cfg = load_config(config_path)
    ResourceGuard().ensure(cfg.n)

    run_dir = resolve_run_dir(cfg, config_path)
    run_dir.mkdir(parents=True, exist_ok=True)
    write_config_echo(cfg, run_dir / RUN_CONFIG_NAME)

    writer = DiagnosticsCSVWriter(run_dir / CSV_NAME, cfg.k_list)
    state = _integrate(cfg, run_dir, writer, initial=None, progress=progress)
    print(f"Simulated N={cfg.n} to t={state.t:.6f} ({state.step_index} steps); "
          f"diagnostics in {run_dir / CSV_NAME}")
    return EXIT_OK


def cmd_resume(checkpoint_path: Path, t_end: Optional[float] = None, progress: bool = True) -> int:
    checkpoint_path = Path(checkpoint_path)
    header = read_checkpoint_header(checkpoint_path)

    run_dir = checkpoint_path.resolve().parent.parent
    config_path = run_dir / RUN_CONFIG_NAME
    if not config_path.is_file():
        raise ConfigError(f"no {RUN_CONFIG_NAME} next to checkpoint directory: {config_path}")
    cfg = load_config(config_path, overrides={"t_end": t_end, "output_dir": str(run_dir)})

    mismatched = []
    if header.N != cfg.n:
        mismatched.append(f"N {header.N} != {cfg.n}")
    if not math.isclose(header.nu, cfg.nu, rel_tol=1e-12):
        mismatched.append(f"nu {header.nu} != {cfg.nu}")
    if not math.isclose(header.dt, cfg.dt, rel_tol=1e-12):
        mismatched.append(f"dt {header.dt} != {cfg.dt}")
    if mismatched:
        raise CheckpointGridError(
            f"Checkpoint {checkpoint_path} does not match {config_path}: {', '.join(mismatched)}",
            context={"checkpoint": str(checkpoint_path)},
        )

    ResourceGuard().ensure(cfg.n)
    header, field = read_checkpoint(checkpoint_path, workers=cfg.workers)
    initial = SolverState(t=header.t, field=field, step_index=header.step_index)
    write_config_echo(cfg, config_path)

    if header.step_index >= cfg.n_steps:
        logger.info(f"Checkpoint step {header.step_index} already at t_end={cfg.t_end}; nothing to do")

    writer = DiagnosticsCSVWriter(run_dir / CSV_NAME, cfg.k_list, resume_after_t=header.t)
    state = _integrate(cfg, run_dir, writer, initial=initial, progress=progress)
    print(f"Resumed from step {header.step_index} (t={header.t:.6f}) to t={state.t:.6f}")
    return EXIT_OK


# ============================================================================
# analyze
# ============================================================================

def _analysis_defaults(csv_path: Path) -> Optional[SolverConfig]:
    config_path = csv_path.parent / RUN_CONFIG_NAME
    if not config_path.is_file():
        return None
    return load_config(config_path)


def write_gamma_fit_csv(report: AnalysisReport, path: Path) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["k", "gamma", "residual_norm", "window_start", "window_end",
                         "n_samples", "gamma_low", "gamma_high"])
        for fit in report.gamma_fits:
            low, high = report.gamma_bands.get(fit.k, (math.nan, math.nan))
            writer.writerow([fit.k, repr(fit.gamma), repr(fit.residual_norm),
                             repr(fit.window[0]), repr(fit.window[1]), fit.n_samples,
                             repr(low), repr(high)])
    return path


def write_alpha_fit_txt(report: AnalysisReport, path: Path) -> Path:
    fit = report.alpha_fit
    lines = [
        f"a = {fit.a:.6f}",
        f"t_star = {report.t_star:.6f}",
        f"peak_refined = {bool(report.peak and report.peak.refined)}",
        f"advisory = {report.advisory}",
        f"residual_norm = {fit.residual_norm:.6e}",
    ]
    if fit.intercept is not None:
        lines.append(f"intercept = {fit.intercept:.6f}")
    lines.append("k residual")
    lines.extend(f"{k} {r:.6e}" for k, r in zip(fit.k_set, fit.residuals))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def write_scale_report_csv(report: AnalysisReport, path: Path) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(["k", "alpha", "epsilon_2k", "log_norm_2k", "log_r", "log_rho",
                         "dominant", "regime", "t"])
        for row in report.scale_reports:
            writer.writerow([row.k, repr(row.alpha), repr(row.epsilon_2k), repr(row.log_norm_2k),
                             repr(row.log_r), repr(row.log_rho), str(row.dominant).lower(),
                             row.regime, repr(report.scale_sample_t)])
    return path


def cmd_analyze(
    csv_path: Path,
    t_star: Optional[float] = None,
    beta_min: Optional[float] = None,
    k_set: Optional[List[int]] = None,
    out_dir: Optional[Path] = None,
    intercept: bool = False,
) -> int:
    csv_path = Path(csv_path)
    if not csv_path.is_file():
        raise FileNotFoundError(f"diagnostics CSV not found: {csv_path}")

    table = read_diagnostics_csv(csv_path)
    if not table.k_list:
        raise DiagnosticsCSVError(f"k_list empty: {csv_path} has no lnratio_<k> columns", row=2)

    defaults = _analysis_defaults(csv_path)
    options = AnalysisOptions(
        t_star=t_star if t_star is not None else (defaults.tstar_override if defaults else None),
        beta_min=beta_min if beta_min is not None else (defaults.beta_min if defaults else None),
        k_set=k_set,
        intercept=intercept or (defaults.fit_intercept if defaults else False),
        dt=defaults.dt if defaults else None,
    )

    report = analysis_pipeline(
        table.records,
        options.k_set,
        t_star=options.t_star,
        beta_min=options.beta_min,
        dt=options.dt,
        intercept=options.intercept,
        min_samples=options.min_samples,
    )

    out_dir = Path(out_dir) if out_dir is not None else csv_path.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    write_gamma_fit_csv(report, out_dir / GAMMA_FIT_NAME)
    write_alpha_fit_txt(report, out_dir / ALPHA_FIT_NAME)
    write_scale_report_csv(report, out_dir / SCALE_REPORT_NAME)
    write_all_plots(table.records, report, out_dir)
    if (out_dir / MANIFEST_NAME).is_file():
        try:
            ManifestWriter.from_existing(out_dir).refresh()
        except ManifestError as e:
            logger.warning(f"Analysis outputs not added to manifest: {e}")

    source = "override" if options.t_star is not None else "detected"
    print(f"T* = {report.t_star:.6f} ({source})")
    print(f"a = {report.alpha_fit.a:.6f}")
    if report.advisory:
        print("advisory: enstrophy maximum at series boundary")
    return EXIT_OK


# ============================================================================
# Argument parsing
# ============================================================================

def _parse_kset(value: str) -> List[int]:
    try:
        return [int(item) for item in value.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {value!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tgv-lab",
        description="Taylor-Green vortex simulator and derivative-ratio analysis",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default=None,
                        choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
                        help="Override LOG_LEVEL")
    parser.add_argument("--no-progress", action="store_true", help="Hide the progress bar")
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="Run a simulation from a key=value config file")
    simulate.add_argument("config", type=Path)

    analyze = sub.add_parser("analyze", help="Fit gamma_k and a from a diagnostics CSV")
    analyze.add_argument("csv", type=Path)
    analyze.add_argument("--tstar", type=float, default=None, help="Use this T* instead of detecting the peak")
    analyze.add_argument("--beta-min", type=float, default=None, help="Smallest T*-t in the fit window")
    analyze.add_argument("--kset", type=_parse_kset, default=None, help="Orders to fit, e.g. 5,10,15")
    analyze.add_argument("--out", type=Path, default=None, help="Output directory (default: next to the CSV)")
    analyze.add_argument("--intercept", action="store_true", help="Fit with intercept (sensitivity mode)")

    resume = sub.add_parser("resume", help="Continue a run from a checkpoint")
    resume.add_argument("checkpoint", type=Path)
    resume.add_argument("--t-end", type=float, default=None, help="New final time")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(log_level=args.log_level)
    progress = not args.no_progress

    try:
        if args.command == "simulate":
            return cmd_simulate(args.config, progress=progress)
        if args.command == "analyze":
            return cmd_analyze(args.csv, t_star=args.tstar, beta_min=args.beta_min,
                               k_set=args.kset, out_dir=args.out, intercept=args.intercept)
        if args.command == "resume":
            return cmd_resume(args.checkpoint, t_end=args.t_end, progress=progress)
    except Exception as e:
        code = exit_code_for(e)
        logger.error(f"{args.command} failed: {e}", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return code

    parser.error(f"unknown command {args.command}")
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
