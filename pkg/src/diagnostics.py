"""
Per-sample scalar diagnostics and their CSV persistence.

Energy and enstrophy are Parseval sums over the implied full spectrum. The
derivative ratios are kept as logarithms throughout:

    ln R^k = ln||D^k u|| / (k+1) - ln||D^{2k} u|| / (2k+1)

The CSV file starts with a schema comment, then a fixed header
``t, energy, enstrophy, logn_<order>..., lnratio_<k>..., max_divergence``.
Rows are flushed and fsynced one at a time so a killed run leaves a parseable file.
"""

import csv
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

from config.logging_config import get_logger
from src.models import DiagnosticsRecord, SolverConfig
from src.spectral_core import (
    SpectralVectorField,
    curl,
    divergence_max,
    log_sup_norms,
    parseval_sum,
)

logger = get_logger(__name__)

CSV_SCHEMA = "tgv-ratio-v1"
SCHEMA_LINE = f"# schema={CSV_SCHEMA}"


class DiagnosticsCSVError(Exception):
    """Malformed or incompatible diagnostics CSV."""

    def __init__(self, message: str, row: Optional[int] = None, context: dict = None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row
        self.context = context or {}


# ============================================================================
# Scalar diagnostics
# ============================================================================

def energy(s: SpectralVectorField) -> float:
    """E = ½ ∫|u|² dx."""
    return 0.5 * parseval_sum(s.grid, s.coeffs)


def enstrophy(s: SpectralVectorField) -> float:
    """ℰ = ½ ∫|ω|² dx with ω = ∇ × u."""
    return 0.5 * parseval_sum(s.grid, curl(s).coeffs)


def dissipation_rate(s: SpectralVectorField, nu: float) -> float:
    """-dE/dt = 2νℰ for the unforced periodic flow."""
    return 2.0 * nu * enstrophy(s)


def required_orders(k_list: Iterable[int]) -> List[int]:
    """{0} ∪ k_list ∪ 2·k_list, or nothing for an empty k_list."""
    ks = sorted(set(int(k) for k in k_list))
    if not ks:
        return []
    return sorted({0} | set(ks) | {2 * k for k in ks})


def ratio_from_log_norms(log_norm_k: float, log_norm_2k: float, k: int) -> float:
    return log_norm_k / (k + 1) - log_norm_2k / (2 * k + 1)


def ratio_log(s: SpectralVectorField, k: int) -> float:
    """ln R^k from the order-k and order-2k log sup norms."""
    if k < 1:
        raise ValueError(f"Ratio order must be >= 1, got {k}")
    norms = log_sup_norms(s, [k, 2 * k])
    return ratio_from_log_norms(norms[k], norms[2 * k], k)


def sample(state, cfg: SolverConfig) -> DiagnosticsRecord:
    """
    All diagnostics of one state for cfg.k_list.

    Each distinct derivative order is transformed once; the ratios are then
    assembled from the stored log norms.
    """
    field_ = state.field
    orders = required_orders(cfg.k_list)
    log_norms = log_sup_norms(field_, orders) if orders else {}
    log_ratios = {
        k: ratio_from_log_norms(log_norms[k], log_norms[2 * k], k) for k in cfg.k_list
    }
    return DiagnosticsRecord(
        t=state.t,
        energy=energy(field_),
        enstrophy=enstrophy(field_),
        log_norms=log_norms,
        log_ratios=log_ratios,
        max_divergence=divergence_max(field_),
    )


# ============================================================================
# CSV persistence
# ============================================================================

def csv_header(k_list: Sequence[int]) -> List[str]:
    orders = required_orders(k_list)
    return (
        ["t", "energy", "enstrophy"]
        + [f"logn_{n}" for n in orders]
        + [f"lnratio_{k}" for k in sorted(k_list)]
        + ["max_divergence"]
    )


def _record_row(record: DiagnosticsRecord, header: Sequence[str]) -> List[str]:
    row = []
    for column in header:
        if column == "t":
            value = record.t
        elif column == "energy":
            value = record.energy
        elif column == "enstrophy":
            value = record.enstrophy
        elif column == "max_divergence":
            value = record.max_divergence if record.max_divergence is not None else float("nan")
        elif column.startswith("logn_"):
            value = record.log_norms[int(column[5:])]
        else:
            value = record.log_ratios[int(column[8:])]
        row.append(repr(float(value)))
    return row


class DiagnosticsCSVWriter:
    """
    Diagnostics sink writing one CSV row per record.

    With ``resume_after_t`` set, an existing file is validated, rows later than
    that time are dropped and new rows are appended.
    """

    def __init__(
        self,
        path: Path,
        k_list: Sequence[int],
        resume_after_t: Optional[float] = None,
        time_tolerance: float = 1e-9,
    ):
        self.path = Path(path)
        self.header = csv_header(k_list)
        self.rows_written = 0

        if resume_after_t is not None and self.path.exists():
            self._truncate_after(resume_after_t, time_tolerance)
            self._handle = open(self.path, "a", newline="", encoding="utf-8")
            self._writer = csv.writer(self._handle, lineterminator="\n")
            logger.info(f"Appending diagnostics to {self.path} after t={resume_after_t}")
        else:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self._handle = open(self.path, "w", newline="", encoding="utf-8")
            self._writer = csv.writer(self._handle, lineterminator="\n")
            self._handle.write(SCHEMA_LINE + "\n")
            self._writer.writerow(self.header)
            self._sync()

    def _truncate_after(self, t_cut: float, tol: float) -> None:
        lines = self.path.read_text(encoding="utf-8").splitlines()
        if len(lines) < 2 or lines[0].strip() != SCHEMA_LINE:
            raise DiagnosticsCSVError(f"{self.path} is not a {CSV_SCHEMA} diagnostics file", row=1)
        header = next(csv.reader([lines[1]]))
        if header != self.header:
            raise DiagnosticsCSVError(
                f"{self.path} header does not match the run's k_list", row=2
            )
        kept = lines[:2]
        dropped = 0
        for line in lines[2:]:
            if not line.strip():
                continue
            fields = line.split(",")
            try:
                if len(fields) != len(self.header):
                    raise ValueError(line)
                t = float(fields[0])
            except ValueError:
                # partial last line from an interrupted write
                dropped += 1
                continue
            if t <= t_cut + tol:
                kept.append(line)
            else:
                dropped += 1
        tmp = self.path.with_suffix(self.path.suffix + ".tmp")
        tmp.write_text("\n".join(kept) + "\n", encoding="utf-8")
        os.replace(tmp, self.path)
        if dropped:
            logger.info(f"Dropped {dropped} diagnostics rows after t={t_cut}")

    def _sync(self) -> None:
        self._handle.flush()
        os.fsync(self._handle.fileno())

    def __call__(self, record: DiagnosticsRecord) -> None:
        self.write(record)

    def write(self, record: DiagnosticsRecord) -> None:
        self._writer.writerow(_record_row(record, self.header))
        self._sync()
        self.rows_written += 1

    def close(self) -> None:
        if not self._handle.closed:
            self._handle.close()

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        self.close()
        return False


@dataclass
class DiagnosticsTable:
    """Records read back from a diagnostics CSV."""
    records: List[DiagnosticsRecord]
    k_list: List[int]
    orders: List[int] = field(default_factory=list)


def _parse_header(header: List[str]):
    if header[:3] != ["t", "energy", "enstrophy"]:
        raise DiagnosticsCSVError("header must start with t,energy,enstrophy", row=2)
    orders, k_list = [], []
    for column in header[3:]:
        try:
            if column.startswith("logn_"):
                orders.append(int(column[5:]))
            elif column.startswith("lnratio_"):
                k_list.append(int(column[8:]))
            elif column != "max_divergence":
                raise ValueError(column)
        except ValueError:
            raise DiagnosticsCSVError(f"unknown column {column!r}", row=2)
    return orders, k_list


def read_diagnostics_csv(path: Path) -> DiagnosticsTable:
    """
    Parse a diagnostics CSV written by DiagnosticsCSVWriter.

    Raises:
        FileNotFoundError: path missing
        DiagnosticsCSVError: schema, header or row problems (row numbers are 1-based file lines)
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as handle:
        first = handle.readline().strip()
        if first != SCHEMA_LINE:
            raise DiagnosticsCSVError(f"expected '{SCHEMA_LINE}'", row=1)
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise DiagnosticsCSVError("missing header", row=2)
        orders, k_list = _parse_header(header)

        records: List[DiagnosticsRecord] = []
        last_t = -math.inf
        for row_number, row in enumerate(reader, start=3):
            if not row:
                continue
            if len(row) != len(header):
                raise DiagnosticsCSVError(
                    f"expected {len(header)} fields, got {len(row)}", row=row_number
                )
            try:
                values = dict(zip(header, (float(v) for v in row)))
            except ValueError as e:
                raise DiagnosticsCSVError(f"non-numeric field ({e})", row=row_number)
            if values["t"] <= last_t:
                raise DiagnosticsCSVError(
                    f"time {values['t']} not increasing", row=row_number
                )
            last_t = values["t"]
            max_div = values.get("max_divergence")
            try:
                records.append(
                    DiagnosticsRecord(
                        t=values["t"],
                        energy=values["energy"],
                        enstrophy=values["enstrophy"],
                        log_norms={n: values[f"logn_{n}"] for n in orders},
                        log_ratios={k: values[f"lnratio_{k}"] for k in k_list},
                        max_divergence=None if max_div is None or math.isnan(max_div) else max_div,
                    )
                )
            except ValueError as e:
                raise DiagnosticsCSVError(f"invalid record ({e})", row=row_number)

    logger.info(f"Read {len(records)} diagnostics rows from {path} (k_list={k_list})")
    return DiagnosticsTable(records=records, k_list=k_list, orders=orders)
