"""
Binary checkpoints of the spectral state.

Layout (all little-endian):

    offset  size  field
    0       8     magic b"TGVRLAB1"
    8       4     format version (uint32)
    12      4     endianness tag 0x01020304 (uint32)
    16      4     N (uint32)
    20      4     reserved, zero
    24      8     nu (float64)
    32      8     dt (float64)
    40      8     t (float64)
    48      8     step_index (int64)
    56      ...   3 coefficient blocks, complex128 as (re, im) float64 pairs,
                  C order over (component, m1 index, m2 index, m3 = 0..N/2)
    end-32  32    sha256 of everything before it

Files are written to a temporary name and renamed, so a crash never leaves a
half-written checkpoint under the final name.
"""

import hashlib
import os
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional

import numpy as np

from config.logging_config import get_logger
from src.spectral_core import SpectralVectorField, WaveGrid, make_wave_grid

logger = get_logger(__name__)

MAGIC = b"TGVRLAB1"
FORMAT_VERSION = 1
ENDIAN_TAG = 0x01020304
_HEADER = struct.Struct("<8sIIIIdddq")
_DIGEST_SIZE = 32
_COEFF_DTYPE = np.dtype("<c16")


# ============================================================================
# Custom Exceptions
# ============================================================================

class CheckpointError(Exception):
    """Base exception for checkpoint failures."""

    def __init__(self, message: str, context: dict = None, cause: Exception = None):
        super().__init__(message)
        self.context = context or {}
        self.__cause__ = cause


class CheckpointFormatError(CheckpointError):
    """Bad magic, truncated file or checksum mismatch."""
    pass


class CheckpointVersionError(CheckpointError):
    """Format version or endianness tag not understood."""
    pass


class CheckpointGridError(CheckpointError):
    """Checkpoint parameters disagree with the run it should continue."""
    pass


class CheckpointWriteError(CheckpointError):
    """Checkpoint could not be written."""
    pass


@dataclass(frozen=True)
class CheckpointHeader:
    N: int
    nu: float
    dt: float
    t: float
    step_index: int
    version: int = FORMAT_VERSION


def checkpoint_name(step_index: int) -> str:
    return f"ckpt_{step_index:09d}.bin"


def write_checkpoint(path: Path, field: SpectralVectorField, nu: float, dt: float,
                     t: float, step_index: int) -> Path:
    """
    Write one checkpoint atomically.

    Raises:
        CheckpointWriteError: the file could not be written or renamed
    """
    path = Path(path)
    header = _HEADER.pack(
        MAGIC, FORMAT_VERSION, ENDIAN_TAG, field.grid.N, 0,
        float(nu), float(dt), float(t), int(step_index),
    )
    payload = np.ascontiguousarray(field.coeffs, dtype=_COEFF_DTYPE).tobytes()
    digest = hashlib.sha256(header + payload).digest()

    tmp = path.with_suffix(path.suffix + ".tmp")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(tmp, "wb") as f:
            f.write(header)
            f.write(payload)
            f.write(digest)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp, path)
    except OSError as e:
        logger.error(f"Checkpoint write failed: {path}", exc_info=True)
        raise CheckpointWriteError(
            f"Cannot write checkpoint {path}", context={"path": str(path)}, cause=e
        )

    logger.debug(f"Checkpoint written: {path} (step {step_index}, t={t:.6f})")
    return path


def _read_header(raw: bytes, path: Path) -> CheckpointHeader:
    if len(raw) < _HEADER.size + _DIGEST_SIZE:
        raise CheckpointFormatError(f"Checkpoint {path} is truncated", context={"path": str(path)})
    magic, version, endian_tag, N, _reserved, nu, dt, t, step = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise CheckpointFormatError(
            f"Checkpoint {path} has bad magic {magic!r}", context={"path": str(path)}
        )
    if endian_tag != ENDIAN_TAG:
        raise CheckpointVersionError(
            f"Checkpoint {path} has unknown endianness tag {endian_tag:#010x}",
            context={"path": str(path)},
        )
    if version != FORMAT_VERSION:
        raise CheckpointVersionError(
            f"Checkpoint {path} is format version {version}, expected {FORMAT_VERSION}",
            context={"path": str(path), "version": version},
        )
    if N < 4 or N % 2 != 0 or not (nu > 0 and dt > 0) or step < 0:
        raise CheckpointFormatError(
            f"Checkpoint {path} header is corrupted", context={"path": str(path)}
        )
    return CheckpointHeader(N=N, nu=nu, dt=dt, t=t, step_index=step, version=version)


def read_checkpoint_header(path: Path) -> CheckpointHeader:
    path = Path(path)
    try:
        with open(path, "rb") as f:
            raw = f.read(_HEADER.size + _DIGEST_SIZE)
    except OSError as e:
        raise CheckpointFormatError(f"Cannot read checkpoint {path}", context={"path": str(path)}, cause=e)
    return _read_header(raw, path)


def read_checkpoint(path: Path, grid: Optional[WaveGrid] = None,
                    workers: Optional[int] = None):
    """
    Load a checkpoint and verify its checksum.

    Returns:
        (CheckpointHeader, SpectralVectorField)

    Raises:
        CheckpointFormatError, CheckpointVersionError, CheckpointGridError
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise CheckpointFormatError(f"Cannot read checkpoint {path}", context={"path": str(path)}, cause=e)

    header = _read_header(raw, path)
    N = header.N
    expected = _HEADER.size + 3 * N * N * (N // 2 + 1) * _COEFF_DTYPE.itemsize + _DIGEST_SIZE
    if len(raw) != expected:
        raise CheckpointFormatError(
            f"Checkpoint {path} has {len(raw)} bytes, expected {expected}",
            context={"path": str(path)},
        )
    body, digest = raw[:-_DIGEST_SIZE], raw[-_DIGEST_SIZE:]
    if hashlib.sha256(body).digest() != digest:
        raise CheckpointFormatError(f"Checkpoint {path} failed checksum", context={"path": str(path)})

    if grid is None:
        grid = make_wave_grid(N, workers=workers)
    elif grid.N != N:
        raise CheckpointGridError(
            f"Checkpoint grid N={N} does not match run grid N={grid.N}",
            context={"path": str(path), "checkpoint_N": N, "run_N": grid.N},
        )

    coeffs = np.frombuffer(body, dtype=_COEFF_DTYPE, offset=_HEADER.size)
    coeffs = coeffs.reshape((3,) + grid.spectral_shape).astype(np.complex128)
    return header, SpectralVectorField(grid, coeffs)


def list_checkpoints(directory: Path) -> List[Path]:
    """Checkpoints in a directory, oldest first."""
    directory = Path(directory)
    if not directory.is_dir():
        return []
    return sorted(directory.glob("ckpt_*.bin"))


def prune_checkpoints(directory: Path, keep: int) -> List[Path]:
    """Delete all but the newest ``keep`` checkpoints; returns the removed paths."""
    existing = list_checkpoints(directory)
    removed = existing[:-keep] if keep > 0 else existing
    for old in removed:
        try:
            old.unlink()
        except OSError:
            logger.warning(f"Could not remove old checkpoint {old}", exc_info=True)
    return removed
