"""
Plain-text run manifest.

    # tgv-ratio-lab run manifest
    status: finished
    code_version: 1.0.0
    started_at: 2026-01-01T12:00:00
    finished_at: 2026-01-01T12:30:00
    config.n: 256
    ...
    files:
    sha256:<hex> <size> <relative path>

Every file under the run directory is listed with its content hash. The
manifest is rewritten after each checkpoint and at the end of a run.
"""

import hashlib
import os
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from config.logging_config import get_logger
from src import __version__
from src.models import ManifestEntry, RunManifest

logger = get_logger(__name__)

MANIFEST_NAME = "manifest.txt"
_TITLE = "# tgv-ratio-lab run manifest"


class ManifestError(Exception):
    """Base exception for manifest failures."""

    def __init__(self, message: str, context: dict = None, cause: Exception = None):
        super().__init__(message)
        self.context = context or {}
        self.__cause__ = cause


class ChecksumCalculationError(ManifestError):
    """Failed to calculate file checksum."""
    pass


def calculate_checksum(file_path: Path) -> str:
    """
    SHA256 checksum of a file as "sha256:hexdigest".

    Raises:
        ChecksumCalculationError: If file cannot be read
    """
    sha256 = hashlib.sha256()
    try:
        with open(file_path, 'rb') as f:
            for chunk in iter(lambda: f.read(1 << 20), b''):
                sha256.update(chunk)
        return f"sha256:{sha256.hexdigest()}"
    except OSError as e:
        raise ChecksumCalculationError(
            f"Failed to read file for checksum: {file_path}",
            context={"file_path": str(file_path)},
            cause=e
        ) from e


def inventory(run_dir: Path) -> List[ManifestEntry]:
    """All files below run_dir except the manifest and temporary files, sorted."""
    run_dir = Path(run_dir)
    entries = []
    for path in sorted(p for p in run_dir.rglob("*") if p.is_file()):
        if path.name == MANIFEST_NAME or path.suffix == ".tmp":
            continue
        entries.append(ManifestEntry(
            path=path.relative_to(run_dir).as_posix(),
            size_bytes=path.stat().st_size,
            checksum=calculate_checksum(path),
        ))
    return entries


def render_manifest(manifest: RunManifest) -> str:
    lines = [
        _TITLE,
        f"status: {manifest.status}",
        f"code_version: {manifest.code_version}",
        f"started_at: {manifest.started_at.isoformat()}",
        f"finished_at: {manifest.finished_at.isoformat() if manifest.finished_at else ''}",
    ]
    for key, value in manifest.config.items():
        if isinstance(value, list):
            value = ",".join(str(v) for v in value)
        lines.append(f"config.{key}: {value}")
    lines.append("files:")
    for entry in manifest.files:
        lines.append(f"{entry.checksum} {entry.size_bytes} {entry.path}")
    return "\n".join(lines) + "\n"


def write_manifest(manifest: RunManifest, path: Path) -> Path:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    try:
        tmp.write_text(render_manifest(manifest), encoding="utf-8")
        os.replace(tmp, path)
    except OSError as e:
        raise ManifestError(f"Cannot write manifest {path}", context={"path": str(path)}, cause=e) from e
    return path


def read_manifest(path: Path) -> Tuple[Dict[str, str], List[ManifestEntry]]:
    """Header fields and file entries of a manifest written by write_manifest."""
    fields: Dict[str, str] = {}
    entries: List[ManifestEntry] = []
    in_files = False
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line or line.startswith("#"):
            continue
        if line == "files:":
            in_files = True
            continue
        if in_files:
            checksum, size, rel = line.split(" ", 2)
            entries.append(ManifestEntry(path=rel, size_bytes=int(size), checksum=checksum))
        else:
            key, _, value = line.partition(": ")
            fields[key] = value
    return fields, entries


class ManifestWriter:
    """Keeps manifest.txt of one run directory current."""

    def __init__(self, run_dir: Path, config: Dict[str, object],
                 code_version: Optional[str] = None):
        self.run_dir = Path(run_dir)
        self.path = self.run_dir / MANIFEST_NAME
        self.manifest = RunManifest(
            config=dict(config),
            code_version=code_version or __version__,
            started_at=datetime.now().replace(microsecond=0),
        )

    def refresh(self, status: Optional[str] = None) -> Path:
        if status is not None:
            self.manifest.status = status
            if status != "running":
                self.manifest.finished_at = datetime.now().replace(microsecond=0)
        self.manifest.files = inventory(self.run_dir)
        path = write_manifest(self.manifest, self.path)
        logger.debug(f"Manifest refreshed: {len(self.manifest.files)} files, status={self.manifest.status}")
        return path

    def on_checkpoint(self, _checkpoint: Path) -> None:
        self.refresh()

    @classmethod
    def from_existing(cls, run_dir: Path) -> "ManifestWriter":
        """
        Writer that continues the manifest already present in run_dir.

        Header fields (status, version, times, config echo) are kept as written;
        only the file inventory is recomputed on the next refresh.

        Raises:
            ManifestError: no readable manifest in run_dir
        """
        run_dir = Path(run_dir)
        path = run_dir / MANIFEST_NAME
        try:
            fields, entries = read_manifest(path)
            manifest = RunManifest(
                config={
                    key[len("config."):]: value
                    for key, value in fields.items()
                    if key.startswith("config.")
                },
                code_version=fields["code_version"],
                started_at=datetime.fromisoformat(fields["started_at"]),
                finished_at=(
                    datetime.fromisoformat(fields["finished_at"]) if fields.get("finished_at") else None
                ),
                status=fields.get("status", "running"),
                files=entries,
            )
        except (OSError, KeyError, ValueError) as e:
            raise ManifestError(f"Cannot read manifest {path}", context={"path": str(path)}, cause=e) from e

        writer = cls(run_dir, manifest.config, manifest.code_version)
        writer.manifest = manifest
        return writer
