"""
Flat key=value run configuration files.

    # comment
    n=256
    nu=1/1600
    k_list=5,10,15

Values are read with python-dotenv and validated by SolverConfig; every
problem is reported with the 1-based line it came from.
"""

from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

from dotenv import dotenv_values
from pydantic import ValidationError

from config.logging_config import get_logger
from src.models import SolverConfig

logger = get_logger(__name__)

_LIST_KEYS = {"k_list"}
_FRACTION_KEYS = {"nu", "dt", "t_end", "beta_min", "tstar_override"}
_OPTIONAL_KEYS = {"beta_min", "tstar_override"}
_NONE_LITERALS = {"", "none", "null"}


class ConfigError(Exception):
    """Invalid configuration file or value."""

    def __init__(self, message: str, line: Optional[int] = None, path: Optional[Path] = None):
        location = ""
        if path is not None:
            location = f"{path}"
            if line is not None:
                location += f":{line}"
            location += ": "
        elif line is not None:
            location = f"line {line}: "
        super().__init__(f"{location}{message}")
        self.line = line
        self.path = path


def _scan_lines(path: Path, text: str) -> Dict[str, int]:
    """Map each key to its line; rejects malformed lines and duplicates."""
    lines: Dict[str, int] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("export "):
            line = line[len("export "):].lstrip()
        if "=" not in line:
            raise ConfigError(f"expected key=value, got {raw!r}", line=number, path=path)
        key = line.split("=", 1)[0].strip()
        if not key:
            raise ConfigError("empty key", line=number, path=path)
        if key in lines:
            raise ConfigError(f"duplicate key '{key}' (first on line {lines[key]})", line=number, path=path)
        lines[key] = number
    return lines


def _convert(key: str, value: Optional[str]) -> Any:
    if value is None:
        return None
    value = value.strip()
    if key in _OPTIONAL_KEYS and value.lower() in _NONE_LITERALS:
        return None
    if key in _LIST_KEYS:
        return [int(item) for item in value.split(",") if item.strip()]
    if key in _FRACTION_KEYS and "/" in value:
        return float(Fraction(value))
    return value


def parse_config_values(
    values: Mapping[str, Optional[str]],
    line_numbers: Optional[Mapping[str, int]] = None,
    path: Optional[Path] = None,
    overrides: Optional[Mapping[str, Any]] = None,
) -> SolverConfig:
    """
    Build a SolverConfig from raw string values.

    Raises:
        ConfigError: unknown key, unconvertible value or failed validation
    """
    line_numbers = line_numbers or {}
    known = set(SolverConfig.model_fields)
    data: Dict[str, Any] = {}

    for key, raw in values.items():
        line = line_numbers.get(key)
        if key not in known:
            raise ConfigError(f"unknown key '{key}'", line=line, path=path)
        try:
            data[key] = _convert(key, raw)
        except (ValueError, ZeroDivisionError) as e:
            raise ConfigError(f"invalid value for '{key}': {raw!r} ({e})", line=line, path=path)

    if overrides:
        for key, value in overrides.items():
            if key not in known:
                raise ConfigError(f"unknown override '{key}'")
            if value is not None:
                data[key] = value

    try:
        return SolverConfig(**data)
    except ValidationError as e:
        first = e.errors()[0]
        key = str(first["loc"][0]) if first.get("loc") else None
        line = line_numbers.get(key) if key else None
        raise ConfigError(f"'{key}': {first['msg']}", line=line, path=path) from e


def load_config(path: Path, overrides: Optional[Mapping[str, Any]] = None) -> SolverConfig:
    """
    Read and validate a run configuration file.

    Args:
        path: key=value file
        overrides: values that replace file entries (e.g. t_end on resume)

    Raises:
        ConfigError: missing file, malformed line, unknown key or invalid value
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")

    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}")

    line_numbers = _scan_lines(path, text)
    values = dotenv_values(path, interpolate=False)
    cfg = parse_config_values(values, line_numbers, path=path, overrides=overrides)
    logger.info(f"Loaded config {path}: n={cfg.n}, nu={cfg.nu}, dt={cfg.dt}, t_end={cfg.t_end}")
    return cfg


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        return ",".join(str(v) for v in value)
    return str(value)


def config_to_text(cfg: SolverConfig) -> str:
    lines = []
    for key, value in cfg.model_dump().items():
        if value is None:
            continue
        lines.append(f"{key}={_format_value(value)}")
    return "\n".join(lines) + "\n"


def write_config_echo(cfg: SolverConfig, path: Path) -> Path:
    """Write the fully resolved config; load_config(path) reproduces cfg."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(config_to_text(cfg), encoding="utf-8")
    return path
