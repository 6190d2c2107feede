"""
Run configuration: TOML files validated into RunConfig, with environment overrides.
"""

import os
import tomllib
from pathlib import Path

from dotenv import load_dotenv
from pydantic import ValidationError

from src.errors import ConfigError
from src.models.config_types import RunConfig

load_dotenv()

RUNS_ROOT_ENV = "DIFIX_RUNS_ROOT"
RUNS_ROOT_ALIAS_ENV = "VIEWFIX_RUNS_ROOT"
LOG_LEVEL_ENV = "VIEWFIX_LOG_LEVEL"
NUM_THREADS_ENV = "VIEWFIX_NUM_THREADS"


def _field_path(loc: tuple) -> str:
    return ".".join(str(p) for p in loc) or "<root>"


def load_config(path: str | Path, seed: int | None = None, runs_root: str | None = None) -> RunConfig:
    """
    Parse and validate a run config.

    `seed` replaces the file's root seed; the output root comes from `runs_root`,
    then DIFIX_RUNS_ROOT (or its VIEWFIX_RUNS_ROOT alias), then the file.

    Raises:
        ConfigError: unreadable file, TOML syntax error (with line) or schema violation (with field path).
    """
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text())
    except FileNotFoundError as e:
        raise ConfigError(f"config file not found: {path}", {"path": str(path)}) from e
    except tomllib.TOMLDecodeError as e:
        line = getattr(e, "lineno", None)
        where = f"line {line}" if line else str(e)
        raise ConfigError(f"{path}: invalid TOML at {where}", {"path": str(path), "line": line, "error": str(e)}) from e

    if seed is not None:
        raw["seed"] = seed
    root = runs_root or os.getenv(RUNS_ROOT_ENV) or os.getenv(RUNS_ROOT_ALIAS_ENV)
    if root:
        raw["output_root"] = root
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]
        fields = [_field_path(err["loc"]) for err in e.errors()]
        raise ConfigError(f"{path}: {_field_path(first['loc'])}: {first['msg']}", {"path": str(path), "fields": fields}) from e


def num_threads() -> int:
    return int(os.getenv(NUM_THREADS_ENV, "1"))


def log_level(default: str = "INFO") -> str:
    return os.getenv(LOG_LEVEL_ENV, default)
