"""Environment-driven defaults.

All runtime knobs that are not part of an experiment's configuration are
read from ``LAB_*`` environment variables so behaviour can be tuned without
code changes.  Entry points call :func:`load_env` first so a ``.env`` file
in the working directory is honoured.
"""

from __future__ import annotations

import logging
import os
from pathlib import Path

import numpy as np
from dotenv import find_dotenv, load_dotenv

from core.errors import ConfigError

logger = logging.getLogger(__name__)

_DTYPES = {"float64": np.float64, "float32": np.float32}


def load_env() -> None:
    """Load ``.env`` into ``os.environ`` without overriding existing values."""

    load_dotenv(find_dotenv(usecwd=True), override=False)


def default_seed() -> int:
    raw = os.environ.get("LAB_SEED", "0")
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"LAB_SEED must be an integer, got {raw!r}") from exc


def default_dtype() -> np.dtype:
    """Return the working precision; 64-bit unless ``LAB_DTYPE=float32``."""

    name = os.environ.get("LAB_DTYPE", "float64")
    if name not in _DTYPES:
        raise ConfigError(f"LAB_DTYPE must be one of {sorted(_DTYPES)}, got {name!r}")
    return np.dtype(_DTYPES[name])


def output_dir() -> Path:
    return Path(os.environ.get("LAB_OUTPUT_DIR", "."))


def log_level() -> str:
    return os.environ.get("LAB_LOG_LEVEL", "INFO").upper()


def worker_timeout() -> float:
    raw = os.environ.get("LAB_WORKER_TIMEOUT", "30")
    try:
        value = float(raw)
    except ValueError as exc:
        raise ConfigError(f"LAB_WORKER_TIMEOUT must be a number, got {raw!r}") from exc
    if value <= 0:
        raise ConfigError("LAB_WORKER_TIMEOUT must be positive")
    return value
