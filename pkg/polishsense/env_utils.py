from __future__ import annotations

import logging
import os
from pathlib import Path
from typing import Dict, Mapping, Optional

from dotenv import dotenv_values

from .constants import DEFAULT_ENV_FILE, LOG_LEVEL_ENV, THREADS_ENV
from .errors import ConfigError


def load_environment(path: Optional[Path] = None) -> Dict[str, str]:
    """Merge KEY=VALUE pairs from a .env file into ``os.environ``.

    Variables already present in the process environment win over the file,
    so exported values can always override a checked-in ``.env``.
    """

    env_path = Path(path) if path is not None else DEFAULT_ENV_FILE
    if not env_path.exists():
        return {}

    loaded: Dict[str, str] = {}
    for key, value in dotenv_values(env_path).items():
        if value is None:
            continue
        loaded[key] = value
        os.environ.setdefault(key, value)
    return loaded


def resolve_env_value(name: str, env: Optional[Mapping[str, str]] = None) -> Optional[str]:
    source = os.environ if env is None else env
    value = source.get(name)
    if value is None:
        return None
    value = value.strip()
    return value or None


def resolve_thread_count(env: Optional[Mapping[str, str]] = None) -> int:
    """Worker cap for per-run extraction and LOOCV folds (default 1)."""

    raw = resolve_env_value(THREADS_ENV, env)
    if raw is None:
        return 1
    try:
        count = int(raw, 10)
    except ValueError as exc:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from exc
    if count < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return count


def resolve_log_level(env: Optional[Mapping[str, str]] = None) -> int:
    raw = resolve_env_value(LOG_LEVEL_ENV, env)
    if raw is None:
        return logging.INFO
    level = logging.getLevelName(raw.upper())
    if not isinstance(level, int):
        raise ConfigError(f"{LOG_LEVEL_ENV} is not a logging level: {raw!r}")
    return level
