from __future__ import annotations

import logging
from pathlib import Path
from typing import Final, Optional

from .env_utils import resolve_log_level

_ROOT_LOGGER_NAME: Final[str] = "polishsense"
_FORMAT: Final[str] = "[%(asctime)s] %(levelname)s %(message)s"
_DATE_FORMAT: Final[str] = "%Y-%m-%d %H:%M:%S"


def get_logger(name: Optional[str] = None) -> logging.Logger:
    """Return a namespaced logger with a single stderr handler."""

    full_name = _ROOT_LOGGER_NAME if not name else f"{_ROOT_LOGGER_NAME}.{name}"
    logger = logging.getLogger(full_name)
    if not logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(_FORMAT, _DATE_FORMAT))
        logger.addHandler(handler)
    logger.setLevel(resolve_log_level())
    logger.propagate = False
    return logger


def attach_log_file(logger: logging.Logger, path: Path) -> logging.FileHandler:
    """Mirror ``logger`` into ``path``; the caller removes the handler when done."""

    path.parent.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(path, mode="a", encoding="utf-8")
    handler.setFormatter(logging.Formatter(_FORMAT, _DATE_FORMAT))
    logger.addHandler(handler)
    return handler


def detach_log_file(logger: logging.Logger, handler: logging.Handler) -> None:
    logger.removeHandler(handler)
    handler.close()


def log_section(logger: logging.Logger, header: str, content: str | None = None) -> None:
    logger.info("%s", header)
    if content:
        logger.info("%s", content)
