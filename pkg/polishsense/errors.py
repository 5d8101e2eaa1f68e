from __future__ import annotations


class PolishSenseError(Exception):
    """Base class for every error raised by the pipeline."""


class ConfigError(PolishSenseError):
    """Raised when a configuration file, flag or environment value is invalid."""
