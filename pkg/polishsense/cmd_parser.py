from __future__ import annotations

from typing import Any, Dict, Iterable, List

from .errors import ConfigError
from .features import FeatureMode
from .limits import UNBOUNDED_TOKENS, parse_number
from .models.base import TABLE_ORDER, ModelKind


def _split_list(text: str) -> List[str]:
    return [item.strip().lower() for item in text.split(",") if item.strip()]


def parse_model_list(text: str) -> List[ModelKind]:
    """Parse ``--models``: comma-separated kinds, ``all`` expands to the table rows."""

    kinds: List[ModelKind] = []
    for token in _split_list(text):
        expanded = list(TABLE_ORDER) if token == "all" else None
        if expanded is None:
            try:
                expanded = [ModelKind(token)]
            except ValueError as exc:
                valid = ", ".join([kind.value for kind in ModelKind] + ["all"])
                raise ConfigError(f"unknown model {token!r}; valid kinds: {valid}") from exc
        for kind in expanded:
            if kind not in kinds:
                kinds.append(kind)
    if not kinds:
        raise ConfigError("no models selected")
    return kinds


def parse_modes(text: str) -> List[FeatureMode]:
    modes: List[FeatureMode] = []
    for token in _split_list(text):
        expanded = [FeatureMode.TOGETHER, FeatureMode.SEPARATE] if token == "both" else [FeatureMode.parse(token)]
        for mode in expanded:
            if mode not in modes:
                modes.append(mode)
    if not modes:
        raise ConfigError("no feature modes selected")
    return modes


_TRUE_TOKENS = frozenset({"true", "yes", "on"})
_FALSE_TOKENS = frozenset({"false", "no", "off"})
_FLAG_PARAMS = frozenset({"bootstrap"})


def _parse_value(name: str, token: str) -> Any:
    lowered = token.strip().lower()
    if name in _FLAG_PARAMS:
        if lowered in _TRUE_TOKENS:
            return True
        if lowered in _FALSE_TOKENS:
            return False
        raise ConfigError(f"{name} must be true or false, got {token!r}")
    if lowered in _TRUE_TOKENS | _FALSE_TOKENS:
        raise ConfigError(f"{name}: {token!r} is a flag value; {name} takes a number")
    if lowered in UNBOUNDED_TOKENS:
        if name != "max_depth":
            raise ConfigError(f"only max_depth may be unbounded, got {name}={token}")
        return None
    value = parse_number(token)
    if value is None:
        raise ConfigError(f"{name}: {token!r} is not a number")
    return value


def parse_param_assignments(items: Iterable[str]) -> Dict[ModelKind, Dict[str, Any]]:
    """Parse repeated ``kind.name=value`` overrides into per-kind dictionaries."""

    overrides: Dict[ModelKind, Dict[str, Any]] = {}
    for item in items:
        key, sep, raw_value = item.partition("=")
        kind_name, dot, name = key.strip().partition(".")
        if not sep or not dot or not name:
            raise ConfigError(f"expected kind.name=value, got {item!r}")
        try:
            kind = ModelKind(kind_name.lower())
        except ValueError as exc:
            raise ConfigError(f"unknown model {kind_name!r} in --param {item!r}") from exc
        overrides.setdefault(kind, {})[name] = _parse_value(name, raw_value)
    return overrides
