from __future__ import annotations

import math
from typing import Callable, Dict, Mapping, Optional, Tuple, Union

Number = Union[int, float]

INTEGER_PARAMS = frozenset({"min_samples_leaf", "max_depth", "n_trees", "n_stages", "max_iter"})


UNBOUNDED_TOKENS = frozenset({"none", "inf", "unlimited"})


def parse_number(token: str) -> Optional[Number]:
    if not token:
        return None
    normalized = token.strip().replace("_", "")
    try:
        return int(normalized, 10)
    except ValueError:
        pass
    try:
        value = float(normalized)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def _positive(value: Number) -> bool:
    return value > 0


def _non_negative(value: Number) -> bool:
    return value >= 0


def _at_least_one(value: Number) -> bool:
    return value >= 1


def _unit_interval(value: Number) -> bool:
    return 0 < value <= 1


_RULES: Dict[str, Tuple[Callable[[Number], bool], str]] = {
    "alpha": (_non_negative, ">= 0"),
    "length_scale": (_positive, "> 0"),
    "jitter": (_positive, "> 0"),
    "C": (_positive, "> 0"),
    "epsilon": (_non_negative, ">= 0"),
    "tol": (_positive, "> 0"),
    "max_iter": (_at_least_one, ">= 1"),
    "min_samples_leaf": (_at_least_one, ">= 1"),
    "max_depth": (_non_negative, ">= 0"),
    "n_trees": (_at_least_one, ">= 1"),
    "feature_fraction": (_unit_interval, "in (0, 1]"),
    "n_stages": (_non_negative, ">= 0"),
    "learning_rate": (_unit_interval, "in (0, 1]"),
}


def check_hyperparameter_limits(kind: str, params: Mapping[str, object]) -> Optional[str]:
    """Return an error message for the first out-of-range hyperparameter, else None."""

    for name, value in params.items():
        if value is None or isinstance(value, bool):
            continue
        if not isinstance(value, (int, float)):
            return f"{kind}.{name} must be numeric, got {value!r}"
        if math.isnan(value):
            return f"{kind}.{name} must not be NaN"
        if name in INTEGER_PARAMS and not float(value).is_integer():
            return f"{kind}.{name} must be an integer, got {value!r}"
        rule = _RULES.get(name)
        if rule is None:
            continue
        check, description = rule
        if not check(value):
            return f"{kind}.{name} must be {description}, got {value!r}"
    return None
