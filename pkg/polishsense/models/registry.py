from __future__ import annotations

from pathlib import Path
from typing import Any, Callable, Dict, Mapping, Optional, Sequence, Type

import numpy as np

from ..errors import ConfigError, PolishSenseError
from ..file_utils import read_json, write_json
from ..limits import INTEGER_PARAMS
from .base import (
    MODEL_FORMAT,
    ModelFormatError,
    ModelKind,
    ModelSpec,
    TrainedModel,
    check_training_data,
    optional_names,
)
from .ensemble import BoostedModel, CommitteeModel, ForestModel, MeanModel, fit_forest, fit_gbr, fit_mean
from .gaussian_process import GaussianProcessModel, fit_gp
from .linear import LinearModel, fit_linear, fit_ridge
from .svr import DEFAULT_MAX_ITER, DEFAULT_TOL, SvrModel, fit_svr
from .tree import TreeModel, fit_tree

COMMITTEE_MEMBERS = (ModelKind.TREE, ModelKind.GBR, ModelKind.SVR)

DEFAULT_HYPERPARAMETERS: Dict[ModelKind, Dict[str, Any]] = {
    ModelKind.LINEAR: {},
    ModelKind.RIDGE: {"alpha": 1.0},
    ModelKind.GP: {"length_scale": 1.0, "jitter": 1e-10},
    ModelKind.TREE: {"min_samples_leaf": 1, "max_depth": None},
    ModelKind.FOREST: {
        "n_trees": 100,
        "feature_fraction": 1.0,
        "bootstrap": True,
        "min_samples_leaf": 1,
        "max_depth": None,
    },
    ModelKind.SVR: {"C": 1.0, "epsilon": 0.1, "tol": DEFAULT_TOL, "max_iter": DEFAULT_MAX_ITER},
    ModelKind.GBR: {"n_stages": 100, "learning_rate": 0.1, "max_depth": 3, "min_samples_leaf": 1},
    ModelKind.MEAN: {},
    ModelKind.COMMITTEE: {},
}

_MODEL_CLASSES: Dict[ModelKind, Type[TrainedModel]] = {
    ModelKind.LINEAR: LinearModel,
    ModelKind.RIDGE: LinearModel,
    ModelKind.GP: GaussianProcessModel,
    ModelKind.TREE: TreeModel,
    ModelKind.FOREST: ForestModel,
    ModelKind.SVR: SvrModel,
    ModelKind.GBR: BoostedModel,
    ModelKind.MEAN: MeanModel,
    ModelKind.COMMITTEE: CommitteeModel,
}


def make_spec(kind: ModelKind, overrides: Optional[Mapping[str, Any]] = None, seed: int = 0) -> ModelSpec:
    """Merge ``overrides`` into the defaults for ``kind``; unknown names are config errors."""

    kind = ModelKind(kind)
    params = dict(DEFAULT_HYPERPARAMETERS[kind])
    for name, value in (overrides or {}).items():
        if name not in params:
            valid = ", ".join(sorted(params)) or "none"
            raise ConfigError(f"unknown hyperparameter {kind.value}.{name}; valid names: {valid}")
        if name in INTEGER_PARAMS and isinstance(value, float) and value.is_integer():
            value = int(value)
        if name == "bootstrap" and not isinstance(value, bool):
            raise ConfigError(f"{kind.value}.bootstrap must be true or false, got {value!r}")
        params[name] = value
    return ModelSpec(kind, params, seed)


def _fit_committee(X: np.ndarray, y: np.ndarray, spec: ModelSpec, names: Sequence[str]) -> CommitteeModel:
    members = [fit_model(make_spec(kind, seed=spec.seed), X, y, names) for kind in COMMITTEE_MEMBERS]
    return CommitteeModel(spec, names, members)


_FITTERS: Dict[ModelKind, Callable[[np.ndarray, np.ndarray, ModelSpec, Sequence[str]], TrainedModel]] = {
    ModelKind.LINEAR: lambda X, y, spec, names: fit_linear(X, y, feature_names=names),
    ModelKind.RIDGE: lambda X, y, spec, names: fit_ridge(X, y, feature_names=names, **spec.hyperparameters),
    ModelKind.GP: lambda X, y, spec, names: fit_gp(X, y, feature_names=names, **spec.hyperparameters),
    ModelKind.TREE: lambda X, y, spec, names: fit_tree(X, y, feature_names=names, **spec.hyperparameters),
    ModelKind.FOREST: lambda X, y, spec, names: fit_forest(
        X, y, seed=spec.seed, feature_names=names, **spec.hyperparameters
    ),
    ModelKind.SVR: lambda X, y, spec, names: fit_svr(X, y, feature_names=names, **spec.hyperparameters),
    ModelKind.GBR: lambda X, y, spec, names: fit_gbr(X, y, feature_names=names, **spec.hyperparameters),
    ModelKind.MEAN: lambda X, y, spec, names: fit_mean(X, y, feature_names=names),
    ModelKind.COMMITTEE: _fit_committee,
}


def fit_model(
    spec: ModelSpec, X: Any, y: Any, feature_names: Optional[Sequence[str]] = None
) -> TrainedModel:
    X, y = check_training_data(X, y)
    names = optional_names(feature_names, X.shape[1])
    model = _FITTERS[spec.kind](X, y, spec, names)
    model.spec = spec
    return model


def feature_importance(model: TrainedModel) -> np.ndarray:
    return model.feature_importance()


def model_from_state(state: Mapping[str, Any]) -> TrainedModel:
    if not isinstance(state, Mapping) or state.get("format") != MODEL_FORMAT:
        raise ModelFormatError("document is not a polishsense model")
    try:
        spec = ModelSpec.from_state(state["spec"])
        model_cls = _MODEL_CLASSES[spec.kind]
        return model_cls.from_parameters(spec, list(state["feature_names"]), state["parameters"])
    except (KeyError, TypeError, ValueError, ConfigError) as exc:
        raise ModelFormatError(f"malformed model document: {exc}") from exc


def save_model(model: TrainedModel, path: Path) -> Path:
    write_json(Path(path), model.to_state())
    return Path(path)


def load_model(path: Path) -> TrainedModel:
    path = Path(path)
    try:
        state = read_json(path)
    except FileNotFoundError as exc:
        raise ModelFormatError(f"model file not found: {path}") from exc
    except PolishSenseError as exc:
        raise ModelFormatError(str(exc)) from exc
    try:
        return model_from_state(state)
    except ModelFormatError as exc:
        raise ModelFormatError(f"{path}: {exc}") from exc
