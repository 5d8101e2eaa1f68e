from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, ClassVar, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..errors import ConfigError, PolishSenseError
from ..limits import check_hyperparameter_limits

MODEL_FORMAT = "polishsense-model"
MODEL_FORMAT_VERSION = 1


class ModelFitError(PolishSenseError):
    """Raised when a model cannot be fitted (e.g. a non positive-definite Gram matrix)."""


class UnsupportedOperationError(PolishSenseError):
    """Raised when an operation is not defined for a model kind."""


class ModelFormatError(PolishSenseError):
    """Raised when a persisted model document is unreadable."""


class ModelInputError(PolishSenseError):
    """Raised when prediction inputs do not match the model's features."""


class ModelKind(str, Enum):
    LINEAR = "linear"
    RIDGE = "ridge"
    GP = "gp"
    TREE = "tree"
    FOREST = "forest"
    SVR = "svr"
    GBR = "gbr"
    MEAN = "mean"
    COMMITTEE = "committee"

    @property
    def label(self) -> str:
        return _LABELS[self]

    @property
    def has_importance(self) -> bool:
        return self in (ModelKind.TREE, ModelKind.FOREST, ModelKind.GBR)


_LABELS: Dict[ModelKind, str] = {
    ModelKind.LINEAR: "Linear Regression",
    ModelKind.RIDGE: "Ridge Regression",
    ModelKind.GP: "Gaussian Process",
    ModelKind.TREE: "Decision Tree",
    ModelKind.FOREST: "Random Forest",
    ModelKind.SVR: "Support Vector Regression",
    ModelKind.GBR: "Gradient Boosting",
    ModelKind.MEAN: "Mean Baseline",
    ModelKind.COMMITTEE: "Committee",
}

# Row order of the results table; also what "all" expands to.
TABLE_ORDER: Tuple[ModelKind, ...] = (
    ModelKind.LINEAR,
    ModelKind.GP,
    ModelKind.TREE,
    ModelKind.RIDGE,
    ModelKind.FOREST,
    ModelKind.SVR,
    ModelKind.GBR,
)


@dataclass(frozen=True)
class ModelSpec:
    kind: ModelKind
    hyperparameters: Dict[str, Any] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ModelKind(self.kind))
        object.__setattr__(self, "hyperparameters", dict(self.hyperparameters))
        error = check_hyperparameter_limits(self.kind.value, self.hyperparameters)
        if error:
            raise ConfigError(error)

    def param(self, name: str) -> Any:
        return self.hyperparameters[name]

    def to_state(self) -> Dict[str, Any]:
        return {
            "kind": self.kind.value,
            "hyperparameters": dict(self.hyperparameters),
            "seed": self.seed,
        }

    @classmethod
    def from_state(cls, state: Mapping[str, Any]) -> "ModelSpec":
        return cls(
            kind=ModelKind(state["kind"]),
            hyperparameters=dict(state.get("hyperparameters", {})),
            seed=int(state.get("seed", 0)),
        )


def as_matrix(X: Any) -> np.ndarray:
    matrix = np.asarray(X, dtype=np.float64)
    if matrix.ndim == 1:
        matrix = matrix[np.newaxis, :]
    if matrix.ndim != 2:
        raise ModelInputError(f"expected a 2-D feature matrix, got shape {matrix.shape}")
    return matrix


def check_training_data(X: Any, y: Any) -> Tuple[np.ndarray, np.ndarray]:
    X = as_matrix(X)
    y = np.asarray(y, dtype=np.float64).ravel()
    if X.shape[0] < 1 or X.shape[1] < 1:
        raise ModelFitError(f"need at least one sample and one feature, got shape {X.shape}")
    if X.shape[0] != y.shape[0]:
        raise ModelFitError(f"{X.shape[0]} feature rows but {y.shape[0]} targets")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise ModelFitError("training data contain non-finite values")
    return X, y


def default_feature_names(count: int) -> List[str]:
    return [f"x{index}" for index in range(count)]


class TrainedModel(ABC):
    """Common fit/predict contract shared by every regression model."""

    supports_importance: ClassVar[bool] = False

    def __init__(self, spec: ModelSpec, feature_names: Sequence[str]) -> None:
        self.spec = spec
        self.feature_names: Tuple[str, ...] = tuple(feature_names)

    @property
    def kind(self) -> ModelKind:
        return self.spec.kind

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def _check_input(self, X: Any) -> np.ndarray:
        matrix = as_matrix(X)
        if matrix.shape[1] != self.n_features:
            raise ModelInputError(
                f"{self.kind.value} model expects {self.n_features} features, got {matrix.shape[1]}"
            )
        return matrix

    def predict(self, X: Any) -> np.ndarray:
        return self._predict(self._check_input(X))

    @abstractmethod
    def _predict(self, X: np.ndarray) -> np.ndarray:
        ...

    def feature_importance(self) -> np.ndarray:
        raise UnsupportedOperationError(f"feature importance is not defined for {self.kind.value} models")

    def top_features(self, count: int = 3) -> List[Tuple[str, float]]:
        importance = self.feature_importance()
        order = np.argsort(-importance, kind="stable")[:count]
        return [(self.feature_names[i], float(importance[i])) for i in order if importance[i] > 0]

    @abstractmethod
    def parameters_state(self) -> Dict[str, Any]:
        ...

    @classmethod
    @abstractmethod
    def from_parameters(
        cls, spec: ModelSpec, feature_names: Sequence[str], parameters: Mapping[str, Any]
    ) -> "TrainedModel":
        ...

    def to_state(self) -> Dict[str, Any]:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_FORMAT_VERSION,
            "spec": self.spec.to_state(),
            "feature_names": list(self.feature_names),
            "parameters": self.parameters_state(),
        }


def normalize_importance(raw: np.ndarray) -> np.ndarray:
    total = float(raw.sum())
    if total <= 0.0:
        return np.zeros_like(raw)
    return raw / total


def optional_names(feature_names: Optional[Sequence[str]], count: int) -> List[str]:
    if feature_names is None:
        return default_feature_names(count)
    names = list(feature_names)
    if len(names) != count:
        raise ModelFitError(f"{len(names)} feature names for {count} feature columns")
    return names
