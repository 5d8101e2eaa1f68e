from __future__ import annotations

from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np

from .base import (
    ModelKind,
    ModelSpec,
    TrainedModel,
    check_training_data,
    normalize_importance,
    optional_names,
)
from .tree import TreeStructure, grow_tree


def member_rng(seed: int, member: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, member]))


class ForestModel(TrainedModel):
    """Bagged CART trees; prediction is the arithmetic mean of the members."""

    supports_importance = True

    def __init__(self, spec: ModelSpec, feature_names: Sequence[str], trees: Sequence[TreeStructure]) -> None:
        super().__init__(spec, feature_names)
        self.trees: List[TreeStructure] = list(trees)

    def member_predictions(self, X: Any) -> np.ndarray:
        X = self._check_input(X)
        return np.vstack([tree.predict(X) for tree in self.trees])

    def _predict(self, X: np.ndarray) -> np.ndarray:
        total = np.zeros(X.shape[0], dtype=np.float64)
        for tree in self.trees:
            total = total + tree.predict(X)
        return total / len(self.trees)

    def feature_importance(self) -> np.ndarray:
        total = np.zeros(self.n_features, dtype=np.float64)
        for tree in self.trees:
            total = total + normalize_importance(tree.raw_importance(self.n_features))
        return normalize_importance(total / len(self.trees))

    def parameters_state(self) -> Dict[str, Any]:
        return {"trees": [tree.to_state() for tree in self.trees]}

    @classmethod
    def from_parameters(
        cls, spec: ModelSpec, feature_names: Sequence[str], parameters: Mapping[str, Any]
    ) -> "ForestModel":
        return cls(spec, feature_names, [TreeStructure.from_state(state) for state in parameters["trees"]])


def fit_forest(
    X: Any,
    y: Any,
    n_trees: int = 100,
    feature_fraction: float = 1.0,
    seed: int = 0,
    bootstrap: bool = True,
    min_samples_leaf: int = 1,
    max_depth: Optional[int] = None,
    feature_names: Optional[Sequence[str]] = None,
) -> ForestModel:
    """Member ``b`` draws its bootstrap sample and split features from ``SeedSequence([seed, b])``."""

    spec = ModelSpec(
        ModelKind.FOREST,
        {
            "n_trees": n_trees,
            "feature_fraction": feature_fraction,
            "bootstrap": bootstrap,
            "min_samples_leaf": min_samples_leaf,
            "max_depth": max_depth,
        },
        seed=seed,
    )
    X, y = check_training_data(X, y)
    n = X.shape[0]
    depth = None if max_depth is None else int(max_depth)

    trees: List[TreeStructure] = []
    for member in range(int(n_trees)):
        rng = member_rng(seed, member)
        rows = rng.integers(0, n, size=n) if bootstrap else np.arange(n)
        trees.append(grow_tree(X[rows], y[rows], int(min_samples_leaf), depth, feature_fraction, rng))
    return ForestModel(spec, optional_names(feature_names, X.shape[1]), trees)


class BoostedModel(TrainedModel):
    """``F(x) = F0 + learning_rate * Σ tree_m(x)`` under squared loss."""

    supports_importance = True

    def __init__(
        self,
        spec: ModelSpec,
        feature_names: Sequence[str],
        initial: float,
        learning_rate: float,
        stages: Sequence[TreeStructure],
    ) -> None:
        super().__init__(spec, feature_names)
        self.initial = float(initial)
        self.learning_rate = float(learning_rate)
        self.stages: List[TreeStructure] = list(stages)

    def staged_predict(self, X: Any):
        X = self._check_input(X)
        prediction = np.full(X.shape[0], self.initial)
        yield prediction
        for tree in self.stages:
            prediction = prediction + self.learning_rate * tree.predict(X)
            yield prediction

    def _predict(self, X: np.ndarray) -> np.ndarray:
        prediction = np.full(X.shape[0], self.initial)
        for tree in self.stages:
            prediction = prediction + self.learning_rate * tree.predict(X)
        return prediction

    def feature_importance(self) -> np.ndarray:
        total = np.zeros(self.n_features, dtype=np.float64)
        for tree in self.stages:
            total = total + tree.raw_importance(self.n_features)
        return normalize_importance(total)

    def parameters_state(self) -> Dict[str, Any]:
        return {
            "initial": self.initial,
            "learning_rate": self.learning_rate,
            "stages": [tree.to_state() for tree in self.stages],
        }

    @classmethod
    def from_parameters(
        cls, spec: ModelSpec, feature_names: Sequence[str], parameters: Mapping[str, Any]
    ) -> "BoostedModel":
        return cls(
            spec,
            feature_names,
            parameters["initial"],
            parameters["learning_rate"],
            [TreeStructure.from_state(state) for state in parameters["stages"]],
        )


def fit_gbr(
    X: Any,
    y: Any,
    n_stages: int = 100,
    learning_rate: float = 0.1,
    max_depth: Optional[int] = 3,
    min_samples_leaf: int = 1,
    feature_names: Optional[Sequence[str]] = None,
) -> BoostedModel:
    """Gradient boosting: each stage fits a tree to the current residuals.

    Regularisation is structural only (base-tree depth and leaf size).
    """

    spec = ModelSpec(
        ModelKind.GBR,
        {
            "n_stages": n_stages,
            "learning_rate": learning_rate,
            "max_depth": max_depth,
            "min_samples_leaf": min_samples_leaf,
        },
    )
    X, y = check_training_data(X, y)
    depth = None if max_depth is None else int(max_depth)

    initial = float(y.mean())
    fitted = np.full(y.shape[0], initial)
    stages: List[TreeStructure] = []
    for _ in range(int(n_stages)):
        residual = y - fitted
        tree = grow_tree(X, residual, int(min_samples_leaf), depth)
        stages.append(tree)
        fitted = fitted + learning_rate * tree.predict(X)
    return BoostedModel(spec, optional_names(feature_names, X.shape[1]), initial, learning_rate, stages)


class MeanModel(TrainedModel):
    """Constant predictor returning the training-target mean."""

    def __init__(self, spec: ModelSpec, feature_names: Sequence[str], value: float) -> None:
        super().__init__(spec, feature_names)
        self.value = float(value)

    def _predict(self, X: np.ndarray) -> np.ndarray:
        return np.full(X.shape[0], self.value)

    def parameters_state(self) -> Dict[str, Any]:
        return {"value": self.value}

    @classmethod
    def from_parameters(
        cls, spec: ModelSpec, feature_names: Sequence[str], parameters: Mapping[str, Any]
    ) -> "MeanModel":
        return cls(spec, feature_names, parameters["value"])


def fit_mean(X: Any, y: Any, feature_names: Optional[Sequence[str]] = None) -> MeanModel:
    X, y = check_training_data(X, y)
    return MeanModel(ModelSpec(ModelKind.MEAN), optional_names(feature_names, X.shape[1]), float(y.mean()))


class CommitteeModel(TrainedModel):
    """Average of heterogeneous member models, each fitted on the same data."""

    def __init__(self, spec: ModelSpec, feature_names: Sequence[str], members: Sequence[TrainedModel]) -> None:
        super().__init__(spec, feature_names)
        self.members: List[TrainedModel] = list(members)

    def _predict(self, X: np.ndarray) -> np.ndarray:
        total = np.zeros(X.shape[0], dtype=np.float64)
        for member in self.members:
            total = total + member.predict(X)
        return total / len(self.members)

    def parameters_state(self) -> Dict[str, Any]:
        return {"members": [member.to_state() for member in self.members]}

    @classmethod
    def from_parameters(
        cls, spec: ModelSpec, feature_names: Sequence[str], parameters: Mapping[str, Any]
    ) -> "CommitteeModel":
        from .registry import model_from_state

        return cls(spec, feature_names, [model_from_state(state) for state in parameters["members"]])
