"""
CART regression trees stored as flat node arrays.

Each node ``k`` holds ``feature[k]`` (-1 for leaves), ``threshold[k]``, the
child ids ``left[k]`` / ``right[k]``, the leaf value ``value[k]`` (mean target of
the node's samples), ``n_samples[k]`` and ``impurity_decrease[k]`` (parent SSE
minus the children's summed SSE). A sample goes left when
``x[feature] <= threshold``.

Split candidates sit at midpoints between consecutive distinct sorted values of a
feature. The best candidate minimises the children's summed squared error; near
ties keep the lowest feature index, then the lowest threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .base import (
    ModelKind,
    ModelSpec,
    TrainedModel,
    check_training_data,
    normalize_importance,
    optional_names,
)

LEAF = -1
_TIE_TOLERANCE = 1e-12


@dataclass
class TreeStructure:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray
    impurity_decrease: np.ndarray

    @property
    def node_count(self) -> int:
        return int(self.feature.shape[0])

    @property
    def depth(self) -> int:
        depths = np.zeros(self.node_count, dtype=np.int64)
        for node in range(self.node_count):
            if self.feature[node] != LEAF:
                depths[self.left[node]] = depths[node] + 1
                depths[self.right[node]] = depths[node] + 1
        return int(depths.max())

    def predict(self, X: np.ndarray) -> np.ndarray:
        nodes = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            features = self.feature[nodes]
            rows = np.flatnonzero(features != LEAF)
            if rows.size == 0:
                break
            current = nodes[rows]
            go_left = X[rows, features[rows]] <= self.threshold[current]
            nodes[rows] = np.where(go_left, self.left[current], self.right[current])
        return self.value[nodes]

    def raw_importance(self, n_features: int) -> np.ndarray:
        importance = np.zeros(n_features, dtype=np.float64)
        for node in range(self.node_count):
            if self.feature[node] != LEAF:
                importance[self.feature[node]] += self.impurity_decrease[node]
        return importance

    def to_state(self) -> Dict[str, Any]:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "n_samples": self.n_samples.tolist(),
            "impurity_decrease": self.impurity_decrease.tolist(),
        }

    @classmethod
    def from_state(cls, state: Mapping[str, Any]) -> "TreeStructure":
        return cls(
            feature=np.array(state["feature"], dtype=np.int64),
            threshold=np.array(state["threshold"], dtype=np.float64),
            left=np.array(state["left"], dtype=np.int64),
            right=np.array(state["right"], dtype=np.int64),
            value=np.array(state["value"], dtype=np.float64),
            n_samples=np.array(state["n_samples"], dtype=np.int64),
            impurity_decrease=np.array(state["impurity_decrease"], dtype=np.float64),
        )


@dataclass
class _Split:
    feature: int
    threshold: float
    child_sse: float
    left_mask: np.ndarray = field(repr=False)


@dataclass
class _Arena:
    feature: List[int] = field(default_factory=list)
    threshold: List[float] = field(default_factory=list)
    left: List[int] = field(default_factory=list)
    right: List[int] = field(default_factory=list)
    value: List[float] = field(default_factory=list)
    n_samples: List[int] = field(default_factory=list)
    impurity_decrease: List[float] = field(default_factory=list)

    def add_leaf(self, value: float, n_samples: int) -> int:
        self.feature.append(LEAF)
        self.threshold.append(0.0)
        self.left.append(LEAF)
        self.right.append(LEAF)
        self.value.append(value)
        self.n_samples.append(n_samples)
        self.impurity_decrease.append(0.0)
        return len(self.feature) - 1

    def freeze(self) -> TreeStructure:
        return TreeStructure(
            feature=np.array(self.feature, dtype=np.int64),
            threshold=np.array(self.threshold, dtype=np.float64),
            left=np.array(self.left, dtype=np.int64),
            right=np.array(self.right, dtype=np.int64),
            value=np.array(self.value, dtype=np.float64),
            n_samples=np.array(self.n_samples, dtype=np.int64),
            impurity_decrease=np.array(self.impurity_decrease, dtype=np.float64),
        )


def _sse(values: np.ndarray) -> float:
    centered = values - values.mean()
    return float(centered @ centered)


def _best_split_on_feature(
    column: np.ndarray, targets: np.ndarray, min_samples_leaf: int
) -> Optional[Tuple[float, float]]:
    """Return ``(child_sse, threshold)`` of the best split on one feature."""

    order = np.argsort(column, kind="stable")
    xs = column[order]
    ys = targets[order]
    n = xs.shape[0]

    cum = np.cumsum(ys)
    cum_sq = np.cumsum(ys * ys)
    total, total_sq = cum[-1], cum_sq[-1]

    # position i splits into xs[:i+1] | xs[i+1:]
    positions = np.arange(min_samples_leaf - 1, n - min_samples_leaf)
    if positions.size == 0:
        return None
    positions = positions[xs[positions] < xs[positions + 1]]
    if positions.size == 0:
        return None

    n_left = positions + 1.0
    n_right = n - n_left
    left_sum = cum[positions]
    right_sum = total - left_sum
    child_sse = (total_sq - left_sum * left_sum / n_left - right_sum * right_sum / n_right)
    child_sse = np.maximum(child_sse, 0.0)

    lowest = child_sse.min()
    pick = int(np.flatnonzero(child_sse <= lowest + _TIE_TOLERANCE * (1.0 + abs(lowest)))[0])
    i = positions[pick]
    lo, hi = xs[i], xs[i + 1]
    threshold = lo + (hi - lo) / 2.0
    if not lo <= threshold < hi:
        threshold = lo
    return float(child_sse[pick]), float(threshold)


def _find_split(
    X: np.ndarray,
    y: np.ndarray,
    candidates: Sequence[int],
    min_samples_leaf: int,
) -> Optional[_Split]:
    best: Optional[_Split] = None
    for feature in candidates:
        found = _best_split_on_feature(X[:, feature], y, min_samples_leaf)
        if found is None:
            continue
        child_sse, threshold = found
        if best is not None and child_sse >= best.child_sse - _TIE_TOLERANCE * (1.0 + abs(best.child_sse)):
            continue
        best = _Split(feature, threshold, child_sse, X[:, feature] <= threshold)
    return best


def _candidate_features(
    n_features: int, feature_fraction: float, rng: Optional[np.random.Generator]
) -> np.ndarray:
    if feature_fraction >= 1.0 or rng is None:
        return np.arange(n_features)
    count = max(1, math.ceil(feature_fraction * n_features))
    return np.sort(rng.choice(n_features, size=count, replace=False))


def grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    min_samples_leaf: int = 1,
    max_depth: Optional[int] = None,
    feature_fraction: float = 1.0,
    rng: Optional[np.random.Generator] = None,
) -> TreeStructure:
    """Grow a CART tree; ``max_depth=None`` means unlimited."""

    arena = _Arena()
    root = arena.add_leaf(float(y.mean()), y.shape[0])
    stack: List[Tuple[int, np.ndarray, int]] = [(root, np.arange(y.shape[0]), 0)]

    while stack:
        node, rows, depth = stack.pop()
        targets = y[rows]
        if max_depth is not None and depth >= max_depth:
            continue
        if rows.shape[0] < 2 * min_samples_leaf:
            continue
        if np.all(targets == targets[0]):
            continue

        candidates = _candidate_features(X.shape[1], feature_fraction, rng)
        split = _find_split(X[rows], targets, candidates, min_samples_leaf)
        if split is None:
            continue

        left_rows = rows[split.left_mask]
        right_rows = rows[~split.left_mask]
        left = arena.add_leaf(float(y[left_rows].mean()), left_rows.shape[0])
        right = arena.add_leaf(float(y[right_rows].mean()), right_rows.shape[0])
        arena.feature[node] = split.feature
        arena.threshold[node] = split.threshold
        arena.left[node] = left
        arena.right[node] = right
        arena.impurity_decrease[node] = max(0.0, _sse(targets) - split.child_sse)

        stack.append((right, right_rows, depth + 1))
        stack.append((left, left_rows, depth + 1))

    return arena.freeze()


def _depth_param(max_depth: Optional[float]) -> Optional[int]:
    return None if max_depth is None else int(max_depth)


class TreeModel(TrainedModel):
    supports_importance = True

    def __init__(self, spec: ModelSpec, feature_names: Sequence[str], tree: TreeStructure) -> None:
        super().__init__(spec, feature_names)
        self.tree = tree

    def _predict(self, X: np.ndarray) -> np.ndarray:
        return self.tree.predict(X)

    def feature_importance(self) -> np.ndarray:
        return normalize_importance(self.tree.raw_importance(self.n_features))

    def parameters_state(self) -> Dict[str, Any]:
        return {"tree": self.tree.to_state()}

    @classmethod
    def from_parameters(
        cls, spec: ModelSpec, feature_names: Sequence[str], parameters: Mapping[str, Any]
    ) -> "TreeModel":
        return cls(spec, feature_names, TreeStructure.from_state(parameters["tree"]))


def fit_tree(
    X: Any,
    y: Any,
    min_samples_leaf: int = 1,
    max_depth: Optional[int] = None,
    feature_names: Optional[Sequence[str]] = None,
) -> TreeModel:
    spec = ModelSpec(ModelKind.TREE, {"min_samples_leaf": min_samples_leaf, "max_depth": max_depth})
    X, y = check_training_data(X, y)
    tree = grow_tree(X, y, int(min_samples_leaf), _depth_param(max_depth))
    return TreeModel(spec, optional_names(feature_names, X.shape[1]), tree)
