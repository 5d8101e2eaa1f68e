"""
Noise-free Gaussian-process regression with a squared-exponential kernel.

The prior mean is zero. ``jitter`` is added to the Gram diagonal purely for
numerical conditioning; there is no observation-noise model and no
hyperparameter optimisation.
"""

from __future__ import annotations

from typing import Any, Dict, Mapping, Optional, Sequence

import numpy as np
from scipy import linalg
from scipy.spatial.distance import cdist

from .base import ModelFitError, ModelKind, ModelSpec, TrainedModel, check_training_data, optional_names


def rbf_kernel(A: np.ndarray, B: np.ndarray, length_scale: float) -> np.ndarray:
    """``exp(-||a - b||² / (2 length_scale²))`` for every row pair."""

    squared = cdist(np.atleast_2d(A), np.atleast_2d(B), metric="sqeuclidean")
    return np.exp(-squared / (2.0 * length_scale * length_scale))


class GaussianProcessModel(TrainedModel):
    def __init__(
        self,
        spec: ModelSpec,
        feature_names: Sequence[str],
        X_train: np.ndarray,
        weights: np.ndarray,
        cholesky: np.ndarray,
    ) -> None:
        super().__init__(spec, feature_names)
        self.X_train = np.asarray(X_train, dtype=np.float64)
        self.weights = np.asarray(weights, dtype=np.float64)
        self.cholesky = np.asarray(cholesky, dtype=np.float64)

    @property
    def length_scale(self) -> float:
        return float(self.spec.param("length_scale"))

    def _predict(self, X: np.ndarray) -> np.ndarray:
        return rbf_kernel(X, self.X_train, self.length_scale) @ self.weights

    def predict_variance(self, X: Any) -> np.ndarray:
        """Posterior variance ``k(x, x) - k*ᵀ K⁻¹ k*``, clipped at zero."""

        X = self._check_input(X)
        cross = rbf_kernel(self.X_train, X, self.length_scale)
        solved = linalg.solve_triangular(self.cholesky, cross, lower=True)
        return np.clip(1.0 - np.sum(solved * solved, axis=0), 0.0, None)

    def parameters_state(self) -> Dict[str, Any]:
        return {
            "X_train": self.X_train.tolist(),
            "weights": self.weights.tolist(),
            "cholesky": self.cholesky.tolist(),
        }

    @classmethod
    def from_parameters(
        cls, spec: ModelSpec, feature_names: Sequence[str], parameters: Mapping[str, Any]
    ) -> "GaussianProcessModel":
        return cls(
            spec,
            feature_names,
            np.array(parameters["X_train"], dtype=np.float64),
            np.array(parameters["weights"], dtype=np.float64),
            np.array(parameters["cholesky"], dtype=np.float64),
        )


def fit_gp(
    X: Any,
    y: Any,
    length_scale: float = 1.0,
    jitter: float = 1e-10,
    feature_names: Optional[Sequence[str]] = None,
) -> GaussianProcessModel:
    spec = ModelSpec(ModelKind.GP, {"length_scale": length_scale, "jitter": jitter})
    X, y = check_training_data(X, y)
    gram = rbf_kernel(X, X, length_scale)
    gram[np.diag_indices_from(gram)] += jitter
    try:
        factor, lower = linalg.cho_factor(gram, lower=True, check_finite=False)
    except linalg.LinAlgError as exc:
        raise ModelFitError(
            f"Gram matrix is not positive definite with jitter={jitter:g}; increase jitter"
        ) from exc
    weights = linalg.cho_solve((factor, lower), y, check_finite=False)
    return GaussianProcessModel(
        spec,
        optional_names(feature_names, X.shape[1]),
        X,
        weights,
        np.tril(factor),
    )


def predict_gp(model: GaussianProcessModel, x_star: Any) -> np.ndarray:
    return model.predict(x_star)
