from __future__ import annotations

from typing import Any, Dict, Mapping, Optional, Sequence

import numpy as np
from scipy import linalg

from .base import (
    ModelFitError,
    ModelKind,
    ModelSpec,
    TrainedModel,
    check_training_data,
    optional_names,
)


class LinearModel(TrainedModel):
    """``y = X @ coef + intercept``; shared by ordinary least squares and ridge."""

    def __init__(
        self, spec: ModelSpec, feature_names: Sequence[str], coef: np.ndarray, intercept: float
    ) -> None:
        super().__init__(spec, feature_names)
        self.coef = np.asarray(coef, dtype=np.float64)
        self.intercept = float(intercept)

    def _predict(self, X: np.ndarray) -> np.ndarray:
        return X @ self.coef + self.intercept

    def parameters_state(self) -> Dict[str, Any]:
        return {"coef": self.coef.tolist(), "intercept": self.intercept}

    @classmethod
    def from_parameters(
        cls, spec: ModelSpec, feature_names: Sequence[str], parameters: Mapping[str, Any]
    ) -> "LinearModel":
        return cls(spec, feature_names, np.array(parameters["coef"], dtype=np.float64), parameters["intercept"])


def _center(X: np.ndarray, y: np.ndarray):
    x_mean = X.mean(axis=0)
    y_mean = y.mean()
    return X - x_mean, y - y_mean, x_mean, y_mean


def _column_scales(Xc: np.ndarray) -> np.ndarray:
    scales = np.sqrt(np.einsum("ij,ij->j", Xc, Xc))
    scales[scales == 0.0] = 1.0
    return scales


def _min_norm_slopes(Xc: np.ndarray, yc: np.ndarray) -> np.ndarray:
    """Minimum-norm least squares on unit-norm columns, mapped back to feature units.

    Columns are equilibrated first so the rank-deficient solution does not depend
    on the units each feature happens to be recorded in.
    """

    scales = _column_scales(Xc)
    try:
        coef, *_ = linalg.lstsq(Xc / scales, yc, lapack_driver="gelsd")
    except linalg.LinAlgError as exc:
        raise ModelFitError(f"least-squares solve failed: {exc}") from exc
    return coef / scales


def _ridge_slopes(Xc: np.ndarray, yc: np.ndarray, alpha: float) -> np.ndarray:
    # s / (s^2 + alpha) stays finite for every singular value once alpha > 0
    try:
        U, s, Vt = linalg.svd(Xc, full_matrices=False)
    except linalg.LinAlgError as exc:
        raise ModelFitError(f"SVD of the centred design failed: {exc}") from exc
    return Vt.T @ ((s / (s * s + alpha)) * (U.T @ yc))


def fit_linear(X: Any, y: Any, feature_names: Optional[Sequence[str]] = None) -> LinearModel:
    """Ordinary least squares with an unpenalized intercept.

    Rank-deficient systems (including more features than samples) get the
    minimum-norm slope vector, measured on unit-norm centred columns.
    """

    X, y = check_training_data(X, y)
    Xc, yc, x_mean, y_mean = _center(X, y)
    coef = _min_norm_slopes(Xc, yc)
    return LinearModel(
        ModelSpec(ModelKind.LINEAR),
        optional_names(feature_names, X.shape[1]),
        coef,
        y_mean - x_mean @ coef,
    )


def fit_ridge(
    X: Any, y: Any, alpha: float = 1.0, feature_names: Optional[Sequence[str]] = None
) -> LinearModel:
    """Closed-form ridge on centred data; ``alpha == 0`` falls back to least squares."""

    spec = ModelSpec(ModelKind.RIDGE, {"alpha": alpha})
    X, y = check_training_data(X, y)
    Xc, yc, x_mean, y_mean = _center(X, y)
    coef = _min_norm_slopes(Xc, yc) if alpha == 0 else _ridge_slopes(Xc, yc, alpha)
    return LinearModel(spec, optional_names(feature_names, X.shape[1]), coef, y_mean - x_mean @ coef)
