"""Regression models sharing the ``TrainedModel`` fit/predict contract."""

from .base import (
    TABLE_ORDER,
    ModelFitError,
    ModelFormatError,
    ModelInputError,
    ModelKind,
    ModelSpec,
    TrainedModel,
    UnsupportedOperationError,
)
from .ensemble import fit_forest, fit_gbr, fit_mean
from .gaussian_process import fit_gp, predict_gp, rbf_kernel
from .linear import fit_linear, fit_ridge
from .registry import (
    DEFAULT_HYPERPARAMETERS,
    feature_importance,
    fit_model,
    load_model,
    make_spec,
    model_from_state,
    save_model,
)
from .svr import SvrConvergenceError, fit_svr
from .tree import fit_tree

__all__ = [
    "TABLE_ORDER",
    "DEFAULT_HYPERPARAMETERS",
    "ModelFitError",
    "ModelFormatError",
    "ModelInputError",
    "ModelKind",
    "ModelSpec",
    "SvrConvergenceError",
    "TrainedModel",
    "UnsupportedOperationError",
    "feature_importance",
    "fit_forest",
    "fit_gbr",
    "fit_gp",
    "fit_linear",
    "fit_mean",
    "fit_model",
    "fit_ridge",
    "fit_svr",
    "fit_tree",
    "load_model",
    "make_spec",
    "model_from_state",
    "predict_gp",
    "rbf_kernel",
    "save_model",
]
