"""
Leave-one-out cross-validation over runs, MAE scoring and the results table.

Each run is the test fold exactly once; the model is refitted on the remaining
runs with the same spec (and seed) in every fold. Folds may run on a thread
pool but results are gathered in run order.
"""

from __future__ import annotations

import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Set, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from .constants import FLOAT_FORMAT
from .errors import PolishSenseError
from .features import FeatureMode, FeatureVector, Standardizer
from .logging_utils import get_logger
from .models import TABLE_ORDER, ModelKind, ModelSpec, fit_model

log = get_logger("evaluation")

_MODE_LABELS = {FeatureMode.TOGETHER: "Together", FeatureMode.SEPARATE: "Separate"}


class EvaluationError(PolishSenseError):
    """Raised for inconsistent feature sets or malformed report collections."""


def mae(y_true: Sequence[float], y_pred: Sequence[float]) -> float:
    y_true = np.asarray(y_true, dtype=np.float64).ravel()
    y_pred = np.asarray(y_pred, dtype=np.float64).ravel()
    if y_true.shape != y_pred.shape:
        raise EvaluationError(f"length mismatch: {y_true.shape[0]} targets vs {y_pred.shape[0]} predictions")
    if y_true.size == 0:
        raise EvaluationError("mae needs at least one prediction")
    return float(np.mean(np.abs(y_true - y_pred)))


@dataclass(frozen=True)
class FoldPrediction:
    run_id: str
    y_true: float
    y_pred: float

    @property
    def abs_error(self) -> float:
        return abs(self.y_true - self.y_pred)


@dataclass
class EvalReport:
    model_kind: ModelKind
    feature_mode: FeatureMode
    fold_predictions: List[FoldPrediction]
    mae: float
    per_fold_abs_error: List[float]
    feature_names: Tuple[str, ...] = ()
    importance_summary: Optional[np.ndarray] = None
    standardized: bool = False
    spec: Optional[ModelSpec] = None

    def top_features(self, count: int = 3) -> List[Tuple[str, float]]:
        if self.importance_summary is None:
            return []
        order = np.argsort(-self.importance_summary, kind="stable")[:count]
        return [(self.feature_names[i], float(self.importance_summary[i])) for i in order]

    def to_state(self) -> Dict[str, Any]:
        return {
            "model_kind": self.model_kind.value,
            "feature_mode": self.feature_mode.value,
            "mae": self.mae,
            "standardized": self.standardized,
            "spec": self.spec.to_state() if self.spec is not None else None,
            "fold_predictions": [
                {"run_id": fold.run_id, "y_true": fold.y_true, "y_pred": fold.y_pred}
                for fold in self.fold_predictions
            ],
            "per_fold_abs_error": list(self.per_fold_abs_error),
            "feature_names": list(self.feature_names),
            "importance_summary": (
                self.importance_summary.tolist() if self.importance_summary is not None else None
            ),
        }

    @classmethod
    def from_state(cls, state: Mapping[str, Any]) -> "EvalReport":
        importance = state.get("importance_summary")
        spec_state = state.get("spec")
        return cls(
            model_kind=ModelKind(state["model_kind"]),
            feature_mode=FeatureMode(state["feature_mode"]),
            fold_predictions=[
                FoldPrediction(item["run_id"], float(item["y_true"]), float(item["y_pred"]))
                for item in state["fold_predictions"]
            ],
            mae=float(state["mae"]),
            per_fold_abs_error=[float(value) for value in state["per_fold_abs_error"]],
            feature_names=tuple(state.get("feature_names", ())),
            importance_summary=np.array(importance, dtype=np.float64) if importance is not None else None,
            standardized=bool(state.get("standardized", False)),
            spec=ModelSpec.from_state(spec_state) if spec_state else None,
        )


def feature_matrix(
    vectors: Sequence[FeatureVector],
) -> Tuple[np.ndarray, np.ndarray, List[str], Tuple[str, ...], FeatureMode]:
    """Stack feature vectors into ``(X, y, run_ids, names, mode)``."""

    if not vectors:
        raise EvaluationError("no feature vectors")
    mode = vectors[0].mode
    names = vectors[0].names
    seen: Set[str] = set()
    for vector in vectors:
        if vector.mode is not mode:
            raise EvaluationError(
                f"mixed feature modes: {vector.run_id} is {vector.mode.value}, expected {mode.value}"
            )
        if vector.names != names:
            raise EvaluationError(f"{vector.run_id}: feature names differ from {vectors[0].run_id}")
        if vector.run_id in seen:
            raise EvaluationError(f"duplicate run_id {vector.run_id}")
        seen.add(vector.run_id)

    X = np.vstack([vector.values for vector in vectors])
    y = np.array([vector.target for vector in vectors], dtype=np.float64)
    return X, y, [vector.run_id for vector in vectors], names, mode


def loocv(
    vectors: Sequence[FeatureVector],
    spec: ModelSpec,
    standardize: bool = False,
    threads: int = 1,
    progress: bool = False,
) -> EvalReport:
    X, y, run_ids, names, mode = feature_matrix(vectors)
    n = X.shape[0]
    if n < 2:
        raise EvaluationError(f"leave-one-out needs at least 2 runs, got {n}")

    def run_fold(held_out: int) -> Tuple[float, Optional[np.ndarray]]:
        train = np.arange(n) != held_out
        X_train, X_test = X[train], X[held_out : held_out + 1]
        if standardize:
            scaler = Standardizer().fit(X_train)
            X_train, X_test = scaler.transform(X_train), scaler.transform(X_test)
        model = fit_model(spec, X_train, y[train], names)
        importance = model.feature_importance() if spec.kind.has_importance else None
        return float(model.predict(X_test)[0]), importance

    label = f"{spec.kind.value}/{mode.value}"
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(
                tqdm(pool.map(run_fold, range(n)), total=n, desc=label, disable=not progress, leave=False)
            )
    else:
        outcomes = [run_fold(i) for i in tqdm(range(n), desc=label, disable=not progress, leave=False)]

    predictions = np.array([prediction for prediction, _ in outcomes])
    errors = np.abs(y - predictions)
    importance_summary: Optional[np.ndarray] = None
    if spec.kind.has_importance:
        total = np.zeros(len(names), dtype=np.float64)
        for _, importance in outcomes:
            total = total + importance
        importance_summary = total / n

    report = EvalReport(
        model_kind=spec.kind,
        feature_mode=mode,
        fold_predictions=[
            FoldPrediction(run_id, float(target), float(prediction))
            for run_id, target, prediction in zip(run_ids, y, predictions)
        ],
        mae=mae(y, predictions),
        per_fold_abs_error=errors.tolist(),
        feature_names=names,
        importance_summary=importance_summary,
        standardized=standardize,
        spec=spec,
    )
    log.debug("LOOCV %s: MAE %.6g over %d folds", label, report.mae, n)
    return report


@dataclass
class ResultsTable:
    """MAE keyed by (model kind, feature mode); every minimal cell is flagged best."""

    cells: Dict[Tuple[ModelKind, FeatureMode], float]
    best: Set[Tuple[ModelKind, FeatureMode]] = field(default_factory=set)

    def kinds(self) -> List[ModelKind]:
        present = {kind for kind, _ in self.cells}
        ordered = [kind for kind in TABLE_ORDER if kind in present]
        return ordered + [kind for kind in ModelKind if kind in present and kind not in ordered]

    def modes(self) -> List[FeatureMode]:
        present = {mode for _, mode in self.cells}
        return [mode for mode in (FeatureMode.TOGETHER, FeatureMode.SEPARATE) if mode in present]

    def is_best(self, kind: ModelKind, mode: FeatureMode) -> bool:
        return (kind, mode) in self.best

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for kind in self.kinds():
            row: Dict[str, Any] = {"model": kind.value}
            for mode in self.modes():
                row[_MODE_LABELS[mode]] = self.cells.get((kind, mode), np.nan)
            row["best"] = ";".join(_MODE_LABELS[mode] for mode in self.modes() if self.is_best(kind, mode))
            rows.append(row)
        return pd.DataFrame(rows, columns=["model"] + [_MODE_LABELS[m] for m in self.modes()] + ["best"])

    def to_csv(self) -> str:
        buffer = io.StringIO()
        self.to_frame().to_csv(buffer, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        return buffer.getvalue()

    def to_text(self) -> str:
        modes = self.modes()
        header = ["Model"] + [_MODE_LABELS[mode] for mode in modes]
        body: List[List[str]] = []
        for kind in self.kinds():
            row = [kind.label]
            for mode in modes:
                value = self.cells.get((kind, mode))
                if value is None:
                    row.append("-")
                else:
                    row.append(f"{value:.4f}" + ("*" if self.is_best(kind, mode) else " "))
            body.append(row)

        widths = [max(len(line[col]) for line in [header] + body) for col in range(len(header))]
        lines = []
        for line in [header] + body:
            cells = [line[0].ljust(widths[0])] + [cell.rjust(widths[i]) for i, cell in enumerate(line[1:], 1)]
            lines.append("  ".join(cells).rstrip())
        lines.insert(1, "  ".join("-" * width for width in widths))
        lines.append("")
        lines.append("* lowest MAE (nm)")
        return "\n".join(lines) + "\n"


def results_table(reports: Sequence[EvalReport]) -> ResultsTable:
    if not reports:
        raise EvaluationError("results table needs at least one report")
    cells: Dict[Tuple[ModelKind, FeatureMode], float] = {}
    for report in reports:
        key = (report.model_kind, report.feature_mode)
        if key in cells:
            raise EvaluationError(f"duplicate report for {key[0].value}/{key[1].value}")
        cells[key] = report.mae
    lowest = min(cells.values())
    return ResultsTable(cells=cells, best={key for key, value in cells.items() if value == lowest})
