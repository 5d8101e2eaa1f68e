"""
Statistical quantifiers over band-energy series.

Two feature modes are supported:

* ``separate``: mean, variance, skewness and kurtosis of every band's energy
  series, band-major (``band01_mean, band01_variance, ..., band13_kurtosis``);
* ``together``: the same four quantifiers over the pooled multiset of all band
  energies of the run (``pooled_mean, ..., pooled_kurtosis``).

Moments are population (1/n) moments and kurtosis is non-excess. For constant
data the skewness and kurtosis ratios are 0/0; both are reported as 0.
"""

from __future__ import annotations

import io
import re
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .constants import FLOAT_FORMAT
from .errors import ConfigError, PolishSenseError
from .file_utils import atomic_write_text

STATISTICS: Tuple[str, ...] = ("mean", "variance", "skewness", "kurtosis")
POOLED_PREFIX = "pooled"

_BAND_COLUMN = re.compile(r"^band(\d{2,})_(mean|variance|skewness|kurtosis)$")


class FeatureTableError(PolishSenseError):
    """Raised when a feature table is unreadable or its columns are inconsistent."""


class FeatureMode(str, Enum):
    TOGETHER = "together"
    SEPARATE = "separate"

    @classmethod
    def parse(cls, value: str) -> "FeatureMode":
        try:
            return cls(value.strip().lower())
        except ValueError as exc:
            valid = ", ".join(mode.value for mode in cls)
            raise ConfigError(f"unknown feature mode {value!r}; expected one of: {valid}") from exc


@dataclass(frozen=True)
class FeatureVector:
    run_id: str
    mode: FeatureMode
    values: np.ndarray = field(repr=False)
    names: Tuple[str, ...]
    target: float

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        names = tuple(self.names)
        if values.ndim != 1 or values.shape[0] != len(names):
            raise FeatureTableError(
                f"{self.run_id}: {values.shape} values do not match {len(names)} feature names"
            )
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "names", names)


def moments(x: Sequence[float]) -> Tuple[float, float, float, float]:
    """Return population ``(mean, variance, skewness, kurtosis)`` of ``x``."""

    values = np.asarray(x, dtype=np.float64).ravel()
    if values.size == 0:
        raise ValueError("moments require at least one value")
    if values.max() == values.min():
        return float(values[0]), 0.0, 0.0, 0.0

    mean = values.mean()
    centered = values - mean
    squared = centered * centered
    m2 = squared.mean()
    if m2 == 0.0:
        return float(mean), 0.0, 0.0, 0.0
    m3 = (squared * centered).mean()
    m4 = (squared * squared).mean()
    return float(mean), float(m2), float(m3 / m2**1.5), float(m4 / (m2 * m2))


def band_feature_names(band_indices: Sequence[int]) -> List[str]:
    return [f"band{index:02d}_{stat}" for index in band_indices for stat in STATISTICS]


def together_feature_names() -> List[str]:
    return [f"{POOLED_PREFIX}_{stat}" for stat in STATISTICS]


def feature_names(mode: FeatureMode, band_indices: Sequence[int]) -> List[str]:
    if mode is FeatureMode.TOGETHER:
        return together_feature_names()
    return band_feature_names(band_indices)


def _as_energy_matrix(energies: np.ndarray) -> np.ndarray:
    matrix = np.asarray(energies, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] < 1 or matrix.shape[1] < 1:
        raise ValueError(f"band energies must be a non-empty T×bands matrix, got shape {matrix.shape}")
    return matrix


def extract_separate(
    energies: np.ndarray,
    run_id: str,
    target: float,
    band_indices: Optional[Sequence[int]] = None,
) -> FeatureVector:
    matrix = _as_energy_matrix(energies)
    if band_indices is None:
        band_indices = range(1, matrix.shape[1] + 1)
    band_indices = list(band_indices)
    if len(band_indices) != matrix.shape[1]:
        raise ValueError(f"{len(band_indices)} band indices for {matrix.shape[1]} energy columns")

    values: List[float] = []
    for column in range(matrix.shape[1]):
        values.extend(moments(matrix[:, column]))
    return FeatureVector(
        run_id=run_id,
        mode=FeatureMode.SEPARATE,
        values=np.array(values),
        names=tuple(band_feature_names(band_indices)),
        target=float(target),
    )


def extract_together(energies: np.ndarray, run_id: str, target: float) -> FeatureVector:
    matrix = _as_energy_matrix(energies)
    return FeatureVector(
        run_id=run_id,
        mode=FeatureMode.TOGETHER,
        values=np.array(moments(matrix)),
        names=tuple(together_feature_names()),
        target=float(target),
    )


def extract_features(
    energies: np.ndarray,
    mode: FeatureMode,
    run_id: str,
    target: float,
    band_indices: Optional[Sequence[int]] = None,
) -> FeatureVector:
    if mode is FeatureMode.TOGETHER:
        return extract_together(energies, run_id, target)
    return extract_separate(energies, run_id, target, band_indices)


@dataclass
class Standardizer:
    """Column z-scoring fitted on training rows only.

    Columns with zero spread are centred but not scaled.
    """

    mean_: Optional[np.ndarray] = None
    scale_: Optional[np.ndarray] = None

    def fit(self, X: np.ndarray) -> "Standardizer":
        X = np.asarray(X, dtype=np.float64)
        self.mean_ = X.mean(axis=0)
        std = X.std(axis=0)
        self.scale_ = np.where(std > 0.0, std, 1.0)
        return self

    def transform(self, X: np.ndarray) -> np.ndarray:
        if self.mean_ is None or self.scale_ is None:
            raise RuntimeError("Standardizer.transform called before fit")
        return (np.asarray(X, dtype=np.float64) - self.mean_) / self.scale_

    def fit_transform(self, X: np.ndarray) -> np.ndarray:
        return self.fit(X).transform(X)


def infer_mode(names: Sequence[str]) -> FeatureMode:
    names = list(names)
    if names == together_feature_names():
        return FeatureMode.TOGETHER

    bands: List[int] = []
    for name in names:
        match = _BAND_COLUMN.match(name)
        if match is None:
            raise FeatureTableError(f"unrecognized feature column {name!r}")
        index = int(match.group(1))
        if index not in bands:
            bands.append(index)
    if not bands or names != band_feature_names(bands):
        raise FeatureTableError("feature columns are not in band-major (mean, variance, skewness, kurtosis) order")
    return FeatureMode.SEPARATE


def feature_table_frame(vectors: Sequence[FeatureVector]) -> pd.DataFrame:
    if not vectors:
        raise FeatureTableError("no feature vectors to tabulate")
    names = vectors[0].names
    mode = vectors[0].mode
    for vector in vectors[1:]:
        if vector.mode is not mode or vector.names != names:
            raise FeatureTableError(f"{vector.run_id}: feature layout differs from {vectors[0].run_id}")

    frame = pd.DataFrame(np.vstack([vector.values for vector in vectors]), columns=list(names))
    frame.insert(0, "target", [vector.target for vector in vectors])
    frame.insert(0, "run_id", [vector.run_id for vector in vectors])
    return frame


def write_feature_table(vectors: Sequence[FeatureVector], path: Path) -> Path:
    buffer = io.StringIO()
    feature_table_frame(vectors).to_csv(buffer, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    atomic_write_text(Path(path), buffer.getvalue())
    return Path(path)


def read_feature_table(path: Path) -> Tuple[List[FeatureVector], FeatureMode]:
    path = Path(path)
    if not path.is_file():
        raise FeatureTableError(f"missing feature table: {path}")
    try:
        frame = pd.read_csv(path, dtype={"run_id": str}, float_precision="round_trip")
    except (OSError, ValueError, pd.errors.ParserError) as exc:
        raise FeatureTableError(f"Unable to parse feature table {path}: {exc}") from exc

    columns = list(frame.columns)
    if columns[:2] != ["run_id", "target"] or len(columns) < 3:
        raise FeatureTableError(f"{path}: header must start with run_id,target followed by features")
    names = tuple(columns[2:])
    mode = infer_mode(names)

    matrix = frame[list(names)].to_numpy(dtype=np.float64)
    vectors = [
        FeatureVector(
            run_id=str(run_id),
            mode=mode,
            values=matrix[row],
            names=names,
            target=float(target),
        )
        for row, (run_id, target) in enumerate(zip(frame["run_id"], frame["target"]))
    ]
    return vectors, mode
