"""
Areal surface roughness from confocal micrograph height maps.

Sa is the mean absolute deviation of the height map from its mean height. No form
removal or ISO 25178 filtering is applied beyond that mean subtraction.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np
import pandas as pd

from .constants import FLOAT_FORMAT, MICROGRAPH_META_FILE
from .errors import PolishSenseError
from .file_utils import atomic_write_text, read_json, write_json


class MicrographError(PolishSenseError):
    """Raised when a micrograph is empty, non-finite or unreadable."""


@dataclass(frozen=True)
class Micrograph:
    """Height matrix in nm; ``pixel_area`` is the area of one cell in nm²."""

    heights: np.ndarray = field(repr=False)
    pixel_area: float = 1.0

    def __post_init__(self) -> None:
        heights = np.asarray(self.heights, dtype=np.float64)
        if heights.ndim != 2 or heights.shape[0] < 1 or heights.shape[1] < 1:
            raise MicrographError(f"heights must be a non-empty 2-D matrix, got shape {heights.shape}")
        if not np.isfinite(heights).all():
            raise MicrographError("heights contain non-finite values")
        if not self.pixel_area > 0:
            raise MicrographError(f"pixel_area must be > 0, got {self.pixel_area}")
        object.__setattr__(self, "heights", heights)

    @property
    def area(self) -> float:
        return self.heights.size * self.pixel_area


@dataclass(frozen=True)
class RoughnessTarget:
    run_id: str
    sa_before: float
    sa_after: float
    delta: float

    def to_state(self) -> Dict[str, Any]:
        return {
            "run_id": self.run_id,
            "sa_before": self.sa_before,
            "sa_after": self.sa_after,
            "delta": self.delta,
        }


def areal_roughness(micrograph: Micrograph) -> float:
    """Return Sa = (1/A) Σ |Z - mean(Z)| · pixel_area, in nm.

    With a constant pixel area the weighting cancels against A, leaving the
    mean absolute deviation of the heights.
    """

    heights = micrograph.heights
    if heights.max() == heights.min():
        return 0.0
    deviation = np.abs(heights - heights.mean())
    return float(deviation.mean())


def roughness_delta(before: Micrograph, after: Micrograph, run_id: str) -> RoughnessTarget:
    sa_before = areal_roughness(before)
    sa_after = areal_roughness(after)
    return RoughnessTarget(
        run_id=run_id,
        sa_before=sa_before,
        sa_after=sa_after,
        delta=abs(sa_after - sa_before),
    )


def load_micrograph(csv_path: Path, meta_path: Optional[Path] = None) -> Micrograph:
    """Read a headerless row-major CSV of heights plus the optional sidecar."""

    csv_path = Path(csv_path)
    if not csv_path.is_file():
        raise MicrographError(f"missing file: {csv_path}")
    try:
        frame = pd.read_csv(csv_path, header=None, float_precision="round_trip")
    except (OSError, ValueError, pd.errors.ParserError) as exc:
        raise MicrographError(f"Unable to parse micrograph {csv_path}: {exc}") from exc

    pixel_area = 1.0
    meta_path = Path(meta_path) if meta_path is not None else csv_path.with_name(MICROGRAPH_META_FILE)
    if meta_path.is_file():
        try:
            pixel_area = float(read_json(meta_path).get("pixel_area", 1.0))
        except (PolishSenseError, AttributeError, TypeError, ValueError) as exc:
            raise MicrographError(f"Invalid micrograph sidecar {meta_path}: {exc}") from exc
    return Micrograph(heights=frame.to_numpy(dtype=np.float64), pixel_area=pixel_area)


def save_micrograph(micrograph: Micrograph, csv_path: Path, write_meta: bool = True) -> None:
    buffer = io.StringIO()
    pd.DataFrame(micrograph.heights).to_csv(buffer, header=False, index=False, float_format=FLOAT_FORMAT)
    atomic_write_text(Path(csv_path), buffer.getvalue())
    if write_meta:
        write_json(Path(csv_path).with_name(MICROGRAPH_META_FILE), {"pixel_area": micrograph.pixel_area})
