"""
Vibration run loading, validation and protocol truncation.

A run lives in a directory holding ``manifest.json`` and ``samples.f64le``
(raw little-endian float64, no header). Short runs lose their first and last
minute of start-up / ramp-down transients; long runs keep only their final four
minutes so both experiment classes contribute equally long windows.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional

import jsonschema
import numpy as np

from .constants import (
    RETAINED_SECONDS,
    RUN_MANIFEST_FILE,
    RUN_SAMPLES_FILE,
    TRANSIENT_SECONDS,
)
from .errors import PolishSenseError
from .file_utils import atomic_write_bytes, read_json, write_json

_SAMPLE_DTYPE = np.dtype("<f8")
_FINITE_SCAN_CHUNK = 1 << 22

MANIFEST_SCHEMA: Dict[str, Any] = {
    "type": "object",
    "required": [
        "run_id",
        "experiment_class",
        "stage_index",
        "sample_rate_hz",
        "sample_count",
    ],
    "properties": {
        "run_id": {"type": "string", "minLength": 1},
        "experiment_class": {"enum": ["short6min", "long12hr"]},
        "stage_index": {"type": "integer", "minimum": 1},
        "sample_rate_hz": {"type": "number", "exclusiveMinimum": 0},
        "sample_count": {"type": "integer", "minimum": 0},
        "pre_truncated": {"type": "boolean"},
    },
}


class RunFormatError(PolishSenseError):
    """Raised when a run directory is missing files or violates its manifest."""


class TruncationError(PolishSenseError):
    """Raised when a run is shorter than its protocol's mandated cut."""


class ExperimentClass(str, Enum):
    SHORT_6MIN = "short6min"
    LONG_12HR = "long12hr"


@dataclass(frozen=True)
class RunManifest:
    run_id: str
    experiment_class: ExperimentClass
    stage_index: int
    sample_rate_hz: float
    sample_count: int
    pre_truncated: bool = False

    def __post_init__(self) -> None:
        if not self.sample_rate_hz > 0:
            raise RunFormatError(f"{self.run_id}: sample_rate_hz must be > 0, got {self.sample_rate_hz}")
        if self.stage_index < 1:
            raise RunFormatError(f"{self.run_id}: stage_index must be >= 1, got {self.stage_index}")
        if self.sample_count < 0:
            raise RunFormatError(f"{self.run_id}: sample_count must be >= 0, got {self.sample_count}")

    @classmethod
    def from_state(cls, state: Dict[str, Any]) -> "RunManifest":
        try:
            jsonschema.validate(state, MANIFEST_SCHEMA)
        except jsonschema.ValidationError as exc:
            raise RunFormatError(f"Invalid run manifest: {exc.message}") from exc
        return cls(
            run_id=state["run_id"],
            experiment_class=ExperimentClass(state["experiment_class"]),
            stage_index=int(state["stage_index"]),
            sample_rate_hz=float(state["sample_rate_hz"]),
            sample_count=int(state["sample_count"]),
            pre_truncated=bool(state.get("pre_truncated", False)),
        )

    def to_state(self) -> Dict[str, Any]:
        return {
            "run_id": self.run_id,
            "experiment_class": self.experiment_class.value,
            "stage_index": self.stage_index,
            "sample_rate_hz": self.sample_rate_hz,
            "sample_count": self.sample_count,
            "pre_truncated": self.pre_truncated,
        }


@dataclass(frozen=True)
class VibrationRun:
    manifest: RunManifest
    samples: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise RunFormatError(f"{self.manifest.run_id}: samples must be one-dimensional")
        if samples.shape[0] != self.manifest.sample_count:
            raise RunFormatError(
                f"{self.manifest.run_id}: length mismatch, manifest declares "
                f"{self.manifest.sample_count} samples but {samples.shape[0]} were provided"
            )
        bad_index = first_non_finite_index(samples)
        if bad_index is not None:
            raise RunFormatError(f"{self.manifest.run_id}: non-finite sample at index {bad_index}")
        if samples.flags.writeable and samples is not self.samples:
            samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)

    @property
    def duration_seconds(self) -> float:
        return self.manifest.sample_count / self.manifest.sample_rate_hz


def first_non_finite_index(samples: np.ndarray) -> Optional[int]:
    for start in range(0, samples.shape[0], _FINITE_SCAN_CHUNK):
        chunk = samples[start : start + _FINITE_SCAN_CHUNK]
        finite = np.isfinite(chunk)
        if not finite.all():
            return start + int(np.flatnonzero(~finite)[0])
    return None


def load_run(path: Path) -> VibrationRun:
    """Load and validate the run stored in directory ``path``.

    Samples are memory-mapped read-only, so a full twelve-hour recording is not
    pulled into memory before truncation.
    """

    run_dir = Path(path)
    manifest_path = run_dir / RUN_MANIFEST_FILE
    samples_path = run_dir / RUN_SAMPLES_FILE
    for required in (manifest_path, samples_path):
        if not required.is_file():
            raise RunFormatError(f"missing file: {required}")

    try:
        state = read_json(manifest_path)
    except PolishSenseError as exc:
        raise RunFormatError(str(exc)) from exc
    manifest = RunManifest.from_state(state)

    size = samples_path.stat().st_size
    if size % _SAMPLE_DTYPE.itemsize:
        raise RunFormatError(f"{samples_path}: size {size} is not a whole number of float64 samples")
    count = size // _SAMPLE_DTYPE.itemsize
    if count != manifest.sample_count:
        raise RunFormatError(
            f"{manifest.run_id}: length mismatch, manifest declares {manifest.sample_count} "
            f"samples but {samples_path.name} holds {count}"
        )

    if count == 0:
        samples = np.empty(0, dtype=np.float64)
    else:
        samples = np.memmap(samples_path, dtype=_SAMPLE_DTYPE, mode="r", shape=(count,))
    return VibrationRun(manifest=manifest, samples=samples)


def save_run(run: VibrationRun, path: Path) -> Path:
    run_dir = Path(path)
    atomic_write_bytes(run_dir / RUN_SAMPLES_FILE, np.asarray(run.samples, dtype=_SAMPLE_DTYPE).tobytes())
    write_json(run_dir / RUN_MANIFEST_FILE, run.manifest.to_state())
    return run_dir


def _seconds_to_samples(seconds: float, sample_rate_hz: float) -> int:
    return int(round(seconds * sample_rate_hz))


def truncate_run(run: VibrationRun) -> VibrationRun:
    """Apply the experiment-class truncation rule, in samples.

    Short runs keep ``[60*fs, N - 60*fs)``; long runs keep their last ``240*fs``
    samples. Short runs already flagged ``pre_truncated`` are returned as-is.
    """

    manifest = run.manifest
    fs = manifest.sample_rate_hz
    total = manifest.sample_count

    if manifest.experiment_class is ExperimentClass.SHORT_6MIN:
        if manifest.pre_truncated:
            return run
        cut = _seconds_to_samples(TRANSIENT_SECONDS, fs)
        if total <= 2 * cut:
            raise TruncationError(
                f"{manifest.run_id}: run too short, {total} samples cannot lose two "
                f"{TRANSIENT_SECONDS:g} s transients ({cut} samples each)"
            )
        retained = np.array(run.samples[cut : total - cut], dtype=np.float64)
    else:
        keep = _seconds_to_samples(RETAINED_SECONDS, fs)
        if total < keep:
            raise TruncationError(
                f"{manifest.run_id}: run too short, {total} samples but the last "
                f"{RETAINED_SECONDS:g} s ({keep} samples) are required"
            )
        retained = np.array(run.samples[total - keep :], dtype=np.float64)

    truncated = replace(manifest, sample_count=int(retained.shape[0]), pre_truncated=True)
    return VibrationRun(manifest=truncated, samples=retained)
