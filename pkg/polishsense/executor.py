from __future__ import annotations

import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import jsonschema
import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator
from tqdm import tqdm

from .constants import (
    DATASET_MANIFEST_FILE,
    ENERGIES_DIR_NAME,
    FLOAT_FORMAT,
    LOG_FILE_NAME,
    MICROGRAPH_AFTER_FILE,
    MICROGRAPH_BEFORE_FILE,
    MODELS_DIR_NAME,
    REPORTS_DIR_NAME,
    RESULTS_CSV_FILE,
    RESULTS_TEXT_FILE,
    feature_table_name,
)
from .errors import ConfigError, PolishSenseError
from .evaluation import EvalReport, ResultsTable, feature_matrix, loocv, results_table
from .features import (
    FeatureMode,
    FeatureVector,
    extract_features,
    infer_mode,
    read_feature_table,
    write_feature_table,
)
from .file_utils import atomic_write_text, read_json, write_json
from .logging_utils import attach_log_file, detach_log_file, get_logger, log_section
from .models import ModelFitError, ModelKind, TrainedModel, fit_model, make_spec, save_model
from .runs import load_run, truncate_run
from .spectral import BandSet, StftConfig, band_energy_series, default_band_set, load_band_set, stft
from .surface import RoughnessTarget, load_micrograph, roughness_delta

log = get_logger("executor")

DATASET_SCHEMA: Dict[str, Any] = {
    "type": "object",
    "required": ["runs"],
    "properties": {
        "runs": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["run_id", "path"],
                "properties": {
                    "run_id": {"type": "string", "minLength": 1},
                    "path": {"type": "string", "minLength": 1},
                },
            },
        }
    },
}


class DatasetError(PolishSenseError):
    """Raised when the dataset manifest is missing or malformed."""


class PipelineConfig(BaseModel):
    """Settings shared by the extract / evaluate / predict stages."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    dataset_dir: Optional[Path] = None
    out_dir: Path = Path(".")
    bands_path: Optional[Path] = None
    window_seconds: float = Field(1.0, gt=0)
    overlap_fraction: float = Field(0.0, ge=0, lt=1)
    fft_points: int = Field(16384, ge=2)
    modes: List[FeatureMode] = Field(default_factory=lambda: [FeatureMode.TOGETHER, FeatureMode.SEPARATE])
    standardize: bool = False
    threads: int = Field(1, ge=1)
    progress: bool = True
    save_energies: bool = False

    @field_validator("bands_path", "dataset_dir")
    @classmethod
    def _must_exist(cls, value: Optional[Path]) -> Optional[Path]:
        if value is not None and not Path(value).exists():
            raise ValueError(f"{value} does not exist")
        return value

    def stft_config(self) -> StftConfig:
        return StftConfig(
            window_seconds=self.window_seconds,
            overlap_fraction=self.overlap_fraction,
            fft_points=self.fft_points,
        )

    def band_set(self) -> BandSet:
        return load_band_set(self.bands_path) if self.bands_path is not None else default_band_set()


@dataclass(frozen=True)
class RunFailure:
    run_id: str
    message: str


@dataclass
class ExtractionResult:
    vectors: Dict[FeatureMode, List[FeatureVector]] = field(default_factory=dict)
    failures: List[RunFailure] = field(default_factory=list)
    tables: Dict[FeatureMode, Path] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.failures


def read_dataset_manifest(dataset_dir: Path) -> Dict[str, Any]:
    path = Path(dataset_dir) / DATASET_MANIFEST_FILE
    try:
        manifest = read_json(path)
        jsonschema.validate(manifest, DATASET_SCHEMA)
    except FileNotFoundError as exc:
        raise DatasetError(f"dataset manifest not found: {path}") from exc
    except jsonschema.ValidationError as exc:
        raise DatasetError(f"Invalid dataset manifest {path}: {exc.message}") from exc
    except PolishSenseError as exc:
        raise DatasetError(str(exc)) from exc
    return manifest


def run_energies(run_dir: Path, stft_cfg: StftConfig, band_set: BandSet) -> Tuple[str, np.ndarray]:
    """Load, truncate and transform one run; returns ``(run_id, T×bands energies)``."""

    run = truncate_run(load_run(run_dir))
    spectrogram = stft(run, stft_cfg)
    band_set.validate_against(spectrogram.nyquist_hz)
    return run.manifest.run_id, band_energy_series(spectrogram, band_set)


def run_target(run_dir: Path, run_id: str) -> RoughnessTarget:
    run_dir = Path(run_dir)
    before = load_micrograph(run_dir / MICROGRAPH_BEFORE_FILE)
    after = load_micrograph(run_dir / MICROGRAPH_AFTER_FILE)
    return roughness_delta(before, after, run_id)


def _energy_csv(energies: np.ndarray, band_set: BandSet) -> str:
    buffer = io.StringIO()
    frame = pd.DataFrame(energies, columns=[f"band{index:02d}" for index in band_set.indices])
    frame.to_csv(buffer, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return buffer.getvalue()


def extract_dataset(config: PipelineConfig) -> ExtractionResult:
    """Run load → truncate → STFT → band energies → features for every listed run.

    Feature tables are written only when every run succeeds.
    """

    if config.dataset_dir is None:
        raise ConfigError("extract needs a dataset directory")
    manifest = read_dataset_manifest(config.dataset_dir)
    stft_cfg = config.stft_config()
    band_set = config.band_set()
    out_dir = Path(config.out_dir)
    entries = manifest["runs"]

    handler = attach_log_file(log, out_dir / LOG_FILE_NAME)
    try:
        log_section(
            log,
            f"Extracting {len(entries)} runs from {config.dataset_dir}",
            f"window {stft_cfg.window_seconds:g} s, overlap {stft_cfg.overlap_fraction:g}, "
            f"fft_points {stft_cfg.fft_points}, {len(band_set)} bands, "
            f"modes {', '.join(mode.value for mode in config.modes)}",
        )

        def process(entry: Mapping[str, Any]):
            run_id = entry["run_id"]
            run_dir = Path(config.dataset_dir) / entry["path"]
            try:
                loaded_id, energies = run_energies(run_dir, stft_cfg, band_set)
                if loaded_id != run_id:
                    raise DatasetError(f"run directory holds {loaded_id!r}, manifest lists {run_id!r}")
                target = run_target(run_dir, run_id)
            except PolishSenseError as exc:
                return run_id, None, None, str(exc)
            vectors = {
                mode: extract_features(energies, mode, run_id, target.delta, band_set.indices)
                for mode in config.modes
            }
            return run_id, vectors, energies, None

        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            outcomes = list(
                tqdm(pool.map(process, entries), total=len(entries), desc="extract", disable=not config.progress)
            )

        result = ExtractionResult(vectors={mode: [] for mode in config.modes})
        for run_id, vectors, energies, error in outcomes:
            if error is not None:
                log_section(log, f"Run {run_id} failed", error)
                result.failures.append(RunFailure(run_id, error))
                continue
            log.debug("Run %s: %d frames", run_id, energies.shape[0])
            for mode, vector in vectors.items():
                result.vectors[mode].append(vector)
            if config.save_energies:
                atomic_write_text(out_dir / ENERGIES_DIR_NAME / f"{run_id}.csv", _energy_csv(energies, band_set))

        if not result.ok:
            log_section(log, f"{len(result.failures)} of {len(entries)} runs failed; no feature tables written")
            return result

        for mode in config.modes:
            path = write_feature_table(result.vectors[mode], out_dir / feature_table_name(mode.value))
            result.tables[mode] = path
            log_section(log, f"Wrote {path}", f"{len(result.vectors[mode])} rows, mode {mode.value}")
        return result
    finally:
        detach_log_file(log, handler)


def load_feature_tables(feature_dir: Path, modes: Sequence[FeatureMode]) -> Dict[FeatureMode, List[FeatureVector]]:
    tables: Dict[FeatureMode, List[FeatureVector]] = {}
    for mode in modes:
        vectors, found = read_feature_table(Path(feature_dir) / feature_table_name(mode.value))
        if found is not mode:
            raise ConfigError(f"{feature_table_name(mode.value)} holds {found.value} features")
        tables[mode] = vectors
    return tables


@dataclass(frozen=True)
class CellFailure:
    kind: ModelKind
    mode: FeatureMode
    message: str


@dataclass
class EvaluationResult:
    reports: List[EvalReport] = field(default_factory=list)
    failures: List[CellFailure] = field(default_factory=list)
    table: Optional[ResultsTable] = None

    @property
    def ok(self) -> bool:
        return not self.failures


def evaluate_tables(
    feature_dir: Path,
    out_dir: Path,
    kinds: Sequence[ModelKind],
    modes: Sequence[FeatureMode],
    overrides: Optional[Mapping[ModelKind, Mapping[str, Any]]] = None,
    seed: int = 0,
    standardize: bool = False,
    threads: int = 1,
    progress: bool = True,
) -> EvaluationResult:
    """LOOCV every kind x mode cell; a cell whose fit fails is recorded and skipped."""

    overrides = overrides or {}
    specs = {kind: make_spec(kind, overrides.get(kind), seed) for kind in kinds}
    tables = load_feature_tables(feature_dir, modes)
    out_dir = Path(out_dir)

    handler = attach_log_file(log, out_dir / LOG_FILE_NAME)
    try:
        log_section(
            log,
            f"Evaluating {len(kinds)} models x {len(modes)} feature modes",
            f"models {', '.join(kind.value for kind in kinds)}; seed {seed}; standardize {standardize}",
        )
        result = EvaluationResult()
        for mode in modes:
            for kind in kinds:
                try:
                    report = loocv(
                        tables[mode], specs[kind], standardize=standardize, threads=threads, progress=progress
                    )
                except ModelFitError as exc:
                    log_section(log, f"{kind.label} / {mode.value} failed", str(exc))
                    result.failures.append(CellFailure(kind, mode, str(exc)))
                    continue
                write_json(out_dir / REPORTS_DIR_NAME / f"{kind.value}_{mode.value}.json", report.to_state())
                summary = f"MAE {report.mae:.6g} nm over {len(report.fold_predictions)} folds"
                if report.importance_summary is not None:
                    top = ", ".join(f"{name} {score:.3f}" for name, score in report.top_features())
                    summary += f"; top features: {top}"
                log_section(log, f"{kind.label} / {mode.value}", summary)
                result.reports.append(report)

        if result.reports:
            result.table = results_table(result.reports)
            atomic_write_text(out_dir / RESULTS_CSV_FILE, result.table.to_csv())
            atomic_write_text(out_dir / RESULTS_TEXT_FILE, result.table.to_text())
        if not result.ok:
            log_section(log, f"{len(result.failures)} of {len(kinds) * len(modes)} cells failed")
        return result
    finally:
        detach_log_file(log, handler)


def train(
    feature_table: Path,
    kind: ModelKind,
    out_dir: Path,
    overrides: Optional[Mapping[str, Any]] = None,
    seed: int = 0,
) -> Tuple[TrainedModel, Path]:
    """Fit one spec on a whole feature table and persist it to ``models/<kind>_<mode>.json``."""

    vectors, mode = read_feature_table(feature_table)
    X, y, _, names, _ = feature_matrix(vectors)
    model = fit_model(make_spec(kind, overrides, seed), X, y, names)
    path = save_model(model, Path(out_dir) / MODELS_DIR_NAME / f"{kind.value}_{mode.value}.json")
    log.info("Trained %s on %d runs (%s features) -> %s", kind.label, len(vectors), mode.value, path)
    return model, path


def feature_row_for_run(model: TrainedModel, run_dir: Path, config: PipelineConfig) -> np.ndarray:
    """Extract the run's features in the layout the model was trained on."""

    mode = infer_mode(model.feature_names)
    band_set = config.band_set()
    run_id, energies = run_energies(run_dir, config.stft_config(), band_set)
    vector = extract_features(energies, mode, run_id, float("nan"), band_set.indices)
    if vector.names != model.feature_names:
        raise ConfigError(
            f"run {run_id} yields {len(vector.names)} features that do not match the model's "
            f"{len(model.feature_names)}; check --bands"
        )
    return vector.values


def predict(model: TrainedModel, row: np.ndarray) -> Tuple[float, List[Tuple[str, float]]]:
    prediction = float(model.predict(np.asarray(row, dtype=np.float64))[0])
    top = model.top_features(3) if model.kind.has_importance else []
    return prediction, top
