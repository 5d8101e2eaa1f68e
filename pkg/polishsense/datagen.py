"""
Synthetic polishing campaigns with planted band-level signal.

Every run is white noise plus a few sinusoids per spectral band. In the signal
bands each tone group's RMS is ``base_rms + coupling[band] * delta``, where
``delta`` is the run's roughness delta; in every other band the RMS is drawn per
run independently of the target. Short runs are synthesized over the full six
minutes with start-up and ramp-down transients in the first and last minute;
long runs are written already cut to their retained four minutes.

Micrograph pairs scale one fixed zero-mean texture so that the two Sa values
differ by exactly ``delta``.
"""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from tqdm import tqdm

from .constants import (
    DATASET_MANIFEST_FILE,
    LONG_STAGE_COUNT,
    MICROGRAPH_AFTER_FILE,
    MICROGRAPH_BEFORE_FILE,
    NOMINAL_SAMPLE_RATE_HZ,
    RETAINED_SECONDS,
    RUNS_DIR_NAME,
    SHORT_RUN_SECONDS,
    SHORT_STAGE_COUNT,
    TRANSIENT_SECONDS,
)
from .errors import ConfigError, PolishSenseError
from .file_utils import dump_json, read_json, write_json
from .logging_utils import get_logger
from .runs import ExperimentClass, RunManifest, VibrationRun, save_run
from .spectral import BandSet, default_band_set
from .surface import Micrograph, RoughnessTarget, areal_roughness, roughness_delta, save_micrograph

log = get_logger("datagen")

_TONE_STREAM = 0
_TEXTURE_STREAM = 1


class ScenarioConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    seed: int = 42
    n_short: int = Field(SHORT_STAGE_COUNT, ge=0)
    n_long: int = Field(LONG_STAGE_COUNT, ge=0)
    sample_rate_hz: float = Field(NOMINAL_SAMPLE_RATE_HZ, gt=0)
    bands: Optional[List[Dict[str, float]]] = None
    signal_bands: List[int] = Field(default_factory=lambda: [2, 9, 12])
    coupling: Optional[Dict[int, float]] = None
    base_rms: float = Field(0.05, ge=0)
    distractor_rms: Tuple[float, float] = (0.0, 0.5)
    noise_floor: float = Field(0.2, ge=0)
    tones_per_band: int = Field(3, ge=1)
    target_range_short: Tuple[float, float] = (0.008, 3.02)
    target_range_long: Tuple[float, float] = (1.06, 2.28)
    sa_after_range: Tuple[float, float] = (1.0, 4.0)
    micrograph_size: int = Field(128, ge=2)

    @model_validator(mode="after")
    def _check_consistency(self) -> "ScenarioConfig":
        for name in ("target_range_short", "target_range_long", "sa_after_range"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                raise ValueError(f"{name} must satisfy 0 < low <= high, got ({lo}, {hi})")
        lo, hi = self.distractor_rms
        if not 0 <= lo <= hi:
            raise ValueError(f"distractor_rms must satisfy 0 <= low <= high, got ({lo}, {hi})")
        try:
            band_set = self.band_set()
        except (ConfigError, KeyError, TypeError) as exc:
            raise ValueError(f"invalid bands: {exc}") from exc
        unknown = sorted(set(self.signal_bands) - set(band_set.indices))
        if unknown:
            raise ValueError(f"signal_bands {unknown} are not in the band set")
        stray = sorted(set(self.coupling or {}) - set(self.signal_bands))
        if stray:
            raise ValueError(f"coupling given for non-signal bands {stray}")
        return self

    def band_set(self) -> BandSet:
        return default_band_set() if self.bands is None else BandSet.from_state(self.bands)

    def coupling_for(self, band_index: int) -> float:
        if self.coupling is None:
            return 0.5
        return float(self.coupling.get(band_index, 0.0))

    @property
    def run_count(self) -> int:
        return self.n_short + self.n_long


def load_scenario(path: Path) -> ScenarioConfig:
    path = Path(path)
    try:
        return ScenarioConfig.model_validate(read_json(path))
    except FileNotFoundError as exc:
        raise ConfigError(f"Scenario file not found: {path}") from exc
    except PolishSenseError as exc:
        raise ConfigError(f"Invalid scenario file {path}: {exc}") from exc
    except ValidationError as exc:
        raise ConfigError(f"Invalid scenario file {path}: {exc}") from exc


@dataclass(frozen=True)
class RunPlan:
    run_index: int
    run_id: str
    experiment_class: ExperimentClass
    stage_index: int


def plan_runs(cfg: ScenarioConfig) -> List[RunPlan]:
    plans = [
        RunPlan(i, f"short-{i + 1:02d}", ExperimentClass.SHORT_6MIN, i + 1) for i in range(cfg.n_short)
    ]
    plans += [
        RunPlan(cfg.n_short + i, f"long-{i + 1:02d}", ExperimentClass.LONG_12HR, i + 1)
        for i in range(cfg.n_long)
    ]
    return plans


def run_rng(seed: int, run_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, run_index]))


def _stream_rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream,)))


def tone_frequencies(cfg: ScenarioConfig, band_set: Optional[BandSet] = None) -> Dict[int, np.ndarray]:
    """Scenario-wide tone frequencies, kept clear of each band's edges."""

    band_set = band_set or cfg.band_set()
    rng = _stream_rng(cfg.seed, _TONE_STREAM)
    frequencies: Dict[int, np.ndarray] = {}
    for band in band_set:
        margin = max(3.0, 0.1 * band.width_hz)
        lo, hi = band.f_lo + margin, band.f_hi - margin
        if lo >= hi:
            lo = hi = band.center_hz
        frequencies[band.index] = np.sort(rng.uniform(lo, hi, size=cfg.tones_per_band))
    return frequencies


def reference_texture(cfg: ScenarioConfig) -> np.ndarray:
    rng = _stream_rng(cfg.seed, _TEXTURE_STREAM)
    texture = rng.standard_normal((cfg.micrograph_size, cfg.micrograph_size))
    return texture - texture.mean()


def micrograph_with_sa(texture: np.ndarray, sa: float) -> Micrograph:
    base = areal_roughness(Micrograph(texture))
    return Micrograph(texture * (sa / base))


def _transient_envelope(total: int, ramp: int) -> np.ndarray:
    envelope = np.ones(total, dtype=np.float64)
    envelope[:ramp] = np.linspace(0.0, 1.0, ramp, endpoint=False)
    envelope[total - ramp :] = np.linspace(1.0, 0.0, ramp, endpoint=False)
    return envelope


@dataclass(frozen=True)
class SyntheticRun:
    run: VibrationRun
    delta: float
    sa_after: float
    band_rms: Dict[int, float] = field(default_factory=dict)


def synthesize_run(
    cfg: ScenarioConfig,
    plan: RunPlan,
    band_set: Optional[BandSet] = None,
    frequencies: Optional[Dict[int, np.ndarray]] = None,
) -> SyntheticRun:
    band_set = band_set or cfg.band_set()
    frequencies = frequencies if frequencies is not None else tone_frequencies(cfg, band_set)
    fs = cfg.sample_rate_hz
    band_set.validate_against(fs / 2.0)

    short = plan.experiment_class is ExperimentClass.SHORT_6MIN
    seconds = SHORT_RUN_SECONDS if short else RETAINED_SECONDS
    total = int(round(seconds * fs))

    rng = run_rng(cfg.seed, plan.run_index)
    delta = float(rng.uniform(*(cfg.target_range_short if short else cfg.target_range_long)))
    sa_after = float(rng.uniform(*cfg.sa_after_range))
    signal = set(cfg.signal_bands)
    band_rms: Dict[int, float] = {}
    for band in band_set:
        if band.index in signal:
            band_rms[band.index] = cfg.base_rms + cfg.coupling_for(band.index) * delta
        else:
            band_rms[band.index] = float(rng.uniform(*cfg.distractor_rms))
    phases = rng.uniform(0.0, 2.0 * math.pi, size=(len(band_set), cfg.tones_per_band))
    noise = rng.normal(0.0, cfg.noise_floor, size=total)

    t = np.arange(total, dtype=np.float64) / fs
    tonal = np.zeros(total, dtype=np.float64)
    for row, band in enumerate(band_set):
        amplitude = band_rms[band.index] * math.sqrt(2.0 / cfg.tones_per_band)
        if amplitude == 0.0:
            continue
        for freq, phase in zip(frequencies[band.index], phases[row]):
            tonal += amplitude * np.sin(2.0 * math.pi * freq * t + phase)
    if short:
        tonal *= _transient_envelope(total, int(round(TRANSIENT_SECONDS * fs)))

    manifest = RunManifest(
        run_id=plan.run_id,
        experiment_class=plan.experiment_class,
        stage_index=plan.stage_index,
        sample_rate_hz=fs,
        sample_count=total,
        pre_truncated=not short,
    )
    return SyntheticRun(
        run=VibrationRun(manifest=manifest, samples=tonal + noise),
        delta=delta,
        sa_after=sa_after,
        band_rms=band_rms,
    )


def gen_run(
    cfg: ScenarioConfig,
    run_index: int,
    out_dir: Path,
    band_set: Optional[BandSet] = None,
    frequencies: Optional[Dict[int, np.ndarray]] = None,
    texture: Optional[np.ndarray] = None,
) -> Tuple[Path, RoughnessTarget]:
    """Synthesize run ``run_index`` and write it under ``out_dir/runs/<run_id>``."""

    plans = plan_runs(cfg)
    if not 0 <= run_index < len(plans):
        raise ConfigError(f"run_index {run_index} outside 0..{len(plans) - 1}")
    plan = plans[run_index]
    synthetic = synthesize_run(cfg, plan, band_set, frequencies)

    texture = texture if texture is not None else reference_texture(cfg)
    after = micrograph_with_sa(texture, synthetic.sa_after)
    before = micrograph_with_sa(texture, synthetic.sa_after + synthetic.delta)

    run_dir = Path(out_dir) / RUNS_DIR_NAME / plan.run_id
    save_run(synthetic.run, run_dir)
    save_micrograph(before, run_dir / MICROGRAPH_BEFORE_FILE)
    save_micrograph(after, run_dir / MICROGRAPH_AFTER_FILE, write_meta=False)
    return run_dir, roughness_delta(before, after, plan.run_id)


def manifest_hash(manifest: Dict[str, Any]) -> str:
    return hashlib.sha256(dump_json(manifest).encode("utf-8")).hexdigest()


def gen_dataset(cfg: ScenarioConfig, out_dir: Path, threads: int = 1, progress: bool = False) -> Dict[str, Any]:
    """Write every planned run plus ``dataset.json``; returns the manifest document."""

    out_dir = Path(out_dir)
    band_set = cfg.band_set()
    band_set.validate_against(cfg.sample_rate_hz / 2.0)
    frequencies = tone_frequencies(cfg, band_set)
    texture = reference_texture(cfg)
    plans = plan_runs(cfg)
    log.info("Generating %d runs (%d short, %d long) into %s", len(plans), cfg.n_short, cfg.n_long, out_dir)

    def build(plan: RunPlan) -> Tuple[Path, RoughnessTarget]:
        return gen_run(cfg, plan.run_index, out_dir, band_set, frequencies, texture)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(tqdm(pool.map(build, plans), total=len(plans), desc="gen", disable=not progress))

    runs = []
    for plan, (run_dir, target) in zip(plans, results):
        runs.append(
            {
                "run_id": plan.run_id,
                "experiment_class": plan.experiment_class.value,
                "stage_index": plan.stage_index,
                "path": run_dir.relative_to(out_dir).as_posix(),
                **{key: value for key, value in target.to_state().items() if key != "run_id"},
            }
        )
    manifest = {
        "scenario": cfg.model_dump(mode="json"),
        "band_set": band_set.to_state(),
        "runs": runs,
    }
    write_json(out_dir / DATASET_MANIFEST_FILE, manifest)
    log.info("Dataset manifest %s (sha256 %s)", out_dir / DATASET_MANIFEST_FILE, manifest_hash(manifest))
    return manifest
