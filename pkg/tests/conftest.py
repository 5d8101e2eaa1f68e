from __future__ import annotations

from pathlib import Path
from typing import Dict, List

import numpy as np
import pytest

from polishsense.datagen import ScenarioConfig
from polishsense.runs import ExperimentClass, RunManifest, VibrationRun
from polishsense.spectral import BandSet, StftConfig

SMALL_RATE_HZ = 200.0
SMALL_FFT_POINTS = 256


def small_band_state() -> List[Dict[str, float]]:
    """13 equal-width bands over 0-100 Hz, the Nyquist limit at 200 Hz."""

    edges = np.linspace(0.0, SMALL_RATE_HZ / 2.0, 14)
    return [
        {"index": i + 1, "f_lo_hz": float(edges[i]), "f_hi_hz": float(edges[i + 1])} for i in range(13)
    ]


def make_run(
    samples: np.ndarray,
    run_id: str = "run-01",
    experiment_class: ExperimentClass = ExperimentClass.SHORT_6MIN,
    sample_rate_hz: float = SMALL_RATE_HZ,
    pre_truncated: bool = False,
) -> VibrationRun:
    manifest = RunManifest(
        run_id=run_id,
        experiment_class=experiment_class,
        stage_index=1,
        sample_rate_hz=sample_rate_hz,
        sample_count=int(np.asarray(samples).shape[0]),
        pre_truncated=pre_truncated,
    )
    return VibrationRun(manifest=manifest, samples=samples)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def small_bands() -> BandSet:
    return BandSet.from_state(small_band_state())


@pytest.fixture
def small_stft() -> StftConfig:
    return StftConfig(window_seconds=1.0, overlap_fraction=0.0, fft_points=SMALL_FFT_POINTS)


@pytest.fixture
def small_scenario() -> ScenarioConfig:
    return ScenarioConfig(
        seed=7,
        n_short=3,
        n_long=2,
        sample_rate_hz=SMALL_RATE_HZ,
        bands=small_band_state(),
        signal_bands=[2],
        micrograph_size=16,
    )


@pytest.fixture
def bands_file(tmp_path: Path) -> Path:
    from polishsense.spectral import save_band_set

    path = tmp_path / "bands.json"
    save_band_set(BandSet.from_state(small_band_state()), path)
    return path
