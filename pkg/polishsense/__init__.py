"""Vibration-based roughness-delta prediction for capsule polishing runs."""

from .constants import BASE_DIR, DATASET_MANIFEST_FILE, feature_table_name
from .errors import ConfigError, PolishSenseError
from .evaluation import EvalReport, ResultsTable, loocv, mae, results_table
from .features import FeatureMode, FeatureVector, extract_separate, extract_together, moments
from .runs import ExperimentClass, RunManifest, VibrationRun, load_run, truncate_run
from .spectral import BandSet, SpectralBand, StftConfig, band_energy, band_energy_series, default_band_set, stft
from .surface import Micrograph, RoughnessTarget, areal_roughness, roughness_delta

__all__ = [
    "BASE_DIR",
    "DATASET_MANIFEST_FILE",
    "BandSet",
    "ConfigError",
    "EvalReport",
    "ExperimentClass",
    "FeatureMode",
    "FeatureVector",
    "Micrograph",
    "PolishSenseError",
    "ResultsTable",
    "RoughnessTarget",
    "RunManifest",
    "SpectralBand",
    "StftConfig",
    "VibrationRun",
    "areal_roughness",
    "band_energy",
    "band_energy_series",
    "default_band_set",
    "extract_separate",
    "extract_together",
    "feature_table_name",
    "load_run",
    "loocv",
    "mae",
    "moments",
    "results_table",
    "roughness_delta",
    "stft",
    "truncate_run",
]
