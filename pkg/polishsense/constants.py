from __future__ import annotations

from pathlib import Path


BASE_DIR = Path(__file__).resolve().parent.parent
DEFAULT_ENV_FILE = BASE_DIR / ".env"
LOG_FILE_NAME = "polishsense.log"

# Environment variables
THREADS_ENV = "POLISHSENSE_THREADS"
LOG_LEVEL_ENV = "POLISHSENSE_LOG_LEVEL"

# Acquisition protocol
NOMINAL_SAMPLE_RATE_HZ = 10_000.0
SHORT_RUN_SECONDS = 360.0
LONG_RUN_SECONDS = 43_200.0
TRANSIENT_SECONDS = 60.0
RETAINED_SECONDS = 240.0
SHORT_STAGE_COUNT = 18
LONG_STAGE_COUNT = 6

# Run directory layout
RUN_MANIFEST_FILE = "manifest.json"
RUN_SAMPLES_FILE = "samples.f64le"
MICROGRAPH_BEFORE_FILE = "micrograph_before.csv"
MICROGRAPH_AFTER_FILE = "micrograph_after.csv"
MICROGRAPH_META_FILE = "micrograph.json"

# Dataset / pipeline layout
DATASET_MANIFEST_FILE = "dataset.json"
RUNS_DIR_NAME = "runs"
ENERGIES_DIR_NAME = "energies"
REPORTS_DIR_NAME = "reports"
MODELS_DIR_NAME = "models"
RESULTS_CSV_FILE = "results.csv"
RESULTS_TEXT_FILE = "results.txt"

# 17 significant digits round-trip every float64
FLOAT_FORMAT = "%.17g"

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def feature_table_name(mode: str) -> str:
    return f"features_{mode}.csv"


__all__ = [
    "BASE_DIR",
    "DEFAULT_ENV_FILE",
    "LOG_FILE_NAME",
    "THREADS_ENV",
    "LOG_LEVEL_ENV",
    "NOMINAL_SAMPLE_RATE_HZ",
    "SHORT_RUN_SECONDS",
    "LONG_RUN_SECONDS",
    "TRANSIENT_SECONDS",
    "RETAINED_SECONDS",
    "SHORT_STAGE_COUNT",
    "LONG_STAGE_COUNT",
    "RUN_MANIFEST_FILE",
    "RUN_SAMPLES_FILE",
    "MICROGRAPH_BEFORE_FILE",
    "MICROGRAPH_AFTER_FILE",
    "MICROGRAPH_META_FILE",
    "DATASET_MANIFEST_FILE",
    "RUNS_DIR_NAME",
    "ENERGIES_DIR_NAME",
    "REPORTS_DIR_NAME",
    "MODELS_DIR_NAME",
    "RESULTS_CSV_FILE",
    "RESULTS_TEXT_FILE",
    "FLOAT_FORMAT",
    "EXIT_OK",
    "EXIT_FAILURE",
    "EXIT_USAGE",
    "feature_table_name",
]
