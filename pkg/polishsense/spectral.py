"""
Short-time Fourier analysis and spectral-band energy integration.

Conventions (pinned by the tests):

* each frame is multiplied by a symmetric Hamming window, zero-padded to
  ``fft_points`` and transformed; the spectrum is the one-sided raw power
  ``|X[k]|**2`` for ``k = 0 .. fft_points/2`` with no window-gain or density
  normalization;
* partial trailing windows are dropped;
* a bin belongs to a band when its centre frequency ``k * bin_hz`` lies in the
  half-open interval ``[f_lo, f_hi)``, so disjoint bands never share a bin.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import jsonschema
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import windows

from .errors import ConfigError, PolishSenseError
from .file_utils import read_json, write_json
from .runs import VibrationRun

BAND_COUNT = 13
DEFAULT_LOWEST_EDGE_HZ = 25.0
DEFAULT_TOP_EDGE_HZ = 5000.0

# Frames transformed per FFT call; bounds the temporary windowed-frame matrix.
_FRAME_BLOCK = 64

BAND_SET_SCHEMA: Dict[str, Any] = {
    "type": "array",
    "minItems": BAND_COUNT,
    "maxItems": BAND_COUNT,
    "items": {
        "type": "object",
        "required": ["index", "f_lo_hz", "f_hi_hz"],
        "properties": {
            "index": {"type": "integer", "minimum": 1},
            "f_lo_hz": {"type": "number", "minimum": 0},
            "f_hi_hz": {"type": "number", "exclusiveMinimum": 0},
        },
    },
}


class SpectralError(PolishSenseError):
    """Raised for runs shorter than one window or bands outside the spectrum."""


@dataclass(frozen=True)
class StftConfig:
    window_seconds: float = 1.0
    overlap_fraction: float = 0.0
    fft_points: int = 16384
    window_kind: str = "hamming"

    def __post_init__(self) -> None:
        if not self.window_seconds > 0:
            raise ConfigError(f"window_seconds must be > 0, got {self.window_seconds}")
        if not 0.0 <= self.overlap_fraction < 1.0:
            raise ConfigError(f"overlap_fraction must lie in [0, 1), got {self.overlap_fraction}")
        if self.fft_points < 2:
            raise ConfigError(f"fft_points must be >= 2, got {self.fft_points}")
        if self.window_kind != "hamming":
            raise ConfigError(f"unsupported window kind {self.window_kind!r}; only 'hamming' is available")

    def window_samples(self, sample_rate_hz: float) -> int:
        length = int(round(self.window_seconds * sample_rate_hz))
        if length < 1:
            raise ConfigError(f"window of {self.window_seconds} s holds no samples at {sample_rate_hz} Hz")
        if self.fft_points < length:
            raise ConfigError(
                f"fft_points ({self.fft_points}) must be >= window length ({length} samples); "
                "frames are zero-padded, never truncated"
            )
        return length

    def hop_samples(self, sample_rate_hz: float) -> int:
        return max(1, int(round(self.window_samples(sample_rate_hz) * (1.0 - self.overlap_fraction))))


@dataclass(frozen=True)
class Spectrogram:
    power: np.ndarray = field(repr=False)
    bin_hz: float
    frame_seconds: float
    sample_rate_hz: float

    @property
    def frames(self) -> int:
        return int(self.power.shape[0])

    @property
    def bins(self) -> int:
        return int(self.power.shape[1])

    @property
    def nyquist_hz(self) -> float:
        return self.sample_rate_hz / 2.0

    def frequencies(self) -> np.ndarray:
        return np.arange(self.bins) * self.bin_hz


@dataclass(frozen=True, order=True)
class SpectralBand:
    f_lo: float
    f_hi: float
    index: int

    def __post_init__(self) -> None:
        if not 0.0 <= self.f_lo < self.f_hi:
            raise ConfigError(f"band {self.index}: need 0 <= f_lo < f_hi, got [{self.f_lo}, {self.f_hi})")

    @property
    def width_hz(self) -> float:
        return self.f_hi - self.f_lo

    @property
    def center_hz(self) -> float:
        return 0.5 * (self.f_lo + self.f_hi)


@dataclass(frozen=True)
class BandSet:
    """Sorted, pairwise disjoint spectral bands."""

    bands: Tuple[SpectralBand, ...]

    def __post_init__(self) -> None:
        bands = tuple(sorted(self.bands))
        if not bands:
            raise ConfigError("a band set needs at least one band")
        indices = [band.index for band in bands]
        if len(set(indices)) != len(indices):
            raise ConfigError(f"band indices must be unique, got {indices}")
        for previous, current in zip(bands, bands[1:]):
            if current.f_lo < previous.f_hi:
                raise ConfigError(f"bands {previous.index} and {current.index} overlap")
        object.__setattr__(self, "bands", bands)

    def __iter__(self) -> Iterator[SpectralBand]:
        return iter(self.bands)

    def __len__(self) -> int:
        return len(self.bands)

    @property
    def indices(self) -> List[int]:
        return [band.index for band in self.bands]

    def band(self, index: int) -> SpectralBand:
        for band in self.bands:
            if band.index == index:
                return band
        raise KeyError(index)

    def validate_against(self, nyquist_hz: float) -> None:
        for band in self.bands:
            if band.f_hi > nyquist_hz * (1.0 + 1e-12):
                raise SpectralError(
                    f"band {band.index} [{band.f_lo}, {band.f_hi}) Hz exceeds the {nyquist_hz} Hz Nyquist limit"
                )

    def to_state(self) -> List[Dict[str, Any]]:
        return [{"index": b.index, "f_lo_hz": b.f_lo, "f_hi_hz": b.f_hi} for b in self.bands]

    @classmethod
    def from_state(cls, state: Iterable[Dict[str, Any]]) -> "BandSet":
        return cls(
            tuple(
                SpectralBand(f_lo=float(item["f_lo_hz"]), f_hi=float(item["f_hi_hz"]), index=int(item["index"]))
                for item in state
            )
        )


def default_band_set() -> BandSet:
    """13 disjoint bands over 0-5 kHz with log-spaced edges above 25 Hz."""

    edges = np.concatenate(([0.0], np.geomspace(DEFAULT_LOWEST_EDGE_HZ, DEFAULT_TOP_EDGE_HZ, BAND_COUNT)))
    edges[-1] = DEFAULT_TOP_EDGE_HZ
    return BandSet(
        tuple(
            SpectralBand(f_lo=float(edges[i]), f_hi=float(edges[i + 1]), index=i + 1)
            for i in range(BAND_COUNT)
        )
    )


def load_band_set(path: Path) -> BandSet:
    path = Path(path)
    try:
        state = read_json(path)
        jsonschema.validate(state, BAND_SET_SCHEMA)
        return BandSet.from_state(state)
    except FileNotFoundError as exc:
        raise ConfigError(f"Band file not found: {path}") from exc
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"Invalid band file {path}: {exc.message}") from exc
    except (PolishSenseError, KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"Invalid band file {path}: {exc}") from exc


def save_band_set(band_set: BandSet, path: Path) -> None:
    write_json(Path(path), band_set.to_state())


def hamming_window(length: int) -> np.ndarray:
    return windows.hamming(length, sym=True)


def stft_samples(samples: np.ndarray, sample_rate_hz: float, cfg: StftConfig) -> Spectrogram:
    samples = np.asarray(samples, dtype=np.float64)
    window_length = cfg.window_samples(sample_rate_hz)
    hop = cfg.hop_samples(sample_rate_hz)
    if samples.shape[0] < window_length:
        raise SpectralError(
            f"signal of {samples.shape[0]} samples is shorter than one {window_length}-sample window"
        )

    frames = sliding_window_view(samples, window_length)[::hop]
    window = hamming_window(window_length)
    bins = cfg.fft_points // 2 + 1
    power = np.empty((frames.shape[0], bins), dtype=np.float64)
    for start in range(0, frames.shape[0], _FRAME_BLOCK):
        block = frames[start : start + _FRAME_BLOCK] * window
        spectrum = np.fft.rfft(block, n=cfg.fft_points, axis=1)
        power[start : start + block.shape[0]] = spectrum.real**2 + spectrum.imag**2

    return Spectrogram(
        power=power,
        bin_hz=sample_rate_hz / cfg.fft_points,
        frame_seconds=hop / sample_rate_hz,
        sample_rate_hz=sample_rate_hz,
    )


def stft(run: VibrationRun, cfg: StftConfig) -> Spectrogram:
    return stft_samples(run.samples, run.manifest.sample_rate_hz, cfg)


def band_bins(bins: int, bin_hz: float, band: SpectralBand, nyquist_hz: Optional[float] = None) -> slice:
    """Contiguous bin range whose centres fall in ``[f_lo, f_hi)``.

    Without ``nyquist_hz`` the top bin centre stands in for it, which undershoots
    fs/2 when the FFT length is odd.
    """

    nyquist = bin_hz * (bins - 1) if nyquist_hz is None else nyquist_hz
    if band.f_lo < 0 or band.f_hi > nyquist * (1.0 + 1e-12):
        raise SpectralError(
            f"band {band.index} [{band.f_lo}, {band.f_hi}) Hz lies outside the 0-{nyquist} Hz spectrum"
        )
    centres = np.arange(bins) * bin_hz
    members = np.flatnonzero((centres >= band.f_lo) & (centres < band.f_hi))
    if members.size == 0:
        return slice(0, 0)
    return slice(int(members[0]), int(members[-1]) + 1)


def _integrate(power: np.ndarray, bins: slice, bin_hz: float) -> np.ndarray:
    return power[:, bins].sum(axis=1) * bin_hz


def band_energy(frame_power: Sequence[float], bin_hz: float, band: SpectralBand) -> float:
    """Riemann sum of one frame's power over ``band``."""

    frame_power = np.asarray(frame_power, dtype=np.float64)
    bins = band_bins(frame_power.shape[0], bin_hz, band)
    return float(_integrate(frame_power[np.newaxis, :], bins, bin_hz)[0])


def band_energy_series(spectrogram: Spectrogram, band_set: BandSet) -> np.ndarray:
    """Per-frame band energies, shape ``(frames, len(band_set))``."""

    energies = np.empty((spectrogram.frames, len(band_set)), dtype=np.float64)
    for column, band in enumerate(band_set):
        bins = band_bins(spectrogram.bins, spectrogram.bin_hz, band, spectrogram.nyquist_hz)
        energies[:, column] = _integrate(spectrogram.power, bins, spectrogram.bin_hz)
    return energies
