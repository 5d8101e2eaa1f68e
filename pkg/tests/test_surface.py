from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest

from polishsense.surface import (
    Micrograph,
    MicrographError,
    areal_roughness,
    load_micrograph,
    roughness_delta,
    save_micrograph,
)


def sa_oracle(heights: np.ndarray) -> float:
    values = heights.ravel().tolist()
    mean = math.fsum(values) / len(values)
    return math.fsum(abs(v - mean) for v in values) / len(values)


class TestArealRoughness:
    def test_matches_two_pass_oracle(self, rng):
        for _ in range(50):
            rows, cols = rng.integers(1, 513, size=2)
            heights = rng.normal(rng.uniform(-5, 5), rng.uniform(1, 10), size=(rows, cols))
            expected = sa_oracle(heights)
            assert areal_roughness(Micrograph(heights)) == pytest.approx(expected, rel=1e-12, abs=1e-300)

    def test_flat_surface_is_zero(self):
        assert areal_roughness(Micrograph(np.full((4, 4), 17.3))) == 0.0

    def test_single_pixel_is_zero(self):
        assert areal_roughness(Micrograph(np.array([[2.5]]))) == 0.0

    def test_checkerboard(self):
        heights = np.array([[0.0, 2.0], [2.0, 0.0]])
        assert areal_roughness(Micrograph(heights)) == 1.0

    def test_translation_invariance(self, rng):
        heights = rng.standard_normal((64, 64))
        base = areal_roughness(Micrograph(heights))
        assert areal_roughness(Micrograph(heights + 250.0)) == pytest.approx(base, rel=1e-12)

    def test_linear_scaling(self, rng):
        heights = rng.standard_normal((64, 64))
        base = areal_roughness(Micrograph(heights))
        assert areal_roughness(Micrograph(heights * 3.5)) == pytest.approx(3.5 * base, rel=1e-12)

    def test_pixel_area_does_not_change_sa(self, rng):
        heights = rng.standard_normal((8, 8))
        assert areal_roughness(Micrograph(heights, pixel_area=4.0)) == pytest.approx(
            areal_roughness(Micrograph(heights)), rel=1e-15
        )


class TestMicrographValidation:
    def test_empty_matrix(self):
        with pytest.raises(MicrographError):
            Micrograph(np.zeros((0, 3)))

    def test_non_finite(self):
        with pytest.raises(MicrographError):
            Micrograph(np.array([[1.0, np.inf]]))

    def test_bad_pixel_area(self):
        with pytest.raises(MicrographError):
            Micrograph(np.ones((2, 2)), pixel_area=0.0)


class TestRoughnessDelta:
    def test_delta_is_absolute_difference(self):
        rough = Micrograph(np.array([[0.0, 4.0], [4.0, 0.0]]))
        smooth = Micrograph(np.array([[0.0, 1.0], [1.0, 0.0]]))
        target = roughness_delta(rough, smooth, "short-01")
        assert (target.sa_before, target.sa_after, target.delta) == (2.0, 0.5, 1.5)

    def test_roughening_still_positive(self):
        smooth = Micrograph(np.array([[0.0, 1.0], [1.0, 0.0]]))
        rough = Micrograph(np.array([[0.0, 4.0], [4.0, 0.0]]))
        assert roughness_delta(smooth, rough, "r").delta == 1.5


class TestMicrographFiles:
    def test_csv_round_trip_is_bit_exact(self, tmp_path: Path, rng):
        micrograph = Micrograph(rng.standard_normal((12, 9)) * 1e-3, pixel_area=0.25)
        path = tmp_path / "micrograph_before.csv"
        save_micrograph(micrograph, path)
        loaded = load_micrograph(path)
        assert np.array_equal(loaded.heights, micrograph.heights)
        assert loaded.pixel_area == 0.25

    def test_missing_file(self, tmp_path: Path):
        with pytest.raises(MicrographError, match="missing file"):
            load_micrograph(tmp_path / "nope.csv")
