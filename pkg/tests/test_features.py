from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest

from polishsense.features import (
    FeatureMode,
    FeatureTableError,
    FeatureVector,
    Standardizer,
    extract_separate,
    extract_together,
    feature_names,
    infer_mode,
    moments,
    read_feature_table,
    write_feature_table,
)


def moments_oracle(values):
    values = list(map(float, values))
    n = len(values)
    mean = math.fsum(values) / n
    m2 = math.fsum((v - mean) ** 2 for v in values) / n
    m3 = math.fsum((v - mean) ** 3 for v in values) / n
    m4 = math.fsum((v - mean) ** 4 for v in values) / n
    return mean, m2, m3 / m2**1.5, m4 / m2**2


class TestMoments:
    def test_one_to_four(self):
        mean, variance, skewness, kurtosis = moments([1, 2, 3, 4])
        assert mean == 2.5
        assert variance == 1.25
        assert skewness == 0.0
        assert kurtosis == pytest.approx(1.64, rel=1e-15)

    def test_constant_sequence(self):
        assert moments([0.1, 0.1, 0.1]) == (0.1, 0.0, 0.0, 0.0)

    def test_single_value(self):
        assert moments([7.0]) == (7.0, 0.0, 0.0, 0.0)

    def test_symmetric_sequence_has_zero_skew(self):
        assert abs(moments([-3.0, -1.0, 0.0, 1.0, 3.0])[2]) < 1e-12

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            moments([])

    @pytest.mark.parametrize("size", [10, 1_000, 1_000_000])
    def test_matches_two_pass_oracle(self, rng, size):
        values = rng.gamma(2.0, 3.0, size=size)
        got = moments(values)
        expected = moments_oracle(values)
        for g, e in zip(got, expected):
            assert g == pytest.approx(e, rel=1e-10)

    def test_shift_changes_only_mean(self, rng):
        values = rng.gamma(2.0, 1.0, size=500)
        base = moments(values)
        shifted = moments(values + 10.0)
        assert shifted[0] == pytest.approx(base[0] + 10.0, rel=1e-12)
        for b, s in zip(base[1:], shifted[1:]):
            assert s == pytest.approx(b, rel=1e-9)

    def test_scale_invariance_of_shape(self, rng):
        values = rng.gamma(2.0, 1.0, size=500)
        base = moments(values)
        scaled = moments(values * 4.0)
        assert scaled[0] == pytest.approx(4.0 * base[0], rel=1e-12)
        assert scaled[1] == pytest.approx(16.0 * base[1], rel=1e-12)
        assert scaled[2] == pytest.approx(base[2], rel=1e-9)
        assert scaled[3] == pytest.approx(base[3], rel=1e-9)


class TestExtraction:
    def test_separate_layout(self, rng):
        energies = rng.random((30, 13))
        vector = extract_separate(energies, "short-01", 1.5)
        assert vector.mode is FeatureMode.SEPARATE
        assert len(vector.values) == 52
        assert vector.names[:4] == ("band01_mean", "band01_variance", "band01_skewness", "band01_kurtosis")
        assert vector.names[27] == "band07_kurtosis"
        assert vector.values[24] == moments(energies[:, 6])[0]

    def test_separate_single_frame(self, rng):
        row = rng.random((1, 13))
        vector = extract_separate(row, "r", 0.0)
        values = vector.values.reshape(13, 4)
        assert np.array_equal(values[:, 0], row[0])
        assert np.all(values[:, 1:] == 0.0)

    def test_separate_zero_matrix(self):
        assert np.all(extract_separate(np.zeros((5, 13)), "r", 0.0).values == 0.0)

    def test_constant_column(self):
        energies = np.zeros((6, 13))
        energies[:, 3] = 5.0
        values = extract_separate(energies, "r", 0.0).values.reshape(13, 4)
        assert values[3, 0] == 5.0
        assert values[3, 1] == 0.0
        assert np.all(np.delete(values[:, 0], 3) == 0.0)

    def test_column_permutation_permutes_blocks(self, rng):
        energies = rng.random((20, 13))
        order = rng.permutation(13)
        base = extract_separate(energies, "r", 0.0)
        permuted = extract_separate(energies[:, order], "r", 0.0, band_indices=[int(i) + 1 for i in order])
        lookup = dict(zip(permuted.names, permuted.values))
        for name, value in zip(base.names, base.values):
            assert lookup[name] == value

    def test_together_pools_all_values(self):
        vector = extract_together(np.array([[1.0, 2.0], [3.0, 4.0]]), "r", 0.3)
        assert vector.names == ("pooled_mean", "pooled_variance", "pooled_skewness", "pooled_kurtosis")
        assert vector.values[0] == 2.5
        assert vector.values[1] == 1.25
        assert vector.values[2] == 0.0
        assert vector.values[3] == pytest.approx(1.64, rel=1e-15)

    def test_together_constant(self):
        assert np.array_equal(extract_together(np.full((3, 13), 2.0), "r", 0.0).values, [2.0, 0.0, 0.0, 0.0])


class TestFeatureNames:
    def test_modes(self):
        assert len(feature_names(FeatureMode.SEPARATE, range(1, 14))) == 52
        assert feature_names(FeatureMode.TOGETHER, range(1, 14))[0] == "pooled_mean"

    def test_infer_mode(self):
        assert infer_mode(feature_names(FeatureMode.SEPARATE, range(1, 14))) is FeatureMode.SEPARATE
        assert infer_mode(feature_names(FeatureMode.TOGETHER, [])) is FeatureMode.TOGETHER

    def test_infer_mode_rejects_shuffled_columns(self):
        names = feature_names(FeatureMode.SEPARATE, [1, 2])
        names[0], names[1] = names[1], names[0]
        with pytest.raises(FeatureTableError):
            infer_mode(names)


class TestFeatureTable:
    def test_round_trip_is_bit_exact(self, tmp_path: Path, rng):
        vectors = [
            extract_separate(rng.gamma(2.0, 1e6, size=(40, 13)), f"short-{i:02d}", float(rng.uniform(0, 3)))
            for i in range(1, 6)
        ]
        path = write_feature_table(vectors, tmp_path / "features_separate.csv")
        header = path.read_text().splitlines()[0].split(",")
        assert header[:3] == ["run_id", "target", "band01_mean"]
        loaded, mode = read_feature_table(path)
        assert mode is FeatureMode.SEPARATE
        for original, back in zip(vectors, loaded):
            assert back.run_id == original.run_id
            assert back.target == original.target
            assert np.array_equal(back.values, original.values)

    def test_mixed_layouts_rejected(self, tmp_path: Path, rng):
        energies = rng.random((5, 13))
        vectors = [extract_separate(energies, "a", 0.0), extract_together(energies, "b", 0.0)]
        with pytest.raises(FeatureTableError):
            write_feature_table(vectors, tmp_path / "mixed.csv")

    def test_value_name_mismatch(self):
        with pytest.raises(FeatureTableError):
            FeatureVector("r", FeatureMode.TOGETHER, np.zeros(3), ("a", "b", "c", "d"), 0.0)


class TestStandardizer:
    def test_training_statistics_only(self):
        train = np.array([[0.0, 5.0], [2.0, 5.0], [4.0, 5.0]])
        scaler = Standardizer().fit(train)
        transformed = scaler.transform(np.array([[2.0, 7.0]]))
        assert transformed[0, 0] == 0.0
        assert transformed[0, 1] == 2.0

    def test_zero_mean_unit_variance(self, rng):
        X = rng.normal(3.0, 2.0, size=(50, 4))
        Z = Standardizer().fit_transform(X)
        assert np.allclose(Z.mean(axis=0), 0.0, atol=1e-12)
        assert np.allclose(Z.std(axis=0), 1.0, rtol=1e-12)
