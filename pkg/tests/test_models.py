from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
from scipy.optimize import minimize

from polishsense.errors import ConfigError
from polishsense.models import (
    ModelFitError,
    ModelInputError,
    ModelKind,
    SvrConvergenceError,
    UnsupportedOperationError,
    fit_forest,
    fit_gbr,
    fit_gp,
    fit_linear,
    fit_mean,
    fit_model,
    fit_ridge,
    fit_svr,
    fit_tree,
    load_model,
    make_spec,
    predict_gp,
    rbf_kernel,
    save_model,
)
from polishsense.models.svr import insensitive_loss, optimal_bias, solve_svr_dual


def svr_primal(X, y, w, b, C, epsilon):
    return 0.5 * float(w @ w) + C * insensitive_loss(y - X @ w - b, epsilon)


def svr_qp_oracle(X, y, C, epsilon):
    """Dense SLSQP solve of the slack-variable primal."""

    n, p = X.shape

    def objective(z):
        w = z[:p]
        return 0.5 * w @ w + C * z[p + 1 :].sum()

    constraints = [
        {"type": "ineq", "fun": lambda z: z[p + 1 :] + epsilon - (y - X @ z[:p] - z[p])},
        {"type": "ineq", "fun": lambda z: z[p + 1 :] + epsilon + (y - X @ z[:p] - z[p])},
        {"type": "ineq", "fun": lambda z: z[p + 1 :]},
    ]
    start = np.concatenate([np.zeros(p), [float(np.median(y))], np.abs(y - np.median(y))])
    result = minimize(objective, start, method="SLSQP", constraints=constraints,
                      options={"ftol": 1e-12, "maxiter": 1000})
    return float(result.fun)


class TestLinear:
    def test_exact_line(self):
        model = fit_linear([[0.0], [1.0]], [1.0, 3.0])
        assert model.intercept == pytest.approx(1.0, abs=1e-12)
        assert model.coef[0] == pytest.approx(2.0, abs=1e-12)
        assert np.allclose(model.predict([[0.0], [1.0]]), [1.0, 3.0], atol=1e-12)

    def test_constant_target(self, rng):
        model = fit_linear(rng.random((6, 3)), np.full(6, 4.0))
        assert model.intercept == pytest.approx(4.0, abs=1e-12)
        assert np.allclose(model.coef, 0.0, atol=1e-12)

    def test_residual_orthogonality(self, rng):
        X = rng.standard_normal((30, 5))
        y = X @ rng.standard_normal(5) + rng.standard_normal(30)
        model = fit_linear(X, y)
        augmented = np.hstack([np.ones((30, 1)), X])
        residual = y - model.predict(X)
        assert np.max(np.abs(augmented.T @ residual)) < 1e-8

    def test_overparameterized_interpolates(self, rng):
        X = rng.standard_normal((23, 52))
        y = rng.standard_normal(23)
        model = fit_linear(X, y)
        assert np.max(np.abs(model.predict(X) - y)) < 1e-8

    def test_overparameterized_fit_ignores_feature_units(self, rng):
        X = rng.standard_normal((23, 52))
        y = rng.standard_normal(23)
        units = 10.0 ** rng.integers(-3, 15, size=52)
        query = rng.standard_normal((4, 52))
        plain = fit_linear(X, y).predict(query)
        rescaled = fit_linear(X * units, y).predict(query * units)
        assert np.allclose(rescaled, plain, rtol=1e-6, atol=1e-6)


class TestRidge:
    def test_zero_penalty_equals_ols(self, rng):
        X = rng.standard_normal((20, 4))
        y = rng.standard_normal(20)
        assert np.allclose(fit_ridge(X, y, alpha=0.0).coef, fit_linear(X, y).coef, atol=1e-8)

    def test_huge_penalty_predicts_mean(self, rng):
        X = rng.standard_normal((20, 4))
        y = rng.standard_normal(20) + 5.0
        model = fit_ridge(X, y, alpha=1e12)
        assert np.allclose(model.predict(X), y.mean(), rtol=1e-4)

    def test_shrinkage_is_monotone(self, rng):
        X = rng.standard_normal((25, 6))
        y = X @ rng.standard_normal(6) + 0.1 * rng.standard_normal(25)
        norms = [np.linalg.norm(fit_ridge(X, y, alpha=a).coef) for a in (0.01, 0.1, 1.0, 10.0, 100.0)]
        assert all(later <= earlier + 1e-12 for earlier, later in zip(norms, norms[1:]))

    def test_negative_penalty_rejected(self):
        with pytest.raises(ConfigError):
            fit_ridge([[0.0], [1.0]], [0.0, 1.0], alpha=-1.0)

    def test_band_energy_scale(self, rng):
        X = rng.random((23, 52)) * 1e14
        y = rng.random(23) * 3.0
        model = fit_ridge(X, y, alpha=1.0)
        assert np.all(np.isfinite(model.coef))
        assert np.allclose(model.predict(X), y, atol=1e-6)

    def test_penalty_matches_augmented_least_squares(self, rng):
        X = rng.standard_normal((15, 6)) * np.array([1.0, 10.0, 0.1, 3.0, 1.0, 5.0])
        y = rng.standard_normal(15)
        Xc, yc = X - X.mean(axis=0), y - y.mean()
        stacked = np.vstack([Xc, np.sqrt(2.0) * np.eye(6)])
        expected, *_ = np.linalg.lstsq(stacked, np.concatenate([yc, np.zeros(6)]), rcond=None)
        assert np.allclose(fit_ridge(X, y, alpha=2.0).coef, expected, atol=1e-10)


class TestGaussianProcess:
    def test_kernel_diagonal_is_one(self, rng):
        X = rng.standard_normal((5, 3))
        assert np.all(np.diag(rbf_kernel(X, X, 0.7)) == 1.0)

    def test_interpolates_training_points(self):
        X = np.arange(10, dtype=np.float64)[:, None] * 3.0
        y = np.sin(X[:, 0])
        model = fit_gp(X, y, length_scale=1.0, jitter=1e-10)
        assert np.max(np.abs(predict_gp(model, X) - y)) < 1e-6

    def test_reverts_to_zero_mean_far_away(self):
        X = np.array([[0.0], [1.0], [2.0]])
        model = fit_gp(X, [1.0, 2.0, 3.0], length_scale=0.5)
        assert abs(model.predict([[1000.0]])[0]) < 1e-6

    def test_variance_vanishes_at_training_inputs(self):
        X = np.array([[0.0], [2.0], [4.0]])
        model = fit_gp(X, [1.0, -1.0, 0.5], length_scale=1.0)
        assert np.all(model.predict_variance(X) < 1e-6)
        assert model.predict_variance([[100.0]])[0] == pytest.approx(1.0)

    def test_duplicate_points_without_jitter_fail(self):
        X = np.array([[1.0], [1.0]])
        with pytest.raises(ModelFitError):
            fit_gp(X, [1.0, 2.0], length_scale=1.0, jitter=1e-300)


class TestTree:
    def test_single_sample(self):
        model = fit_tree([[3.0, 1.0]], [7.0])
        assert np.all(model.predict([[0.0, 0.0], [9.0, 9.0]]) == 7.0)

    def test_midpoint_split(self):
        model = fit_tree([[0.0], [1.0]], [1.0, 3.0])
        assert model.tree.threshold[0] == 0.5
        assert model.predict([[0.2]])[0] == 1.0
        assert model.predict([[0.5]])[0] == 1.0
        assert model.predict([[0.7]])[0] == 3.0

    def test_constant_target_is_a_stump(self, rng):
        model = fit_tree(rng.random((10, 3)), np.full(10, 2.0))
        assert model.tree.node_count == 1
        assert np.all(model.feature_importance() == 0.0)

    def test_zero_training_error_on_distinct_rows(self, rng):
        X = rng.standard_normal((60, 4))
        y = rng.standard_normal(60)
        model = fit_tree(X, y)
        assert np.array_equal(model.predict(X), y)

    def test_importance_single_feature(self, rng):
        X = rng.random((40, 5))
        y = (X[:, 3] > 0.5).astype(float)
        importance = fit_tree(X, y).feature_importance()
        assert importance[3] == 1.0
        assert np.all(np.delete(importance, 3) == 0.0)

    def test_tie_prefers_lowest_feature(self):
        X = np.array([[0.0, 0.0], [1.0, 1.0]])
        model = fit_tree(X, [0.0, 1.0])
        assert model.tree.feature[0] == 0

    def test_depth_and_leaf_limits(self, rng):
        X = rng.random((50, 3))
        y = rng.random(50)
        assert fit_tree(X, y, max_depth=2).tree.depth <= 2
        tree = fit_tree(X, y, min_samples_leaf=5).tree
        leaves = tree.feature == -1
        assert np.all(tree.n_samples[leaves] >= 5)

    def test_importance_sums_to_one(self, rng):
        X = rng.random((40, 6))
        y = X[:, 0] + 2 * X[:, 2] + 0.01 * rng.random(40)
        importance = fit_tree(X, y).feature_importance()
        assert importance.sum() == pytest.approx(1.0)
        assert np.all(importance >= 0.0)

    def test_planted_feature_dominates(self, rng):
        X = rng.random((60, 52))
        y = 3.0 * X[:, 4] + 0.01 * rng.standard_normal(60)
        importance = fit_tree(X, y).feature_importance()
        assert importance[4] >= 0.9


class TestForest:
    def test_single_unbagged_member_equals_tree(self, rng):
        X = rng.random((30, 4))
        y = rng.random(30)
        forest = fit_forest(X, y, n_trees=1, bootstrap=False, feature_fraction=1.0, seed=3)
        tree = fit_tree(X, y)
        query = rng.random((20, 4))
        assert np.array_equal(forest.predict(query), tree.predict(query))

    def test_same_seed_is_bit_identical(self, rng):
        X = rng.random((30, 4))
        y = rng.random(30)
        query = rng.random((10, 4))
        first = fit_forest(X, y, n_trees=20, feature_fraction=0.5, seed=11).predict(query)
        second = fit_forest(X, y, n_trees=20, feature_fraction=0.5, seed=11).predict(query)
        assert np.array_equal(first, second)

    def test_prediction_is_mean_of_members(self, rng):
        X = rng.random((30, 4))
        y = rng.random(30)
        forest = fit_forest(X, y, n_trees=15, seed=5)
        query = rng.random((10, 4))
        members = forest.member_predictions(query)
        total = np.zeros(10)
        for row in members:
            total = total + row
        assert np.array_equal(forest.predict(query), total / 15)

    def test_importance_normalized(self, rng):
        X = rng.random((30, 4))
        y = X[:, 1] + 0.1 * rng.random(30)
        importance = fit_forest(X, y, n_trees=10, seed=1).feature_importance()
        assert importance.sum() == pytest.approx(1.0)
        assert np.argmax(importance) == 1


class TestSvr:
    def test_constant_target(self):
        X = np.array([[0.0], [1.0], [2.0]])
        model = fit_svr(X, [2.5, 2.5, 2.5], C=1.0, epsilon=0.1)
        assert np.all(model.w == 0.0)
        assert model.b == pytest.approx(2.5, abs=1e-12)
        assert model.gap == 0.0

    def test_line_inside_tube(self):
        X = np.arange(4, dtype=np.float64)[:, None]
        y = 2.0 * X[:, 0] + 1.0
        model = fit_svr(X, y, C=1.0, epsilon=0.5)
        residual = y - model.predict(X)
        assert np.all(np.abs(residual) <= 0.5 + 1e-6)
        assert model.w[0] == pytest.approx(5.0 / 3.0, rel=1e-6)

    def test_doubling_c_with_inactive_loss(self):
        X = np.arange(4, dtype=np.float64)[:, None]
        y = 2.0 * X[:, 0] + 1.0
        first = fit_svr(X, y, C=1.0, epsilon=0.5)
        second = fit_svr(X, y, C=2.0, epsilon=0.5)
        assert np.allclose(first.w, second.w, atol=1e-6)
        assert first.b == pytest.approx(second.b, abs=1e-6)

    def test_duality_gap_on_random_instances(self, rng):
        for _ in range(20):
            n = int(rng.integers(5, 51))
            p = int(rng.integers(1, 6))
            X = rng.standard_normal((n, p))
            y = X @ rng.standard_normal(p) + 0.3 * rng.standard_normal(n)
            solution = solve_svr_dual(X, y, C=1.0, epsilon=0.1)
            assert solution.gap < 1e-6 * (1.0 + abs(solution.primal))
            assert np.all(np.abs(solution.beta) <= 1.0 + 1e-12)
            assert abs(solution.beta.sum()) < 1e-9

    def test_matches_dense_qp_oracle(self, rng):
        for _ in range(5):
            n = int(rng.integers(3, 7))
            X = rng.standard_normal((n, 2))
            y = X @ np.array([1.5, -0.5]) + 0.5 * rng.standard_normal(n)
            model = fit_svr(X, y, C=1.0, epsilon=0.1)
            ours = svr_primal(X, y, model.w, model.b, 1.0, 0.1)
            assert ours == pytest.approx(svr_qp_oracle(X, y, 1.0, 0.1), abs=1e-5)

    def test_band_energy_scale_separate_layout(self, rng):
        X = rng.random((23, 52)) * 1e14
        y = rng.uniform(0.0, 3.0, 23)
        solution = solve_svr_dual(X, y, C=1.0, epsilon=0.1)
        assert solution.gap < 1e-6 * (1.0 + abs(solution.primal))
        assert insensitive_loss(y - X @ solution.w - solution.b, 0.1) < 1e-6

    def test_band_energy_scale_mixed_columns(self, rng):
        X = rng.random((23, 4)) * np.array([1e14, 1e28, 1.0, 10.0])
        y = 1e-14 * X[:, 0] + 0.2 * rng.standard_normal(23)
        model = fit_svr(X, y, C=1.0, epsilon=0.1)
        primal = svr_primal(X, y, model.w, model.b, 1.0, 0.1)
        assert np.all(np.isfinite(model.w))
        assert model.gap <= 1e-6 * (1.0 + primal)
        assert primal <= insensitive_loss(y - np.median(y), 0.1) + 1e-9

    def test_iteration_cap_reports_gap(self, rng):
        X = rng.standard_normal((10, 2))
        y = X @ np.array([1.0, -2.0]) + 0.3 * rng.standard_normal(10)
        with pytest.raises(SvrConvergenceError) as caught:
            fit_svr(X, y, C=1.0, epsilon=0.1, max_iter=1)
        assert caught.value.gap > 0.0

    def test_optimal_bias_midpoint(self):
        assert optimal_bias(np.array([0.0, 1.0, 2.0]), 0.0) == 1.0
        assert optimal_bias(np.array([0.0, 0.0]), 0.5) == 0.0


class TestGbr:
    def test_zero_stages_predicts_mean(self):
        model = fit_gbr([[0.0], [1.0]], [1.0, 3.0], n_stages=0)
        assert np.all(model.predict([[5.0], [-5.0]]) == 2.0)

    def test_one_full_stage_fits_exactly(self, rng):
        X = rng.random((20, 3))
        y = rng.random(20)
        model = fit_gbr(X, y, n_stages=1, learning_rate=1.0, max_depth=None)
        assert np.allclose(model.predict(X), y, atol=1e-12)

    def test_training_mse_non_increasing(self, rng):
        X = rng.random((40, 4))
        y = np.sin(4 * X[:, 0]) + X[:, 1] + 0.1 * rng.standard_normal(40)
        model = fit_gbr(X, y, n_stages=100)
        mse = [float(np.mean((y - stage) ** 2)) for stage in model.staged_predict(X)]
        assert len(mse) == 101
        assert all(later <= earlier * (1 + 1e-12) for earlier, later in zip(mse, mse[1:]))

    def test_importance_normalized(self, rng):
        X = rng.random((40, 4))
        y = X[:, 2] + 0.01 * rng.random(40)
        importance = fit_gbr(X, y, n_stages=10).feature_importance()
        assert importance.sum() == pytest.approx(1.0)
        assert np.argmax(importance) == 2


class TestRegistry:
    def test_importance_unsupported_for_linear(self):
        model = fit_linear([[0.0], [1.0]], [0.0, 1.0])
        with pytest.raises(UnsupportedOperationError):
            model.feature_importance()

    def test_unknown_hyperparameter(self):
        with pytest.raises(ConfigError, match="unknown hyperparameter"):
            make_spec(ModelKind.TREE, {"depth": 3})

    def test_out_of_range_hyperparameter(self):
        with pytest.raises(ConfigError, match="learning_rate"):
            make_spec(ModelKind.GBR, {"learning_rate": 1.5})

    def test_constant_target_models_predict_constant(self, rng):
        X = rng.random((8, 3))
        y = np.full(8, 1.25)
        for kind in (ModelKind.LINEAR, ModelKind.TREE, ModelKind.GBR, ModelKind.MEAN):
            model = fit_model(make_spec(kind), X, y)
            assert np.allclose(model.predict(rng.random((4, 3))), 1.25, atol=1e-12)

    def test_dimension_mismatch(self, rng):
        model = fit_mean(rng.random((4, 3)), rng.random(4))
        with pytest.raises(ModelInputError):
            model.predict(np.zeros((1, 2)))

    @pytest.mark.parametrize("kind", list(ModelKind))
    def test_persistence_is_bit_exact(self, tmp_path: Path, rng, kind):
        X = rng.random((15, 4)) * 4.0
        y = X[:, 0] * 2 + rng.random(15)
        params = {"n_trees": 5} if kind is ModelKind.FOREST else None
        model = fit_model(make_spec(kind, params, seed=9), X, y, ["a", "b", "c", "d"])
        path = save_model(model, tmp_path / f"{kind.value}.json")
        loaded = load_model(path)
        query = rng.random((100, 4)) * 4.0
        assert loaded.kind is kind
        assert loaded.feature_names == ("a", "b", "c", "d")
        assert np.array_equal(loaded.predict(query), model.predict(query))
