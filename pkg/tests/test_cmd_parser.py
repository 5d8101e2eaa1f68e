from __future__ import annotations

import pytest

from polishsense.cmd_parser import parse_model_list, parse_modes, parse_param_assignments
from polishsense.errors import ConfigError
from polishsense.features import FeatureMode
from polishsense.limits import check_hyperparameter_limits, parse_number
from polishsense.models import TABLE_ORDER, ModelKind


class TestParseModelList:
    def test_all_expands_in_table_order(self):
        assert parse_model_list("all") == list(TABLE_ORDER)

    def test_duplicates_collapse(self):
        assert parse_model_list("tree, TREE,gbr") == [ModelKind.TREE, ModelKind.GBR]

    def test_extra_kinds(self):
        assert parse_model_list("all,committee")[-1] is ModelKind.COMMITTEE

    def test_unknown_kind_lists_valid_ones(self):
        with pytest.raises(ConfigError, match="valid kinds: linear"):
            parse_model_list("tree,knn")

    def test_empty(self):
        with pytest.raises(ConfigError):
            parse_model_list(" , ")


class TestParseModes:
    def test_both(self):
        assert parse_modes("both") == [FeatureMode.TOGETHER, FeatureMode.SEPARATE]

    def test_single(self):
        assert parse_modes("Separate") == [FeatureMode.SEPARATE]

    def test_unknown(self):
        with pytest.raises(ConfigError):
            parse_modes("pooled")


class TestParseParamAssignments:
    def test_numbers_and_flags(self):
        overrides = parse_param_assignments(
            ["forest.n_trees=50", "forest.bootstrap=false", "svr.C=0.5", "tree.max_depth=none"]
        )
        assert overrides[ModelKind.FOREST] == {"n_trees": 50, "bootstrap": False}
        assert overrides[ModelKind.SVR] == {"C": 0.5}
        assert overrides[ModelKind.TREE] == {"max_depth": None}

    def test_only_depth_may_be_unbounded(self):
        with pytest.raises(ConfigError, match="max_depth"):
            parse_param_assignments(["gbr.n_stages=inf"])

    @pytest.mark.parametrize("item", ["n_trees=5", "forest.=5", "forest.n_trees", "knn.k=3"])
    def test_malformed(self, item):
        with pytest.raises(ConfigError):
            parse_param_assignments([item])

    @pytest.mark.parametrize("item", ["tree.min_samples_leaf=true", "forest.n_trees=off", "svr.C=yes"])
    def test_flag_tokens_only_for_bootstrap(self, item):
        with pytest.raises(ConfigError, match="takes a number"):
            parse_param_assignments([item])

    def test_bootstrap_needs_a_flag(self):
        with pytest.raises(ConfigError, match="true or false"):
            parse_param_assignments(["forest.bootstrap=1"])

    def test_non_numeric_value(self):
        with pytest.raises(ConfigError, match="not a number"):
            parse_param_assignments(["ridge.alpha=lots"])


class TestLimits:
    def test_parse_number(self):
        assert parse_number("12") == 12
        assert parse_number("1_000") == 1000
        assert parse_number("2.5e-3") == 0.0025
        assert parse_number("nan") is None
        assert parse_number("inf") is None
        assert parse_number("abc") is None

    def test_valid_parameters(self):
        assert check_hyperparameter_limits("forest", {"n_trees": 10, "feature_fraction": 0.5}) is None
        assert check_hyperparameter_limits("tree", {"max_depth": None, "bootstrap": True}) is None

    @pytest.mark.parametrize(
        "params",
        [
            {"alpha": -0.1},
            {"length_scale": 0.0},
            {"feature_fraction": 0.0},
            {"learning_rate": 1.01},
            {"n_trees": 0},
            {"min_samples_leaf": 1.5},
            {"C": float("nan")},
            {"epsilon": "wide"},
        ],
    )
    def test_out_of_range(self, params):
        message = check_hyperparameter_limits("model", params)
        assert message is not None
        assert next(iter(params)) in message
