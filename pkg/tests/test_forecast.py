"""
Tests for model-tree growth, pruning, smoothing and forecasting.
"""

import math
import unittest
from datetime import date, timedelta

import numpy as np
from hypothesis import given, settings, strategies as st

from basketlab.forecast import (
    SMALL_SAMPLE_PENALTY,
    ForecastError,
    ForecastParams,
    InstanceTable,
    LinearModel,
    ModelTree,
    Node,
    TreeParams,
    adjusted_error,
    backtest,
    best_split,
    build_instances,
    fit_linear_model,
    fit_model_tree,
    forecast_horizon,
    grow_tree,
    predict,
    prune_tree,
    rmse,
    to_count,
    train_and_forecast,
)
from basketlab.ingest import DailySeries, ItemCatalog

START = date(2014, 1, 6)  # a Monday
# One week of sales, Monday first
WEEK = [10, 12, 14, 16, 18, 30, 40]


def make_series(*rows):
    days = tuple(START + timedelta(days=i) for i in range(len(rows[0])))
    return DailySeries(days, np.array(rows), ItemCatalog(tuple(f"item{j}" for j in range(len(rows)))))


def one_feature(xs, ys):
    return InstanceTable(np.asarray(xs, dtype=float).reshape(-1, 1), np.asarray(ys, dtype=float), ("x",))


def tree_error(node, features, targets, rows):
    """Adjusted training error of a subtree: leaf errors weighted by instance counts."""
    own = adjusted_error(node.model, features[rows], targets[rows])
    if node.is_leaf:
        return own
    goes_left = features[rows, node.split_feature] <= node.threshold
    left, right = rows[goes_left], rows[~goes_left]
    return (
        len(left) * tree_error(node.left, features, targets, left)
        + len(right) * tree_error(node.right, features, targets, right)
    ) / len(rows)


def rollover(tree, values, lag_window, horizon, smoothing=True):
    """Step-by-step forecast: predict a day, round it, then use it as the newest lag."""
    history = [float(v) for v in values]
    counts = []
    for step in range(horizon):
        t = len(values) + step
        weekday = (START + timedelta(days=t)).weekday()
        row = [float(t), float(weekday)] + [history[t - lag] for lag in range(1, lag_window + 1)]
        count = math.floor(max(predict(tree, row, smoothing), 0.0) + 0.5)
        counts.append(count)
        history.append(float(count))
    return counts


def brute_force_sdr(features, targets):
    """Best SDR over every feature and midpoint threshold, using np.std directly."""
    best = -np.inf
    for feature in range(features.shape[1]):
        values = np.unique(features[:, feature])
        for low, high in zip(values[:-1], values[1:]):
            threshold = (low + high) / 2.0
            left = targets[features[:, feature] <= threshold]
            right = targets[features[:, feature] > threshold]
            sdr = targets.std() - len(left) / len(targets) * left.std() - len(right) / len(targets) * right.std()
            best = max(best, sdr)
    return best


class TestInstances(unittest.TestCase):
    """Test suite for build_instances and InstanceTable."""

    def test_lagged_rows(self):
        series = make_series(list(range(10)))
        instances = build_instances(series, 0, 2)

        self.assertEqual(instances.feature_names, ("day", "weekday", "lag_1", "lag_2"))
        self.assertEqual(len(instances), 8)
        # Day 2 is a Wednesday
        self.assertEqual(instances.features[0].tolist(), [2.0, 2.0, 1.0, 0.0])
        self.assertEqual(instances.targets.tolist(), [float(v) for v in range(2, 10)])

    def test_too_short(self):
        with self.assertRaises(ForecastError):
            build_instances(make_series([1, 2, 3]), 0, 3)

    def test_non_finite_rejected(self):
        with self.assertRaises(ForecastError):
            one_feature([0.0, np.nan], [1.0, 2.0])


class TestLinearModels(unittest.TestCase):
    """Test suite for adjusted_error and fit_linear_model."""

    def test_adjusted_error(self):
        features = np.zeros((4, 1))
        targets = np.array([1.0, -1.0, 1.0, -1.0])
        self.assertAlmostEqual(adjusted_error(LinearModel(0.0), features, targets), 5 / 3)

    def test_small_sample_penalty(self):
        error = adjusted_error(LinearModel(0.0), np.zeros((1, 1)), np.array([2.0]))
        self.assertEqual(error, 2.0 * SMALL_SAMPLE_PENALTY)

    def test_uninformative_term_dropped(self):
        rng = np.random.default_rng(11)
        features = rng.uniform(0, 10, size=(50, 2))
        targets = 2.0 * features[:, 0] + 1.0 + rng.normal(0, 0.05, size=50)

        model = fit_linear_model(features, targets, [0, 1])
        self.assertEqual(model.features, (0,))
        self.assertAlmostEqual(dict(model.terms)[0], 2.0, delta=0.1)


class TestBestSplit(unittest.TestCase):
    """Test suite for best_split."""

    def test_step_threshold(self):
        xs = np.arange(40, dtype=float).reshape(-1, 1)
        ys = np.where(xs[:, 0] < 10, 0.0, 100.0)
        feature, threshold, sdr = best_split(xs, ys)
        self.assertEqual((feature, threshold), (0, 9.5))
        self.assertAlmostEqual(sdr, ys.std())

    def test_no_threshold_on_constant_feature(self):
        self.assertIsNone(best_split(np.ones((5, 1)), np.arange(5, dtype=float)))

    def test_matches_exhaustive_scan(self):
        rng = np.random.default_rng(5)
        for _ in range(25):
            features = rng.integers(0, 6, size=(30, 3)).astype(float)
            targets = rng.integers(0, 20, size=30).astype(float)
            found = best_split(features, targets)
            self.assertTrue(np.isclose(found[2], brute_force_sdr(features, targets), atol=1e-7))


class TestModelTree(unittest.TestCase):
    """Test suite for growing, pruning and predicting."""

    def test_constant_target_is_a_leaf(self):
        instances = one_feature(range(20), [3.0] * 20)
        tree = fit_model_tree(instances)
        self.assertEqual(tree.node_count(), 1)
        self.assertEqual(rmse(tree, instances), 0.0)

    def test_linear_target_prunes_to_one_leaf(self):
        instances = one_feature(range(40), [2.0 * x for x in range(40)])
        self.assertGreater(grow_tree(instances).node_count(), 1)

        tree = fit_model_tree(instances)
        self.assertEqual(tree.node_count(), 1)
        self.assertLessEqual(rmse(tree, instances), 1e-6)

    def test_step_split_survives_pruning(self):
        xs = list(range(40))
        instances = one_feature(xs, [0.0 if x < 10 else 100.0 for x in xs])
        tree = fit_model_tree(instances)

        self.assertEqual(tree.node_count(), 3)
        self.assertEqual(tree.root.split_feature, 0)
        self.assertEqual(tree.root.threshold, 9.5)
        self.assertEqual(predict(tree, [5.0], smoothing=False), 0.0)
        self.assertEqual(predict(tree, [20.0], smoothing=False), 100.0)

    def test_noise_is_pruned_away(self):
        xs = list(range(200))
        instances = one_feature(xs, [3.0 * x + (0.5 if x % 2 == 0 else -0.5) for x in xs])
        self.assertEqual(fit_model_tree(instances).node_count(), 1)

    def test_smoothing_towards_parent(self):
        root = Node(
            LinearModel(4.0), 40, split_feature=0, threshold=0.5,
            left=Node(LinearModel(10.0), 20), right=Node(LinearModel(0.0), 20),
        )
        tree = ModelTree(root, TreeParams(smoothing_k=15.0), ("x",))

        self.assertAlmostEqual(predict(tree, [0.0]), 260 / 35, delta=1e-9)
        self.assertEqual(predict(tree, [0.0], smoothing=False), 10.0)

    def test_wrong_feature_count(self):
        tree = ModelTree(Node(LinearModel(1.0), 5), TreeParams(), ("x", "y"))
        with self.assertRaises(ForecastError):
            predict(tree, [1.0])

    def test_invalid_params(self):
        with self.assertRaises(ForecastError):
            grow_tree(one_feature([1, 2], [1, 2]), TreeParams(smoothing_k=-1.0))

    @settings(derandomize=True, deadline=None, max_examples=1000)
    @given(st.lists(st.floats(-50, 250, allow_nan=False), min_size=2, max_size=2))
    def test_zero_smoothing_matches_unsmoothed(self, x):
        tree = self.two_regime_tree()
        unsmoothed = ModelTree(tree.root, TreeParams(smoothing_k=0.0), tree.feature_names)
        self.assertTrue(np.isclose(predict(unsmoothed, x), predict(tree, x, smoothing=False)))

    def test_pruning_never_worsens_the_tree(self):
        rng = np.random.default_rng(17)
        for _ in range(30):
            features = rng.integers(0, 10, size=(60, 3)).astype(float)
            targets = np.where(features[:, 0] < 5, 3.0 * features[:, 1], 40.0 - features[:, 2])
            targets = targets + rng.normal(0, 2.0, size=60)
            instances = InstanceTable(features, targets, ("a", "b", "c"))

            grown = grow_tree(instances)
            pruned = prune_tree(grown, instances)
            rows = np.arange(len(instances))
            self.assertLessEqual(pruned.node_count(), grown.node_count())
            grown_error = tree_error(grown.root, features, targets, rows)
            self.assertLessEqual(
                tree_error(pruned.root, features, targets, rows),
                grown_error + 1e-6 * max(1.0, grown_error),
            )

    _two_regime = None

    @classmethod
    def two_regime_tree(cls):
        if cls._two_regime is None:
            rng = np.random.default_rng(2)
            features = rng.uniform(0, 200, size=(120, 2))
            targets = np.where(features[:, 0] < 80, features[:, 1], 300.0 - features[:, 1])
            cls._two_regime = fit_model_tree(InstanceTable(features, targets, ("a", "b")))
        return cls._two_regime


class TestForecasting(unittest.TestCase):
    """Test suite for count conversion, horizons and backtests."""

    def test_to_count(self):
        self.assertEqual(to_count(-3.2), 0)
        self.assertEqual(to_count(2.5), 3)
        self.assertEqual(to_count(2.49), 2)

    def test_constant_series_forecasts_constant(self):
        series = make_series([4] * 30)
        tree, counts = train_and_forecast(series, 0, ForecastParams())
        self.assertEqual(tree.node_count(), 1)
        self.assertEqual(counts, [4, 4, 4, 4, 4])

    def test_trending_series(self):
        series = make_series([5 + d for d in range(40)])
        tree, counts = train_and_forecast(series, 0, ForecastParams())

        self.assertTrue(tree.root.model.terms)
        self.assertIsInstance(predict(tree, [40.0, 5.0] + [44.0 - j for j in range(7)]), float)
        self.assertEqual(counts, [45, 46, 47, 48, 49])

    def test_trending_backtest(self):
        series = make_series([5 + d for d in range(40)])
        predicted, actual = backtest(series, 0, ForecastParams())
        self.assertEqual(actual, [40, 41, 42, 43, 44])
        self.assertEqual(predicted, actual)

    def test_weekly_series_matches_step_by_step_rollover(self):
        values = [WEEK[d % 7] + d // 14 for d in range(60)]
        series = make_series(values)
        params = ForecastParams(lag_window=7, horizon=5)
        tree, counts = train_and_forecast(series, 0, params)

        self.assertEqual(counts, rollover(tree, values, 7, 5))
        unsmoothed = ForecastParams(lag_window=7, horizon=5, smoothing=False)
        self.assertEqual(
            forecast_horizon(tree, series, 0, unsmoothed), rollover(tree, values, 7, 5, smoothing=False)
        )
        self.assertTrue(all(isinstance(c, int) for c in counts))

    def test_horizon_length(self):
        series = make_series([4] * 30)
        tree, _ = train_and_forecast(series, 0, ForecastParams())
        self.assertEqual(len(forecast_horizon(tree, series, 0, ForecastParams(horizon=9))), 9)

    def test_backtest_holds_back_last_days(self):
        weekly = [10, 2, 2, 2, 2, 2, 20] * 12
        series = make_series(weekly, [1] * len(weekly))
        predicted, actual = backtest(series, 0, ForecastParams())

        self.assertEqual(actual, weekly[-5:])
        self.assertEqual(len(predicted), 5)
        self.assertTrue(all(isinstance(p, int) and p >= 0 for p in predicted))

    def test_backtest_needs_history(self):
        with self.assertRaises(ForecastError):
            backtest(make_series(list(range(10))), 0, ForecastParams())

    def test_invalid_params(self):
        with self.assertRaises(ForecastError):
            ForecastParams(horizon=0).validate()


if __name__ == "__main__":
    unittest.main()
