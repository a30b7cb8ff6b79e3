"""
Tests for k-means clustering and forecast accuracy analysis.
"""

import math
import unittest
from datetime import date, timedelta
from fractions import Fraction

import numpy as np
from hypothesis import given, settings, strategies as st

from basketlab.analysis import (
    AnalysisError,
    ClusterParams,
    accuracy_table,
    cluster_series,
    kmeans,
    prediction_accuracy,
    validity_horizon,
)
from basketlab.ingest import DailySeries, ItemCatalog

# Four best sellers over a five-day forecast window
PRODUCTS = ("fkue59", "fkue114", "fkue133", "fkue138")
PREDICTED = [
    [14, 12, 11, 16, 17],
    [8, 7, 8, 10, 11],
    [25, 22, 26, 29, 31],
    [14, 14, 16, 16, 22],
]
ACTUAL = [
    [14, 16, 16, 28, 33],
    [8, 4, 12, 9, 12],
    [26, 30, 22, 39, 64],
    [12, 17, 14, 32, 37],
]


def cell_accuracy(predicted, actual):
    low, high = min(predicted, actual), max(predicted, actual)
    return 100 if high == 0 else math.floor(Fraction(100 * low, high) + Fraction(1, 2))


@st.composite
def accuracy_grids(draw):
    n_products = draw(st.integers(1, 4))
    days = draw(st.integers(1, 6))
    row = st.lists(st.integers(0, 60), min_size=days, max_size=days)
    predicted = draw(st.lists(row, min_size=n_products, max_size=n_products))
    actual = draw(st.lists(row, min_size=n_products, max_size=n_products))
    return predicted, actual


def make_series(rows):
    days = tuple(date(2014, 1, 1) + timedelta(days=i) for i in range(len(rows[0])))
    return DailySeries(days, np.array(rows), ItemCatalog(tuple(f"p{j}" for j in range(len(rows)))))


class TestKMeans(unittest.TestCase):
    """Test suite for kmeans."""

    def test_recovers_planted_blobs(self):
        rng = np.random.default_rng(0)
        centres = [(0, 0), (100, 0), (0, 100), (100, 100)]
        points = np.vstack([rng.normal(centre, 1.0, size=(25, 2)) for centre in centres])

        result = kmeans(points, 4, seed=42, init="kmeans++", n_init=10)
        labels = np.array(result.assignments).reshape(4, 25)

        for blob in labels:
            self.assertEqual(len(set(blob.tolist())), 1)
        self.assertEqual(len(set(labels[:, 0].tolist())), 4)

    def test_inertia_never_increases(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            points = rng.normal(size=(int(rng.integers(5, 40)), 3))
            k = int(rng.integers(1, 5))
            history = kmeans(points, k, seed=int(rng.integers(1000)), init="random").inertia_history
            for before, after in zip(history, history[1:]):
                self.assertLessEqual(after, before + 1e-9)

    def test_assignments_are_nearest_centroids(self):
        rng = np.random.default_rng(21)
        for init in ("random", "kmeans++"):
            for _ in range(25):
                points = rng.integers(0, 8, size=(int(rng.integers(4, 30)), 2)).astype(float)
                k = int(rng.integers(1, 5))
                result = kmeans(points, k, seed=int(rng.integers(1000)), init=init)

                for point, assigned in zip(points, result.assignments):
                    distances = [float(((point - c) ** 2).sum()) for c in result.centroids]
                    nearest = min(distances)
                    self.assertEqual(assigned, distances.index(nearest))

    def test_default_is_single_random_run(self):
        points = np.random.default_rng(6).normal(size=(20, 2))
        self.assertEqual(
            kmeans(points, 3, seed=5).assignments,
            kmeans(points, 3, seed=5, init="random", n_init=1).assignments,
        )
        self.assertEqual(ClusterParams().init, "random")
        self.assertEqual(ClusterParams().n_init, 1)

    def test_one_cluster_per_distinct_point(self):
        points = [[0, 0], [0, 0], [1, 1], [5, 5]]
        result = kmeans(points, 3, seed=1)
        self.assertEqual(result.inertia, 0.0)
        self.assertEqual(result.assignments[0], result.assignments[1])

    def test_seed_is_deterministic(self):
        points = np.random.default_rng(4).normal(size=(30, 2))
        first = kmeans(points, 3, seed=9, n_init=3)
        second = kmeans(points, 3, seed=9, n_init=3)
        self.assertEqual(first.assignments, second.assignments)
        self.assertEqual(first.inertia, second.inertia)

    def test_invalid_arguments(self):
        with self.assertRaises(AnalysisError):
            kmeans([[0.0], [1.0]], 3)
        with self.assertRaises(AnalysisError):
            kmeans([[0.0], [1.0]], 0)
        with self.assertRaises(AnalysisError):
            kmeans([[0.0], [1.0]], 1, init="forgy")


class TestClusterSeries(unittest.TestCase):
    """Test suite for cluster_series."""

    def test_groups_by_volume(self):
        series = make_series([
            [10, 10, 10, 10, 10, 10],
            [11, 10, 11, 10, 11, 10],
            [0, 1, 0, 1, 0, 1],
            [1, 0, 1, 0, 1, 0],
        ])
        clusters = cluster_series(series, ClusterParams(k=2, seed=0))

        self.assertEqual(clusters.cluster_of("p0"), clusters.cluster_of("p1"))
        self.assertEqual(clusters.cluster_of("p2"), clusters.cluster_of("p3"))
        self.assertNotEqual(clusters.cluster_of("p0"), clusters.cluster_of("p2"))
        self.assertEqual(clusters.volume_order()[0], clusters.cluster_of("p0"))
        self.assertEqual(clusters.profiles.shape, (2, 6))

    def test_normalized_groups_by_shape(self):
        series = make_series([
            [1, 5, 1, 5],
            [10, 50, 10, 50],
            [5, 1, 5, 1],
            [50, 10, 50, 10],
        ])
        clusters = cluster_series(series, ClusterParams(k=2, seed=0, normalize=True))

        self.assertEqual(clusters.cluster_of("p0"), clusters.cluster_of("p1"))
        self.assertEqual(clusters.cluster_of("p2"), clusters.cluster_of("p3"))
        # Profiles stay in raw units
        self.assertEqual(clusters.profiles[clusters.cluster_of("p0")].tolist(), [5.5, 27.5, 5.5, 27.5])


class TestPredictionAccuracy(unittest.TestCase):
    """Test suite for prediction_accuracy."""

    def test_values(self):
        self.assertEqual(prediction_accuracy(0, 0), 100)
        self.assertEqual(prediction_accuracy(14, 16), 88)
        self.assertEqual(prediction_accuracy(0, 5), 0)
        self.assertEqual(prediction_accuracy(16, 14), prediction_accuracy(14, 16))

    def test_negative_counts(self):
        with self.assertRaises(AnalysisError):
            prediction_accuracy(-1, 3)

    @settings(derandomize=True, deadline=None, max_examples=1000)
    @given(st.integers(0, 500), st.integers(0, 500))
    def test_bounded_and_symmetric(self, predicted, actual):
        value = prediction_accuracy(predicted, actual)
        self.assertEqual(value, prediction_accuracy(actual, predicted))
        self.assertTrue(0 <= value <= 100)
        if predicted == actual:
            self.assertEqual(value, 100)


class TestValidityHorizon(unittest.TestCase):
    """Test suite for validity_horizon."""

    def test_stops_at_first_miss(self):
        self.assertEqual(validity_horizon([96, 72, 77, 68, 63]), 3)
        self.assertEqual(validity_horizon([60, 90, 90]), 0)
        self.assertEqual(validity_horizon([70, 70]), 2)

    def test_empty(self):
        with self.assertRaises(AnalysisError):
            validity_horizon([])

    @settings(derandomize=True, deadline=None, max_examples=1000)
    @given(st.lists(st.integers(0, 100), min_size=1, max_size=10), st.integers(0, 100), st.integers(0, 100))
    def test_prefix_and_monotone(self, values, a, b):
        low, high = sorted((a, b))
        horizon = validity_horizon(values, low)

        self.assertLessEqual(validity_horizon(values, high), horizon)
        self.assertTrue(all(v >= low for v in values[:horizon]))
        if horizon < len(values):
            self.assertLess(values[horizon], low)


class TestAccuracyTable(unittest.TestCase):
    """Test suite for accuracy_table."""

    def test_reference_grid(self):
        report = accuracy_table(PRODUCTS, PREDICTED, ACTUAL, threshold_pct=70)

        self.assertEqual(report.accuracy_pct, (
            (100, 75, 69, 57, 52),
            (100, 57, 67, 90, 92),
            (96, 73, 85, 74, 48),
            (86, 82, 88, 50, 59),
        ))
        self.assertEqual(report.average_row.predicted, (15.3, 13.8, 15.3, 17.8, 20.3))
        self.assertEqual(report.average_row.actual, (15.0, 16.8, 16.0, 27.0, 36.5))
        self.assertEqual(report.average_row.accuracy_pct, (96, 72, 77, 68, 63))
        self.assertEqual(report.validity_horizon, 3)
        self.assertEqual(report.days, 5)
        self.assertIn("3 day(s)", report.note)

    def test_gap_after_horizon_is_noted(self):
        with self.assertLogs("basketlab", level="WARNING"):
            report = accuracy_table(["a"], [[5, 1, 5]], [[5, 5, 5]])
        self.assertEqual(report.validity_horizon, 1)
        self.assertIn("2 of 3 day(s)", report.note)

    @settings(derandomize=True, deadline=None, max_examples=300)
    @given(accuracy_grids())
    def test_cells_match_direct_min_max(self, grids):
        predicted, actual = grids
        products = [f"p{i}" for i in range(len(predicted))]
        report = accuracy_table(products, predicted, actual)

        expected = tuple(
            tuple(cell_accuracy(p, r) for p, r in zip(p_row, r_row))
            for p_row, r_row in zip(predicted, actual)
        )
        self.assertEqual(report.accuracy_pct, expected)
        for day in range(len(predicted[0])):
            column = [row[day] for row in expected]
            mean = Fraction(sum(column), len(column))
            self.assertEqual(report.average_row.accuracy_pct[day], math.floor(mean + Fraction(1, 2)))

    def test_shape_mismatch(self):
        with self.assertRaises(AnalysisError):
            accuracy_table(["a"], [[1, 2]], [[1]])
        with self.assertRaises(AnalysisError):
            accuracy_table(["a", "b"], [[1]], [[1]])
        with self.assertRaises(AnalysisError):
            accuracy_table([], [], [])


if __name__ == "__main__":
    unittest.main()
