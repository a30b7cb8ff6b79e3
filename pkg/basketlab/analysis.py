"""
Clustering and forecast-accuracy analysis for BasketLab.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .ingest import DailySeries
from .utils import round_half_up

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD_PCT = 70
INIT_METHODS = ("random", "kmeans++")

Number = Union[int, float]


class AnalysisError(Exception):
    """Exception raised for clustering and accuracy errors."""
    pass


@dataclass(frozen=True, eq=False)
class ClusterResult:
    """Outcome of a k-means run."""

    k: int
    assignments: Tuple[int, ...]
    centroids: np.ndarray
    inertia: float
    iterations: int
    inertia_history: Tuple[float, ...] = ()

    def members(self, cluster: int) -> List[int]:
        return [i for i, c in enumerate(self.assignments) if c == cluster]


@dataclass(frozen=True)
class ClusterParams:
    """K-means settings used for product clustering."""

    k: int = 4
    seed: int = 42
    max_iter: int = 300
    tol: float = 1e-6
    normalize: bool = False
    n_init: int = 1
    init: str = "random"


def _squared_distances(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centroids[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _init_random(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Pick k data points at random, preferring points with distinct coordinates."""
    chosen: List[int] = []
    seen = set()
    order = rng.permutation(len(points))
    for index in order:
        key = points[index].tobytes()
        if key not in seen:
            seen.add(key)
            chosen.append(int(index))
        if len(chosen) == k:
            break
    for index in order:
        if len(chosen) == k:
            break
        if int(index) not in chosen:
            chosen.append(int(index))
    return points[chosen].copy()


def _init_kmeans_plus_plus(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Spread initial centroids by sampling points proportionally to squared distance."""
    n = len(points)
    chosen = [int(rng.integers(n))]
    closest = _squared_distances(points, points[chosen]).min(axis=1)
    while len(chosen) < k:
        total = closest.sum()
        if total > 0:
            index = int(rng.choice(n, p=closest / total))
        else:
            remaining = [i for i in range(n) if i not in chosen]
            index = int(rng.choice(remaining))
        chosen.append(index)
        closest = np.minimum(closest, _squared_distances(points, points[[index]])[:, 0])
    return points[chosen].copy()


def _lloyd(
    points: np.ndarray,
    centroids: np.ndarray,
    max_iter: int,
    tol: float,
) -> Tuple[np.ndarray, np.ndarray, float, int, List[float]]:
    k = len(centroids)
    labels = None
    history: List[float] = []
    iterations = 0

    for iterations in range(1, max_iter + 1):
        distances = _squared_distances(points, centroids)
        new_labels = distances.argmin(axis=1)

        # Reseed empty clusters on the point farthest from its own centroid
        for cluster in range(k):
            if not (new_labels == cluster).any():
                own = distances[np.arange(len(points)), new_labels]
                farthest = int(own.argmax())
                centroids[cluster] = points[farthest]
                distances = _squared_distances(points, centroids)
                new_labels = distances.argmin(axis=1)

        history.append(float(distances[np.arange(len(points)), new_labels].sum()))
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels

        updated = np.array([
            points[labels == cluster].mean(axis=0) if (labels == cluster).any() else centroids[cluster]
            for cluster in range(k)
        ])
        shift = float(np.sqrt(((updated - centroids) ** 2).sum(axis=1)).max())
        centroids = updated
        if shift < tol:
            break

    distances = _squared_distances(points, centroids)
    labels = distances.argmin(axis=1)
    inertia = float(distances[np.arange(len(points)), labels].sum())
    return labels, centroids, inertia, iterations, history


def kmeans(
    vectors: Sequence[Sequence[float]],
    k: int,
    seed: int = 0,
    max_iter: int = 300,
    tol: float = 1e-6,
    init: str = "random",
    n_init: int = 1,
) -> ClusterResult:
    """
    Cluster vectors with Lloyd's algorithm.

    Args:
        vectors: Equal-length real vectors
        k: Number of clusters
        seed: Seed for the initialisation draws
        max_iter: Iteration cap per run
        tol: Stop once no centroid moves further than this
        init: "random" distinct-point seeding, or "kmeans++"
        n_init: Seeded restarts; the lowest-inertia run is kept

    Returns:
        ClusterResult; each point is assigned to its nearest centroid, ties to the lowest id
    """
    points = np.asarray(vectors, dtype=float)
    if points.ndim != 2:
        raise AnalysisError("Vectors must all have the same length")
    if k < 1:
        raise AnalysisError(f"k must be at least 1, got {k}")
    if k > len(points):
        raise AnalysisError(f"k={k} exceeds the number of vectors ({len(points)})")
    if init not in INIT_METHODS:
        raise AnalysisError(f"Unknown initialisation '{init}'; choose from {', '.join(INIT_METHODS)}")
    if max_iter < 1 or n_init < 1:
        raise AnalysisError("max_iter and n_init must be at least 1")

    rng = np.random.default_rng(seed)
    initialise = _init_random if init == "random" else _init_kmeans_plus_plus

    best = None
    for _ in range(n_init):
        centroids = initialise(points, k, rng)
        run = _lloyd(points, centroids, max_iter, tol)
        if best is None or run[2] < best[2]:
            best = run

    labels, centroids, inertia, iterations, history = best
    logger.debug("k-means converged after %d iterations, inertia %.4f", iterations, inertia)
    return ClusterResult(
        k=k,
        assignments=tuple(int(c) for c in labels),
        centroids=centroids,
        inertia=inertia,
        iterations=iterations,
        inertia_history=tuple(history),
    )


@dataclass(frozen=True, eq=False)
class SeriesClusters:
    """Clustered products with one mean daily profile per cluster."""

    series: DailySeries
    result: ClusterResult
    profiles: np.ndarray  # shape (k, days), raw daily means per cluster

    def cluster_of(self, code: str) -> int:
        return self.result.assignments[self.series.catalog.position(code)]

    def volume_order(self) -> List[int]:
        """Cluster ids ordered by mean daily volume, highest first."""
        volumes = self.profiles.mean(axis=1)
        return sorted(range(self.result.k), key=lambda c: (-float(volumes[c]), c))


def _znormalize(vectors: np.ndarray) -> np.ndarray:
    means = vectors.mean(axis=1, keepdims=True)
    stds = vectors.std(axis=1, keepdims=True)
    return np.divide(vectors - means, stds, out=np.zeros_like(vectors), where=stds > 0)


def cluster_series(series: DailySeries, params: Optional[ClusterParams] = None) -> SeriesClusters:
    """Cluster products by their daily sales vectors."""
    params = params or ClusterParams()
    raw = series.totals.astype(float)
    vectors = _znormalize(raw) if params.normalize else raw
    result = kmeans(
        vectors, params.k, params.seed, params.max_iter, params.tol, params.init, params.n_init
    )
    labels = np.array(result.assignments)
    profiles = np.array([
        raw[labels == c].mean(axis=0) if (labels == c).any() else np.zeros(raw.shape[1])
        for c in range(result.k)
    ])
    logger.info("Clustered %d products into %d groups", len(raw), result.k)
    return SeriesClusters(series, result, profiles)


def prediction_accuracy(predicted: Number, actual: Number) -> int:
    """
    Percentage agreement between a predicted and an actual count.

    Computed as min / max, as a rounded (half up) percentage. Two zeros
    agree perfectly.
    """
    if predicted < 0 or actual < 0:
        raise AnalysisError(f"Counts must be non-negative, got ({predicted}, {actual})")
    low, high = sorted((Fraction(predicted), Fraction(actual)))
    if high == 0:
        return 100
    return round_half_up(100 * low / high)


def validity_horizon(avg_accuracy_pct: Sequence[int], threshold_pct: int = DEFAULT_THRESHOLD_PCT) -> int:
    """Number of leading days whose average accuracy meets the threshold."""
    if len(avg_accuracy_pct) == 0:
        raise AnalysisError("Accuracy vector is empty")
    horizon = 0
    for value in avg_accuracy_pct:
        if value < threshold_pct:
            break
        horizon += 1
    return horizon


@dataclass(frozen=True)
class AverageRow:
    """Per-day averages across products."""

    predicted: Tuple[float, ...]
    actual: Tuple[float, ...]
    accuracy_pct: Tuple[int, ...]


@dataclass(frozen=True)
class AccuracyReport:
    """Predicted vs actual grid with accuracies, averages and validity horizon."""

    products: Tuple[str, ...]
    predicted: Tuple[Tuple[int, ...], ...]
    actual: Tuple[Tuple[int, ...], ...]
    accuracy_pct: Tuple[Tuple[int, ...], ...]
    average_row: AverageRow
    validity_horizon: int
    threshold_pct: int = DEFAULT_THRESHOLD_PCT
    note: str = field(default="", compare=False)

    @property
    def days(self) -> int:
        return len(self.average_row.accuracy_pct)


def _mean(values: Sequence[Number]) -> Fraction:
    return sum((Fraction(v) for v in values), Fraction(0)) / len(values)


def accuracy_table(
    products: Sequence[str],
    predicted: Sequence[Sequence[Number]],
    actual: Sequence[Sequence[Number]],
    threshold_pct: int = DEFAULT_THRESHOLD_PCT,
) -> AccuracyReport:
    """
    Build the product-by-day accuracy grid with its average row.

    Average predicted and actual counts are rounded half up to one decimal;
    the average accuracy is the mean of the already-rounded percentages,
    rounded half up.
    """
    products = tuple(products)
    if not products:
        raise AnalysisError("Accuracy table needs at least one product")
    if len(predicted) != len(products) or len(actual) != len(products):
        raise AnalysisError("Predicted and actual grids must have one row per product")
    days = len(predicted[0])
    if days == 0:
        raise AnalysisError("Accuracy table needs at least one day")
    if any(len(row) != days for row in predicted) or any(len(row) != days for row in actual):
        raise AnalysisError("Predicted and actual grids must have the same shape")

    accuracy = tuple(
        tuple(prediction_accuracy(p, r) for p, r in zip(p_row, r_row))
        for p_row, r_row in zip(predicted, actual)
    )
    columns = range(days)
    average = AverageRow(
        predicted=tuple(round_half_up(_mean([row[d] for row in predicted]), 1) for d in columns),
        actual=tuple(round_half_up(_mean([row[d] for row in actual]), 1) for d in columns),
        accuracy_pct=tuple(round_half_up(_mean([row[d] for row in accuracy])) for d in columns),
    )
    horizon = validity_horizon(average.accuracy_pct, threshold_pct)
    meeting = sum(1 for value in average.accuracy_pct if value >= threshold_pct)
    note = (
        f"Validity horizon counts leading days with average accuracy >= {threshold_pct}%: "
        f"{horizon} day(s). {meeting} of {days} day(s) meet the threshold overall."
    )
    if meeting != horizon:
        logger.warning(note)

    return AccuracyReport(
        products=products,
        predicted=tuple(tuple(row) for row in predicted),
        actual=tuple(tuple(row) for row in actual),
        accuracy_pct=accuracy,
        average_row=average,
        validity_horizon=horizon,
        threshold_pct=threshold_pct,
        note=note,
    )

