"""
M5P model-tree forecasting for BasketLab.

Trees are grown by standard deviation reduction, carry a linear model at
every node, are pruned bottom-up on complexity-adjusted error, and smooth
leaf predictions towards their ancestors' models.
"""

import logging
import math
from dataclasses import dataclass, field
from datetime import timedelta
from typing import List, Optional, Sequence, Set, Tuple

import numpy as np

from .ingest import DailySeries
from .utils import round_half_up

logger = logging.getLogger(__name__)

# Stand-in for (n + v) / (n - v) when a node has no more instances than parameters
SMALL_SAMPLE_PENALTY = 1e6
MIN_SPLIT_INSTANCES = 4
# Absorbs least-squares round-off when comparing near-zero errors
PRUNE_TOLERANCE = 1e-9


class ForecastError(Exception):
    """Exception raised for model-tree and forecasting errors."""
    pass


@dataclass(frozen=True, eq=False)
class InstanceTable:
    """Feature vectors with a numeric target."""

    features: np.ndarray  # shape (rows, features)
    targets: np.ndarray   # shape (rows,)
    feature_names: Tuple[str, ...]

    def __post_init__(self):
        features = np.asarray(self.features, dtype=float)
        targets = np.asarray(self.targets, dtype=float)
        if features.ndim != 2 or features.shape[0] != targets.shape[0]:
            raise ForecastError("Feature matrix and target vector disagree in row count")
        if features.shape[1] != len(self.feature_names):
            raise ForecastError("Feature names do not match the feature columns")
        if not (np.isfinite(features).all() and np.isfinite(targets).all()):
            raise ForecastError("Instances must not contain missing or non-finite values")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))

    def __len__(self) -> int:
        return len(self.targets)


@dataclass(frozen=True)
class LinearModel:
    """Intercept plus sparse coefficient terms."""

    intercept: float
    terms: Tuple[Tuple[int, float], ...] = ()

    @property
    def n_params(self) -> int:
        return 1 + len(self.terms)

    @property
    def features(self) -> Tuple[int, ...]:
        return tuple(index for index, _ in self.terms)

    def predict(self, x: Sequence[float]) -> float:
        return float(self.intercept + sum(coef * x[index] for index, coef in self.terms))

    def predict_many(self, features: np.ndarray) -> np.ndarray:
        values = np.full(features.shape[0], self.intercept, dtype=float)
        for index, coef in self.terms:
            values += coef * features[:, index]
        return values


@dataclass
class Node:
    """Tree node; a leaf when it has no split."""

    model: LinearModel
    n: int
    split_feature: Optional[int] = None
    threshold: Optional[float] = None
    left: Optional["Node"] = None
    right: Optional["Node"] = None

    @property
    def is_leaf(self) -> bool:
        return self.split_feature is None

    def count(self) -> int:
        if self.is_leaf:
            return 1
        return 1 + self.left.count() + self.right.count()


@dataclass(frozen=True)
class TreeParams:
    """Growth, pruning and smoothing constants."""

    smoothing_k: float = 15.0
    min_leaf: int = MIN_SPLIT_INSTANCES
    sd_stop_fraction: float = 0.05

    def validate(self) -> None:
        if self.smoothing_k < 0:
            raise ForecastError(f"smoothing_k must be non-negative, got {self.smoothing_k}")
        if self.min_leaf < 1:
            raise ForecastError(f"min_leaf must be at least 1, got {self.min_leaf}")
        if not 0.0 < self.sd_stop_fraction < 1.0:
            raise ForecastError(f"sd_stop_fraction must be within (0, 1), got {self.sd_stop_fraction}")


@dataclass
class ModelTree:
    """A grown (and possibly pruned) M5P model tree."""

    root: Node
    params: TreeParams = field(default_factory=TreeParams)
    feature_names: Tuple[str, ...] = ()

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def node_count(self) -> int:
        return self.root.count()


@dataclass(frozen=True)
class ForecastParams:
    """Lag window, forecast horizon and smoothing switch."""

    lag_window: int = 7
    horizon: int = 5
    smoothing: bool = True

    def validate(self) -> None:
        if self.lag_window < 1:
            raise ForecastError(f"lag_window must be at least 1, got {self.lag_window}")
        if self.horizon < 1:
            raise ForecastError(f"horizon must be at least 1, got {self.horizon}")


def feature_names(lag_window: int) -> Tuple[str, ...]:
    return ("day", "weekday") + tuple(f"lag_{lag}" for lag in range(1, lag_window + 1))


def _feature_row(series: DailySeries, history: Sequence[float], t: int, lag_window: int) -> List[float]:
    weekday = (series.days[0] + timedelta(days=t)).weekday()
    lags = [float(history[t - lag]) for lag in range(1, lag_window + 1)]
    return [float(t), float(weekday)] + lags


def build_instances(series: DailySeries, item: int, lag_window: int) -> InstanceTable:
    """
    Build autoregressive instances for one item's daily sales.

    Each day t from lag_window onward becomes a row with features
    (t, weekday, sales[t-1], ..., sales[t-lag_window]) and target sales[t].
    """
    if lag_window < 1:
        raise ForecastError(f"lag_window must be at least 1, got {lag_window}")
    if len(series) <= lag_window:
        raise ForecastError(
            f"Series has {len(series)} days; at least {lag_window + 1} are needed for {lag_window} lags"
        )

    history = series.totals[item]
    rows = [_feature_row(series, history, t, lag_window) for t in range(lag_window, len(series))]
    targets = history[lag_window:].astype(float)
    return InstanceTable(np.array(rows, dtype=float), targets, feature_names(lag_window))


def _adjustment(n: int, v: int) -> float:
    if n <= v:
        return SMALL_SAMPLE_PENALTY
    return (n + v) / (n - v)


def adjusted_error(model: LinearModel, features: np.ndarray, targets: np.ndarray) -> float:
    """Mean absolute residual scaled by (n + v) / (n - v)."""
    n = len(targets)
    if n == 0:
        return 0.0
    residuals = np.abs(targets - model.predict_many(features))
    return float(residuals.mean()) * _adjustment(n, model.n_params)


def _least_squares(features: np.ndarray, targets: np.ndarray, columns: Sequence[int]) -> LinearModel:
    if not columns:
        return LinearModel(float(targets.mean()))
    design = np.column_stack([np.ones(len(targets)), features[:, list(columns)]])
    coefs, *_ = np.linalg.lstsq(design, targets, rcond=None)
    return LinearModel(float(coefs[0]), tuple(zip(columns, (float(c) for c in coefs[1:]))))


def fit_linear_model(features: np.ndarray, targets: np.ndarray, columns: Sequence[int]) -> LinearModel:
    """
    Least-squares fit over the given columns with greedy term elimination.

    Terms are dropped one at a time, cheapest first, while the adjusted
    error does not increase.
    """
    columns = sorted(set(columns))
    model = _least_squares(features, targets, columns)
    error = adjusted_error(model, features, targets)

    while columns:
        best = None
        for drop in columns:
            remaining = [c for c in columns if c != drop]
            candidate = _least_squares(features, targets, remaining)
            candidate_error = adjusted_error(candidate, features, targets)
            if best is None or candidate_error < best[0]:
                best = (candidate_error, remaining, candidate)
        if best[0] > error:
            break
        error, columns, model = best
    return model


def _sd(values: np.ndarray) -> float:
    return float(values.std()) if len(values) else 0.0


def best_split(features: np.ndarray, targets: np.ndarray) -> Optional[Tuple[int, float, float]]:
    """
    Find the (feature, threshold) with the largest standard deviation reduction.

    Thresholds are midpoints between consecutive distinct feature values.
    Ties keep the lowest feature index, then the lowest threshold.

    Returns:
        (feature, threshold, sdr), or None when no threshold exists
    """
    n = len(targets)
    total_sd = _sd(targets)
    centred = targets - targets.mean()
    best = None

    for feature in range(features.shape[1]):
        order = np.argsort(features[:, feature], kind="stable")
        values = features[order, feature]
        ys = centred[order]

        counts_left = np.arange(1, n)
        sums = np.cumsum(ys)[:-1]
        squares = np.cumsum(ys ** 2)[:-1]
        total, total_squares = ys.sum(), (ys ** 2).sum()
        counts_right = n - counts_left

        var_left = np.maximum(squares / counts_left - (sums / counts_left) ** 2, 0.0)
        var_right = np.maximum(
            (total_squares - squares) / counts_right - ((total - sums) / counts_right) ** 2, 0.0
        )
        sdr = total_sd - (counts_left / n) * np.sqrt(var_left) - (counts_right / n) * np.sqrt(var_right)

        distinct = values[1:] > values[:-1]
        if not distinct.any():
            continue
        sdr = np.where(distinct, sdr, -np.inf)
        position = int(np.argmax(sdr))
        score = float(sdr[position])
        if best is None or score > best[2]:
            threshold = float((values[position] + values[position + 1]) / 2.0)
            best = (feature, threshold, score)
    return best


def grow_tree(instances: InstanceTable, params: Optional[TreeParams] = None) -> ModelTree:
    """
    Grow an unpruned model tree by recursive SDR splitting.

    Each node gets a linear model over the features tested in its subtree;
    leaves without a subtree get the mean of their targets.
    """
    params = params or TreeParams()
    params.validate()
    if len(instances) == 0:
        raise ForecastError("Cannot grow a tree from an empty instance table")

    features, targets = instances.features, instances.targets
    root_sd = _sd(targets)
    min_instances = max(MIN_SPLIT_INSTANCES, params.min_leaf)

    def build(rows: np.ndarray) -> Tuple[Node, Set[int]]:
        node_features, node_targets = features[rows], targets[rows]
        n = len(rows)
        leaf = Node(LinearModel(float(node_targets.mean())), n)
        if (n < min_instances
                or np.ptp(node_targets) == 0.0
                or _sd(node_targets) < params.sd_stop_fraction * root_sd):
            return leaf, set()

        split = best_split(node_features, node_targets)
        if split is None or split[2] <= 0.0:
            return leaf, set()

        feature, threshold, _ = split
        goes_left = node_features[:, feature] <= threshold
        left, left_tested = build(rows[goes_left])
        right, right_tested = build(rows[~goes_left])
        tested = {feature} | left_tested | right_tested
        model = fit_linear_model(node_features, node_targets, sorted(tested))
        return Node(model, n, feature, threshold, left, right), tested

    root, _ = build(np.arange(len(instances)))
    tree = ModelTree(root, params, instances.feature_names)
    logger.debug("Grew model tree with %d nodes from %d instances", tree.node_count(), len(instances))
    return tree


def prune_tree(tree: ModelTree, instances: InstanceTable) -> ModelTree:
    """
    Collapse subtrees whose node model is at least as good as the subtree.

    A subtree's error is the instance-weighted mean of its children's
    errors; a node is turned into a leaf when its own model's adjusted
    error does not exceed that.
    """
    features, targets = instances.features, instances.targets

    def prune(node: Node, rows: np.ndarray) -> Tuple[Node, float]:
        own_error = adjusted_error(node.model, features[rows], targets[rows])
        if node.is_leaf:
            return Node(node.model, node.n), own_error

        goes_left = features[rows, node.split_feature] <= node.threshold
        left_rows, right_rows = rows[goes_left], rows[~goes_left]
        left, left_error = prune(node.left, left_rows)
        right, right_error = prune(node.right, right_rows)

        n = len(rows)
        subtree_error = (
            (len(left_rows) * left_error + len(right_rows) * right_error) / n if n else 0.0
        )
        if own_error <= subtree_error + PRUNE_TOLERANCE:
            return Node(node.model, node.n), own_error
        return Node(node.model, node.n, node.split_feature, node.threshold, left, right), subtree_error

    root, _ = prune(tree.root, np.arange(len(instances)))
    pruned = ModelTree(root, tree.params, tree.feature_names)
    logger.debug("Pruned model tree from %d to %d nodes", tree.node_count(), pruned.node_count())
    return pruned


def fit_model_tree(instances: InstanceTable, params: Optional[TreeParams] = None) -> ModelTree:
    """Grow and prune a model tree."""
    return prune_tree(grow_tree(instances, params), instances)


def predict(tree: ModelTree, features: Sequence[float], smoothing: bool = True) -> float:
    """
    Predict with a model tree, optionally smoothing along the path to the root.

    Smoothing blends the running prediction p with each ancestor model's value q
    as (n * p + k * q) / (n + k), where n counts the instances of the child just left.
    """
    x = np.asarray(features, dtype=float)
    if tree.n_features and x.shape != (tree.n_features,):
        raise ForecastError(f"Expected {tree.n_features} features, got {x.size}")
    if not np.isfinite(x).all():
        raise ForecastError("Feature values must be finite")

    path = [tree.root]
    while not path[-1].is_leaf:
        node = path[-1]
        path.append(node.left if x[node.split_feature] <= node.threshold else node.right)

    prediction = path[-1].model.predict(x)
    if not smoothing:
        return float(prediction)

    k = tree.params.smoothing_k
    for child, ancestor in zip(reversed(path[1:]), reversed(path[:-1])):
        q = ancestor.model.predict(x)
        prediction = (child.n * prediction + k * q) / (child.n + k)
    return float(prediction)


def to_count(value: float) -> int:
    """Clamp a raw prediction at zero and round half up to a whole count."""
    return round_half_up(max(float(value), 0.0))


def forecast_horizon(
    tree: ModelTree,
    series: DailySeries,
    item: int,
    params: ForecastParams,
) -> List[int]:
    """
    Forecast the next `horizon` daily counts by iterated one-step prediction.

    The first step uses the observed lags; later steps roll each reported
    count into the lag window.
    """
    params.validate()
    if len(series) < params.lag_window:
        raise ForecastError(
            f"Series has {len(series)} days; the lag window needs {params.lag_window}"
        )

    history = [float(v) for v in series.totals[item]]
    counts = []
    for step in range(params.horizon):
        t = len(series) + step
        row = _feature_row(series, history, t, params.lag_window)
        count = to_count(predict(tree, row, params.smoothing))
        counts.append(count)
        history.append(float(count))
    return counts


def train_and_forecast(
    series: DailySeries,
    item: int,
    params: ForecastParams,
    tree_params: Optional[TreeParams] = None,
) -> Tuple[ModelTree, List[int]]:
    """Fit a tree on an item's full history and forecast past its last day."""
    instances = build_instances(series, item, params.lag_window)
    tree = fit_model_tree(instances, tree_params)
    logger.info(
        "Item %s: %d-node tree from %d instances",
        series.catalog.items[item], tree.node_count(), len(instances),
    )
    return tree, forecast_horizon(tree, series, item, params)


def backtest(
    series: DailySeries,
    item: int,
    params: ForecastParams,
    tree_params: Optional[TreeParams] = None,
) -> Tuple[List[int], List[int]]:
    """
    Hold back the last `horizon` days, forecast them, and return (predicted, actual).
    """
    params.validate()
    cutoff = len(series) - params.horizon
    if cutoff <= params.lag_window:
        raise ForecastError(
            f"Series has {len(series)} days; backtesting {params.horizon} days with "
            f"{params.lag_window} lags needs at least {params.lag_window + params.horizon + 1}"
        )
    _, predicted = train_and_forecast(series.head(cutoff), item, params, tree_params)
    actual = [int(v) for v in series.totals[item][cutoff:]]
    return predicted, actual


def rmse(tree: ModelTree, instances: InstanceTable, smoothing: bool = True) -> float:
    """Root mean squared training error of a tree."""
    if len(instances) == 0:
        return 0.0
    predictions = np.array([predict(tree, row, smoothing) for row in instances.features])
    return float(math.sqrt(np.mean((predictions - instances.targets) ** 2)))
