"""
End-to-end pipeline for BasketLab.

Runs ingest, reduction, mining, rule validation, daily aggregation,
forecasting, accuracy analysis and clustering from one configuration and
writes every intermediate artifact to the output directory.
"""

import logging
from dataclasses import dataclass, field
from datetime import timedelta
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

from . import reduction, storage
from .analysis import (
    INIT_METHODS,
    AccuracyReport,
    ClusterParams,
    SeriesClusters,
    accuracy_table,
    cluster_series,
)
from .config import ConfigError
from .forecast import (
    ForecastError,
    ForecastParams,
    TreeParams,
    backtest,
    build_instances,
    rmse,
    train_and_forecast,
)
from .ingest import (
    BasketDataset,
    DailySeries,
    IngestSchema,
    TransactionTable,
    aggregate_daily,
    binarize,
    parse_transactions,
    top_k_items,
)
from .readers import READERS
from .reduction import AttributePolicy, ReductionSpec, ReductionStats
from .rules import (
    AssociationRule,
    MiningError,
    MiningParams,
    RuleValidation,
    mine_rules,
    validate_rules,
)
from .utils import format_number

logger = logging.getLogger(__name__)

STAGES = (
    "ingest",
    "reduce",
    "mine",
    "validate",
    "aggregate",
    "forecast",
    "accuracy",
    "cluster",
    "report",
)

PENDING = "pending"
COMPLETED = "completed"
FAILED = "failed"


class PipelineError(Exception):
    """Exception raised for pipeline orchestration errors."""
    pass


def _inside(path: Path, directory: Path) -> bool:
    path, directory = path.resolve(), directory.resolve()
    return path == directory or directory in path.parents


def _section(data: Dict[str, Any], name: str) -> Dict[str, Any]:
    try:
        return data[name]
    except KeyError:
        raise ConfigError(f"Missing config section '{name}'") from None


def schema_from_config(data: Dict[str, Any]) -> IngestSchema:
    """Ingest schema from the `ingest` section."""
    try:
        schema = IngestSchema(**_section(data, "ingest"))
    except TypeError as e:
        raise ConfigError(f"Invalid ingest settings: {e}") from e
    if schema.format not in READERS:
        raise ConfigError(
            f"Unknown input format '{schema.format}'; choose from {', '.join(READERS)}"
        )
    return schema


def targets_from_config(data: Dict[str, Any]) -> Tuple[str, ...]:
    """Reduction targets as item codes; a comma-separated string is accepted."""
    targets = _section(data, "reduction").get("targets") or []
    if isinstance(targets, str):
        targets = [t.strip() for t in targets.split(",") if t.strip()]
    return tuple(targets)


def reduction_from_config(data: Dict[str, Any]) -> Tuple[AttributePolicy, int]:
    """Attribute policy and co-occurrence floor from the `reduction` section."""
    section = _section(data, "reduction")
    try:
        policy = AttributePolicy(section["policy"])
        min_cooccurrence = int(section["min_cooccurrence"])
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"Invalid reduction settings: {e}") from e
    if min_cooccurrence < 1:
        raise ConfigError(f"min_cooccurrence must be at least 1, got {min_cooccurrence}")
    return policy, min_cooccurrence


def mining_from_config(data: Dict[str, Any]) -> MiningParams:
    """Validated mining parameters from the `mining` section."""
    section = _section(data, "mining")
    try:
        params = MiningParams(
            min_support=float(section["min_support"]),
            min_confidence=float(section["min_confidence"]),
            max_itemset_size=int(section["max_itemset_size"]),
            absolute_support=(
                None if section.get("absolute_support") is None
                else int(section["absolute_support"])
            ),
        )
        params.validate()
    except (KeyError, TypeError, ValueError, MiningError) as e:
        raise ConfigError(f"Invalid mining settings: {e}") from e
    return params


def forecast_from_config(data: Dict[str, Any]) -> Tuple[int, ForecastParams, TreeParams]:
    """Top-k, forecast and tree parameters from the `forecast` section."""
    section = _section(data, "forecast")
    try:
        top_k = int(section["top_k"])
        params = ForecastParams(
            lag_window=int(section["lag_window"]),
            horizon=int(section["horizon"]),
            smoothing=bool(section["smoothing"]),
        )
        tree = TreeParams(
            smoothing_k=float(section["smoothing_k"]),
            min_leaf=int(section["min_leaf"]),
            sd_stop_fraction=float(section["sd_stop_fraction"]),
        )
        params.validate()
        tree.validate()
    except (KeyError, TypeError, ValueError, ForecastError) as e:
        raise ConfigError(f"Invalid forecast settings: {e}") from e
    if top_k < 1:
        raise ConfigError(f"top_k must be at least 1, got {top_k}")
    return top_k, params, tree


def clustering_from_config(data: Dict[str, Any]) -> ClusterParams:
    """K-means parameters from the `clustering` section; a null seed falls back to pipeline.seed."""
    section = _section(data, "clustering")
    try:
        seed = section.get("seed")
        if seed is None:
            seed = _section(data, "pipeline")["seed"]
        params = ClusterParams(
            k=int(section["k"]),
            seed=int(seed),
            max_iter=int(section["max_iter"]),
            tol=float(section["tol"]),
            normalize=bool(section["normalize"]),
            n_init=int(section["n_init"]),
            init=section.get("init", "random"),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"Invalid clustering settings: {e}") from e
    if params.k < 1 or params.n_init < 1 or params.max_iter < 1:
        raise ConfigError("Clustering k, n_init and max_iter must all be at least 1")
    if params.init not in INIT_METHODS:
        raise ConfigError(f"Unknown k-means initialisation '{params.init}'")
    return params


def threshold_from_config(data: Dict[str, Any]) -> int:
    """Accuracy threshold percentage from the `accuracy` section."""
    try:
        threshold = int(_section(data, "accuracy")["threshold_pct"])
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"Invalid accuracy settings: {e}") from e
    if not 0 <= threshold <= 100:
        raise ConfigError(f"threshold_pct must be within [0, 100], got {threshold}")
    return threshold


@dataclass(frozen=True)
class PipelineConfig:
    """Everything one pipeline run needs."""

    input: Path
    out_dir: Path
    schema: IngestSchema = field(default_factory=IngestSchema)
    targets: Tuple[str, ...] = ()
    attribute_policy: AttributePolicy = AttributePolicy.TARGETS_PLUS_COOCCURRING
    min_cooccurrence: int = 1
    mining: MiningParams = field(default_factory=MiningParams)
    top_k: int = 4
    forecast: ForecastParams = field(default_factory=ForecastParams)
    tree: TreeParams = field(default_factory=TreeParams)
    clustering: ClusterParams = field(default_factory=ClusterParams)
    threshold_pct: int = 70
    holdout: Optional[Path] = None

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PipelineConfig":
        """
        Build and validate a config from a merged configuration dictionary.

        Raises:
            ConfigError: If a value is missing or out of range
        """
        pipeline = _section(data, "pipeline")
        if not pipeline.get("input"):
            raise ConfigError("No input file given (pipeline.input)")
        if not pipeline.get("out_dir"):
            raise ConfigError("No output directory given (pipeline.out_dir)")

        policy, min_cooccurrence = reduction_from_config(data)
        top_k, forecast, tree = forecast_from_config(data)
        config = cls(
            input=Path(pipeline["input"]),
            out_dir=Path(pipeline["out_dir"]),
            holdout=Path(pipeline["holdout"]) if pipeline.get("holdout") else None,
            schema=schema_from_config(data),
            targets=targets_from_config(data),
            attribute_policy=policy,
            min_cooccurrence=min_cooccurrence,
            mining=mining_from_config(data),
            top_k=top_k,
            forecast=forecast,
            tree=tree,
            clustering=clustering_from_config(data),
            threshold_pct=threshold_from_config(data),
        )
        config.validate()
        return config

    def validate(self) -> None:
        try:
            self.mining.validate()
            self.forecast.validate()
            self.tree.validate()
        except (MiningError, ForecastError) as e:
            raise ConfigError(str(e)) from e

        if self.schema.format not in READERS:
            raise ConfigError(
                f"Unknown input format '{self.schema.format}'; choose from {', '.join(READERS)}"
            )
        if self.min_cooccurrence < 1:
            raise ConfigError(f"min_cooccurrence must be at least 1, got {self.min_cooccurrence}")
        if self.top_k < 1:
            raise ConfigError(f"top_k must be at least 1, got {self.top_k}")
        if self.clustering.k < 1 or self.clustering.n_init < 1 or self.clustering.max_iter < 1:
            raise ConfigError("Clustering k, n_init and max_iter must all be at least 1")
        if self.clustering.init not in INIT_METHODS:
            raise ConfigError(f"Unknown k-means initialisation '{self.clustering.init}'")
        if not 0 <= self.threshold_pct <= 100:
            raise ConfigError(f"threshold_pct must be within [0, 100], got {self.threshold_pct}")

        for name, path in (("input", self.input), ("holdout", self.holdout)):
            if path is not None and _inside(path, self.out_dir):
                raise ConfigError(f"The {name} file must not live inside the output directory")


@dataclass
class PipelineResult:
    """Artifacts and headline numbers of a finished run."""

    out_dir: Path
    artifacts: Dict[str, Path]
    rules: List[AssociationRule]
    validated: List[AssociationRule]
    report: AccuracyReport
    clusters: SeriesClusters

    @property
    def validity_horizon(self) -> int:
        return self.report.validity_horizon


class Pipeline:
    """Runs the pipeline stages in order, recording each stage in manifest.json."""

    def __init__(self, config: PipelineConfig):
        self.config = config
        self.out_dir = config.out_dir
        self.manifest: Dict[str, Dict[str, Any]] = {
            name: {"status": PENDING, "artifacts": []} for name in STAGES
        }
        self.artifacts: Dict[str, Path] = {}
        self.stats: Dict[str, Any] = {}

        self.table: Optional[TransactionTable] = None
        self.baskets: Optional[BasketDataset] = None
        self.reduced: Optional[BasketDataset] = None
        self.reduction_stats: Optional[ReductionStats] = None
        self.rules: List[AssociationRule] = []
        self.checks: Dict[str, RuleValidation] = {}
        self.validated: List[AssociationRule] = []
        self.series: Optional[DailySeries] = None
        self.items: Tuple[int, ...] = ()
        self.backtests: Dict[str, Tuple[List[int], List[int]]] = {}
        self.report: Optional[AccuracyReport] = None
        self.clusters: Optional[SeriesClusters] = None

    def run(self) -> PipelineResult:
        """
        Execute every stage.

        Raises:
            The failing stage's own exception, after manifest.json marks it failed
        """
        if self.out_dir.exists() and not self.out_dir.is_dir():
            raise PipelineError(f"Output path {self.out_dir} exists and is not a directory")
        self.out_dir.mkdir(parents=True, exist_ok=True)
        steps: List[Tuple[str, Callable[[], None]]] = [
            ("ingest", self.ingest),
            ("reduce", self.reduce),
            ("mine", self.mine),
            ("validate", self.validate),
            ("aggregate", self.aggregate),
            ("forecast", self.forecast),
            ("accuracy", self.accuracy),
            ("cluster", self.cluster),
            ("report", self.write_report),
        ]
        for name, step in steps:
            logger.info("Stage %s", name)
            try:
                step()
            except Exception as e:
                self.manifest[name]["status"] = FAILED
                self.manifest[name]["error"] = f"{type(e).__name__}: {e}"
                self._write_manifest()
                logger.error("Stage %s failed: %s", name, e)
                raise
            self.manifest[name]["status"] = COMPLETED
            self._write_manifest()

        return PipelineResult(
            out_dir=self.out_dir,
            artifacts=dict(self.artifacts),
            rules=self.rules,
            validated=self.validated,
            report=self.report,
            clusters=self.clusters,
        )

    def _artifact(self, stage: str, name: str) -> Path:
        path = self.out_dir / name
        self.artifacts[name] = path
        self.manifest[stage]["artifacts"].append(name)
        return path

    def _write_manifest(self) -> None:
        failed = any(entry["status"] == FAILED for entry in self.manifest.values())
        done = all(entry["status"] == COMPLETED for entry in self.manifest.values())
        storage.save_json(self.out_dir / "manifest.json", {
            "status": FAILED if failed else COMPLETED if done else PENDING,
            "stages": [dict(name=name, **self.manifest[name]) for name in STAGES],
        })

    def _daily_series(self) -> DailySeries:
        if self.series is None:
            self.series = aggregate_daily(self.table)
        return self.series

    def ingest(self) -> None:
        self.table = parse_transactions(str(self.config.input), self.config.schema)
        self.baskets = binarize(self.table)
        storage.save_dataset(self._artifact("ingest", "dataset.bl"), self.table)

    def reduce(self) -> None:
        targets = self.config.targets
        if not targets:
            top = top_k_items(self._daily_series(), self.config.top_k)
            targets = tuple(self.table.catalog.codes(top))
            logger.info("No reduction targets configured; using best sellers %s", ", ".join(targets))

        spec = ReductionSpec(frozenset(targets), self.config.attribute_policy, self.config.min_cooccurrence)
        self.reduced, self.reduction_stats = reduction.reduce(self.baskets, spec)
        self.stats["reduction"] = dict(targets=sorted(targets), **self.reduction_stats.to_dict())
        storage.save_dataset(self._artifact("reduce", "reduced.bl"), self.reduced)

    def mine(self) -> None:
        self.rules = mine_rules(self.reduced, self.config.mining)
        self.stats["mining"] = {
            "support_threshold": self.config.mining.support_threshold(len(self.reduced)),
            "rules": len(self.rules),
        }
        storage.save_rules(self._artifact("mine", "rules.json"), self.rules, self.reduced.catalog)

    def validate(self) -> None:
        catalog = self.reduced.catalog
        min_confidence = self.config.mining.min_confidence
        self.checks["overall"] = validate_rules(self.rules, catalog, self.baskets, min_confidence)
        if self.config.holdout is not None:
            holdout = binarize(parse_transactions(str(self.config.holdout), self.config.schema))
            self.checks["holdout"] = validate_rules(self.rules, catalog, holdout, min_confidence)

        surviving = None
        for validation in self.checks.values():
            passed = {check.rule for check in validation.validated}
            surviving = passed if surviving is None else surviving & passed
        self.validated = [rule for rule in self.rules if rule in surviving]

        self.stats["validation"] = {
            name: {"validated": len(v.validated), "eliminated": len(v.eliminated)}
            for name, v in self.checks.items()
        }
        storage.save_json(self._artifact("validate", "validated.json"), {
            "rules": [storage.rule_to_dict(rule, catalog) for rule in self.validated],
            "checks": {
                name: storage.validation_to_dict(v, catalog) for name, v in self.checks.items()
            },
        })

    def aggregate(self) -> None:
        series = self._daily_series()
        self.stats["series"] = {
            "first_day": series.days[0].isoformat(),
            "last_day": series.days[-1].isoformat(),
            "days": len(series),
            "items": len(series.catalog),
        }

    def forecast(self) -> None:
        series = self.series
        params = self.config.forecast
        self.items = top_k_items(series, self.config.top_k)

        forecasts: Dict[str, List[int]] = {}
        trees: Dict[str, Any] = {}
        for item in self.items:
            code = series.catalog.items[item]
            self.backtests[code] = backtest(series, item, params, self.config.tree)
            tree, forecasts[code] = train_and_forecast(series, item, params, self.config.tree)
            instances = build_instances(series, item, params.lag_window)
            trees[code] = {
                "nodes": tree.node_count(),
                "training_rmse": rmse(tree, instances, params.smoothing),
            }
            storage.save_model_tree(self._artifact("forecast", f"models/{code}.json"), tree)

        self.stats["forecast"] = trees
        storage.save_json(self._artifact("forecast", "forecast.json"), storage.forecast_to_dict(
            series.days[-1] + timedelta(days=1),
            forecasts,
            {
                "lag_window": params.lag_window,
                "horizon": params.horizon,
                "smoothing": params.smoothing,
                "smoothing_k": self.config.tree.smoothing_k,
            },
            self.backtests,
        ))

    def accuracy(self) -> None:
        codes = list(self.backtests)
        self.report = accuracy_table(
            codes,
            [self.backtests[code][0] for code in codes],
            [self.backtests[code][1] for code in codes],
            self.config.threshold_pct,
        )
        self.stats["validity_horizon"] = self.report.validity_horizon
        storage.save_json(self._artifact("accuracy", "report.json"), storage.report_to_dict(self.report))

    def cluster(self) -> None:
        self.clusters = cluster_series(self.series, self.config.clustering)
        self.stats["clustering"] = {
            "k": self.clusters.result.k,
            "inertia": self.clusters.result.inertia,
            "iterations": self.clusters.result.iterations,
        }
        storage.save_json(self._artifact("cluster", "clusters.json"), storage.clusters_to_dict(self.clusters))

    def write_report(self) -> None:
        storage.save_json(self._artifact("report", "stats.json"), self.stats)
        path = self._artifact("report", "summary.md")
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(self.summary())

    def summary(self) -> str:
        """Human-readable run summary: horizon-limited rules with cluster context."""
        catalog = self.reduced.catalog
        report = self.report
        horizon = report.validity_horizon
        stats = self.reduction_stats

        output = "# BasketLab run summary\n\n"
        output += f"Input: `{self.config.input.name}`\n\n"
        output += (
            f"Reduction kept {stats.rows_after} of {stats.rows_before} baskets "
            f"and {stats.attrs_after} of {stats.attrs_before} items.\n\n"
        )

        output += "## Rules for business action\n\n"
        if horizon == 0:
            output += (
                f"No forecast day reaches {report.threshold_pct}% average accuracy, "
                "so the rules below should not be extended beyond the mined period.\n\n"
            )
        else:
            output += (
                f"These {len(self.validated)} validated rule(s) remain usable for the next "
                f"{horizon} day(s).\n\n"
            )
        if self.validated:
            output += "| Antecedent | Consequent | Confidence | Support | Clusters |\n"
            output += "|---|---|---|---|---|\n"
            for rule in self.validated:
                antecedent = catalog.codes(rule.antecedent.items)
                consequent = catalog.codes(rule.consequent.items)
                clusters = ", ".join(
                    f"{code}: {self.clusters.cluster_of(code)}" for code in antecedent + consequent
                )
                output += (
                    f"| {', '.join(antecedent)} | {', '.join(consequent)} "
                    f"| {rule.confidence:.3f} | {rule.joint_support_count} | {clusters} |\n"
                )
            output += "\n"
        else:
            output += "No rule survived validation.\n\n"

        output += "## Forecast accuracy (backtest)\n\n"
        output += "| Day | Avg predicted | Avg actual | Avg accuracy % |\n"
        output += "|---|---|---|---|\n"
        average = report.average_row
        for day, (p, r, pr) in enumerate(
            zip(average.predicted, average.actual, average.accuracy_pct), start=1
        ):
            output += f"| {day} | {format_number(p)} | {format_number(r)} | {pr} |\n"
        output += f"\n{report.note}\n\n"

        output += "## Product clusters\n\n"
        series_catalog = self.series.catalog
        for cluster in self.clusters.volume_order():
            members = series_catalog.codes(self.clusters.result.members(cluster))
            volume = float(self.clusters.profiles[cluster].mean())
            output += f"- Cluster {cluster} (mean daily volume {volume:.2f}): {', '.join(members)}\n"
        return output


def run_pipeline(config: PipelineConfig) -> PipelineResult:
    """
    Run every stage of the pipeline for a validated config.

    Args:
        config: Pipeline configuration

    Returns:
        PipelineResult describing the written artifacts
    """
    config.validate()
    return Pipeline(config).run()
