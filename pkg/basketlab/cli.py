"""
Command-line interface for BasketLab.
"""

import argparse
import dataclasses
import logging
import sys
from datetime import date, timedelta
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from rich.markdown import Markdown
from rich.panel import Panel
from rich.table import Table

from . import config, storage
from .analysis import INIT_METHODS, AccuracyReport, AnalysisError, accuracy_table, cluster_series
from .console import console, setup_logging
from .forecast import ForecastError, backtest, train_and_forecast
from .ingest import (
    IngestError,
    ItemCatalog,
    TransactionTable,
    aggregate_daily,
    binarize,
    parse_transactions,
    top_k_items,
)
from .pipeline import (
    PipelineConfig,
    PipelineError,
    clustering_from_config,
    forecast_from_config,
    mining_from_config,
    reduction_from_config,
    run_pipeline,
    schema_from_config,
    targets_from_config,
    threshold_from_config,
)
from .reduction import ReductionError, ReductionSpec, reduce
from .rules import AssociationRule, MiningError, mine_rules, validate_rules
from .storage import StorageError
from .synthetic import SyntheticSpec, generate_synthetic, parse_planted_rule
from .utils import format_number

logger = logging.getLogger(__name__)

EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3

DATA_ERRORS = (
    IngestError,
    ReductionError,
    MiningError,
    ForecastError,
    AnalysisError,
    StorageError,
    PipelineError,
)

# argparse dest -> (config section, key)
OVERRIDES = {
    "format": ("ingest", "format"),
    "date_col": ("ingest", "date_col"),
    "receipt_col": ("ingest", "receipt_col"),
    "item_col": ("ingest", "item_col"),
    "qty_col": ("ingest", "qty_col"),
    "delimiter": ("ingest", "delimiter"),
    "targets": ("reduction", "targets"),
    "policy": ("reduction", "policy"),
    "min_cooccurrence": ("reduction", "min_cooccurrence"),
    "min_support": ("mining", "min_support"),
    "absolute_support": ("mining", "absolute_support"),
    "min_confidence": ("mining", "min_confidence"),
    "max_itemset_size": ("mining", "max_itemset_size"),
    "top_k": ("forecast", "top_k"),
    "lag_window": ("forecast", "lag_window"),
    "horizon": ("forecast", "horizon"),
    "smoothing": ("forecast", "smoothing"),
    "smoothing_k": ("forecast", "smoothing_k"),
    "min_leaf": ("forecast", "min_leaf"),
    "sd_stop_fraction": ("forecast", "sd_stop_fraction"),
    "k": ("clustering", "k"),
    "normalize": ("clustering", "normalize"),
    "n_init": ("clustering", "n_init"),
    "init": ("clustering", "init"),
    "max_iter": ("clustering", "max_iter"),
    "threshold": ("accuracy", "threshold_pct"),
    "run_input": ("pipeline", "input"),
    "holdout": ("pipeline", "holdout"),
    "out_dir": ("pipeline", "out_dir"),
    "seed": ("pipeline", "seed"),
}


class ArgumentParser(argparse.ArgumentParser):
    """Argument parser that reports usage errors with exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def collect_overrides(args: argparse.Namespace) -> Dict[str, Dict[str, Any]]:
    """Turn the command-line flags that were given into a config layer."""
    overrides: Dict[str, Dict[str, Any]] = {}
    for dest, (section, key) in OVERRIDES.items():
        value = getattr(args, dest, None)
        if value is not None:
            overrides.setdefault(section, {})[key] = value
    if getattr(args, "seed", None) is not None:
        overrides.setdefault("clustering", {})["seed"] = args.seed
    return overrides


def _output(args: argparse.Namespace, settings: Dict[str, Any], name: str) -> Path:
    if getattr(args, "output", None):
        return Path(args.output)
    return Path(settings["pipeline"]["out_dir"]) / name


def _rules_table(
    rules: Sequence[AssociationRule],
    catalog: ItemCatalog,
    title: str,
    limit: Optional[int] = 20,
) -> Table:
    table = Table(title=title)
    table.add_column("Antecedent")
    table.add_column("Consequent")
    table.add_column("Support", justify="right")
    table.add_column("Confidence", justify="right")
    for rule in (rules[:limit] if limit else rules):
        table.add_row(
            ", ".join(catalog.codes(rule.antecedent.items)),
            ", ".join(catalog.codes(rule.consequent.items)),
            str(rule.joint_support_count),
            f"{rule.confidence:.3f}",
        )
    return table


def _accuracy_view(report: AccuracyReport) -> Table:
    """Product rows of p / r / pr% per day, followed by the average row."""
    table = Table(title="Prediction accuracy")
    table.add_column("Product")
    for day in range(1, report.days + 1):
        table.add_column(f"D{day} p", justify="right")
        table.add_column(f"D{day} r", justify="right")
        table.add_column(f"D{day} pr%", justify="right")

    for code, p_row, r_row, pr_row in zip(
        report.products, report.predicted, report.actual, report.accuracy_pct
    ):
        cells = []
        for p, r, pr in zip(p_row, r_row, pr_row):
            cells += [str(p), str(r), str(pr)]
        table.add_row(code, *cells)

    average = report.average_row
    cells = []
    for p, r, pr in zip(average.predicted, average.actual, average.accuracy_pct):
        cells += [format_number(p), format_number(r), str(pr)]
    table.add_row("[bold]Average[/bold]", *cells)
    return table


def ingest_command(args, settings):
    """Parse a transaction CSV into a dataset file."""
    schema = schema_from_config(settings)
    with console.status(f"[bold green]Reading {args.input}...[/bold green]"):
        table = parse_transactions(args.input, schema)

    path = _output(args, settings, "dataset.bl")
    storage.save_dataset(path, table)
    console.print(Panel(
        f"{len(table)} transactions over {len(table.catalog)} items\nWritten to {path}",
        title="Ingest",
        border_style="green",
    ))


def reduce_command(args, settings):
    """Reduce a dataset to baskets and attributes relevant to the targets."""
    dataset = storage.load_dataset(args.dataset)
    baskets = binarize(dataset) if isinstance(dataset, TransactionTable) else dataset
    policy, min_cooccurrence = reduction_from_config(settings)

    targets = targets_from_config(settings)
    if not targets:
        if not isinstance(dataset, TransactionTable):
            raise config.ConfigError("Binary datasets need explicit --targets")
        top_k, _, _ = forecast_from_config(settings)
        series = aggregate_daily(dataset)
        targets = tuple(series.catalog.codes(top_k_items(series, top_k)))

    reduced, stats = reduce(baskets, ReductionSpec(frozenset(targets), policy, min_cooccurrence))
    path = _output(args, settings, "reduced.bl")
    storage.save_dataset(path, reduced)
    if args.stats:
        storage.save_json(args.stats, dict(targets=sorted(targets), **stats.to_dict()))

    table = Table(title="Reduction")
    table.add_column("")
    table.add_column("Before", justify="right")
    table.add_column("After", justify="right")
    table.add_row("Baskets", str(stats.rows_before), str(stats.rows_after))
    table.add_row("Attributes", str(stats.attrs_before), str(stats.attrs_after))
    console.print(table)
    console.print(f"[green]Written to {path}[/green]")


def mine_command(args, settings):
    """Mine association rules from a dataset."""
    baskets = storage.load_baskets(args.dataset)
    params = mining_from_config(settings)
    with console.status("[bold green]Mining frequent itemsets...[/bold green]"):
        rules = mine_rules(baskets, params)

    path = _output(args, settings, "rules.json")
    storage.save_rules(path, rules, baskets.catalog)
    console.print(_rules_table(rules, baskets.catalog, f"{len(rules)} rules"))
    console.print(f"[green]Written to {path}[/green]")


def validate_command(args, settings):
    """Re-check mined rules on a holdout dataset."""
    if bool(args.holdout_file) == bool(args.holdout_option):
        raise config.ConfigError("Give the holdout data exactly once, positionally or with --holdout")
    holdout_path = args.holdout_file or args.holdout_option

    catalog, rules = storage.load_rules(args.rules)
    if holdout_path.endswith(".bl"):
        holdout = storage.load_baskets(holdout_path)
    else:
        holdout = binarize(parse_transactions(holdout_path, schema_from_config(settings)))

    validation = validate_rules(rules, catalog, holdout, mining_from_config(settings).min_confidence)
    path = _output(args, settings, "validated.json")
    storage.save_json(path, {
        "rules": [storage.rule_to_dict(check.rule, catalog) for check in validation.validated],
        "checks": {"holdout": storage.validation_to_dict(validation, catalog)},
    })

    console.print(_rules_table(
        [check.rule for check in validation.validated], catalog,
        f"{len(validation.validated)} validated, {len(validation.eliminated)} eliminated",
    ))
    console.print(f"[green]Written to {path}[/green]")


def forecast_command(args, settings):
    """Forecast daily sales for the best sellers (or named items)."""
    table = storage.load_transactions(args.dataset)
    series = aggregate_daily(table)
    top_k, params, tree_params = forecast_from_config(settings)
    if args.items:
        items = [series.catalog.position(code.strip()) for code in args.items.split(",")]
    else:
        items = list(top_k_items(series, top_k))

    path = _output(args, settings, "forecast.json")
    models_dir = path.parent / "models"
    forecasts = {}
    backtests = {}
    with console.status("[bold green]Fitting model trees...[/bold green]"):
        for item in items:
            code = series.catalog.items[item]
            tree, forecasts[code] = train_and_forecast(series, item, params, tree_params)
            storage.save_model_tree(models_dir / f"{code}.json", tree)
            if args.backtest:
                backtests[code] = backtest(series, item, params, tree_params)

    start = series.days[-1] + timedelta(days=1)
    storage.save_json(path, storage.forecast_to_dict(
        start,
        forecasts,
        {
            "lag_window": params.lag_window,
            "horizon": params.horizon,
            "smoothing": params.smoothing,
            "smoothing_k": tree_params.smoothing_k,
        },
        backtests,
    ))

    view = Table(title=f"Forecast from {start.isoformat()}")
    view.add_column("Item")
    for step in range(params.horizon):
        view.add_column((start + timedelta(days=step)).isoformat(), justify="right")
    for code, counts in forecasts.items():
        view.add_row(code, *(str(c) for c in counts))
    console.print(view)
    console.print(f"[green]Written to {path}[/green]")


def cluster_command(args, settings):
    """Cluster products by their daily sales."""
    series = aggregate_daily(storage.load_transactions(args.dataset))
    clusters = cluster_series(series, clustering_from_config(settings))

    path = _output(args, settings, "clusters.json")
    storage.save_json(path, storage.clusters_to_dict(clusters))

    view = Table(title=f"{clusters.result.k} clusters, inertia {clusters.result.inertia:.2f}")
    view.add_column("Cluster", justify="right")
    view.add_column("Mean daily volume", justify="right")
    view.add_column("Members")
    for cluster in clusters.volume_order():
        view.add_row(
            str(cluster),
            f"{clusters.profiles[cluster].mean():.2f}",
            ", ".join(series.catalog.codes(clusters.result.members(cluster))),
        )
    console.print(view)
    console.print(f"[green]Written to {path}[/green]")


def accuracy_command(args, settings):
    """Score forecasts against observed counts and derive the validity horizon."""
    if args.actuals:
        predicted = storage.load_forecast(args.forecast)
        observed = storage.load_actuals(args.actuals)
        missing = [code for code in predicted if code not in observed]
        if missing:
            raise StorageError(f"No actual counts for: {', '.join(missing)}")
        pairs = {code: (predicted[code], observed[code]) for code in predicted}
    else:
        pairs = storage.load_backtests(args.forecast)
        if not pairs:
            raise StorageError(f"{args.forecast} holds no backtests; pass an actuals CSV")

    codes = list(pairs)
    grid_predicted: List[List[int]] = []
    grid_actual: List[List[int]] = []
    for code in codes:
        p_row, r_row = pairs[code]
        if len(r_row) < len(p_row):
            raise StorageError(f"{code}: {len(r_row)} actual days for {len(p_row)} predicted")
        grid_predicted.append(p_row)
        grid_actual.append(r_row[:len(p_row)])

    report = accuracy_table(codes, grid_predicted, grid_actual, threshold_from_config(settings))
    path = _output(args, settings, "report.json")
    storage.save_json(path, storage.report_to_dict(report))

    console.print(_accuracy_view(report))
    console.print(Panel(
        f"Validity horizon: {report.validity_horizon} day(s)\n{report.note}",
        border_style="green" if report.validity_horizon else "yellow",
    ))
    console.print(f"[green]Written to {path}[/green]")


def run_command(args, settings):
    """Run the whole pipeline."""
    pipeline_config = PipelineConfig.from_dict(settings)
    with console.status("[bold green]Running pipeline...[/bold green]"):
        result = run_pipeline(pipeline_config)

    summary = result.artifacts["summary.md"].read_text(encoding="utf-8")
    console.print(Panel(Markdown(summary), title="BasketLab Summary", border_style="green"))
    console.print(f"[green]Artifacts written to {result.out_dir}[/green]")


def synth_command(args, settings):
    """Generate a synthetic transaction file."""
    spec = SyntheticSpec(
        n_items=args.items,
        n_baskets=args.baskets,
        day_span=args.days,
        base_probabilities=args.base_prob,
        seed=int(settings["pipeline"]["seed"]),
        start_date=date.fromisoformat(args.start_date),
    )
    codes = spec.item_codes()
    spec = dataclasses.replace(
        spec, planted_rules=tuple(parse_planted_rule(text, codes) for text in args.plant)
    )

    path = generate_synthetic(spec, _output(args, settings, "synthetic.csv"))
    console.print(Panel(
        f"{spec.n_baskets} baskets, {spec.n_items} items, {spec.day_span} days, seed {spec.seed}\n"
        f"Written to {path}",
        title="Synthetic data",
        border_style="green",
    ))


def defaults_command(args, settings):
    """Persist user defaults."""
    if args.set_seed is not None:
        config.set_default_seed(args.set_seed)
        console.print(f"[green]Default seed set to {args.set_seed}[/green]")
    if args.set_out_dir:
        config.set_default_out_dir(args.set_out_dir)
        console.print(f"[green]Default output directory set to {args.set_out_dir}[/green]")
    if args.set_min_confidence is not None:
        config.set_default_min_confidence(args.set_min_confidence)
        console.print(f"[green]Default minimum confidence set to {args.set_min_confidence}[/green]")
    if args.set_top_k is not None:
        config.set_default_top_k(args.set_top_k)
        console.print(f"[green]Default top-k set to {args.set_top_k}[/green]")

    if all(value is None for value in (
        args.set_seed, args.set_out_dir, args.set_min_confidence, args.set_top_k
    )):
        console.print(
            "[yellow]No defaults specified. Use --seed, --out-dir, --min-confidence "
            "or --top-k to set defaults.[/yellow]"
        )


def _schema_options() -> ArgumentParser:
    parent = ArgumentParser(add_help=False)
    group = parent.add_argument_group("input layout")
    group.add_argument("--format", choices=["wide", "long"], help="Input layout (default: wide)")
    group.add_argument("--date-col", dest="date_col", help="Date column name")
    group.add_argument("--receipt-col", dest="receipt_col", help="Receipt id column (long)")
    group.add_argument("--item-col", dest="item_col", help="Item code column (long)")
    group.add_argument("--qty-col", dest="qty_col", help="Quantity column (long)")
    group.add_argument("--delimiter", help="Field delimiter (default: ,)")
    return parent


def _reduction_options() -> ArgumentParser:
    parent = ArgumentParser(add_help=False)
    group = parent.add_argument_group("reduction")
    group.add_argument("--targets", help="Comma-separated target item codes")
    group.add_argument("--policy", choices=["cooccur", "targets_only"], help="Attribute policy")
    group.add_argument("--min-cooccurrence", dest="min_cooccurrence", type=int,
                       help="Baskets an item must share with a target to be kept")
    return parent


def _mining_options() -> ArgumentParser:
    parent = ArgumentParser(add_help=False)
    group = parent.add_argument_group("mining")
    group.add_argument("--min-support", dest="min_support", type=float,
                       help="Minimum relative support (default: 0.01)")
    group.add_argument("--absolute-support", dest="absolute_support", type=int,
                       help="Minimum support as a basket count")
    group.add_argument("--min-confidence", dest="min_confidence", type=float,
                       help=f"Minimum confidence (default: {config.get_default_min_confidence()})")
    group.add_argument("--max-size", dest="max_itemset_size", type=int, help="Largest itemset size")
    return parent


def _forecast_options() -> ArgumentParser:
    parent = ArgumentParser(add_help=False)
    group = parent.add_argument_group("forecasting")
    group.add_argument("--top-k", dest="top_k", type=int,
                       help=f"Best sellers to forecast (default: {config.get_default_top_k()})")
    group.add_argument("--lag-window", "--lags", dest="lag_window", type=int,
                       help="Lagged days per instance")
    group.add_argument("--horizon", type=int, help="Days to forecast")
    group.add_argument("--no-smoothing", dest="smoothing", action="store_const", const=False,
                       help="Use raw leaf predictions")
    group.add_argument("--smoothing-k", dest="smoothing_k", type=float, help="Smoothing constant")
    group.add_argument("--min-leaf", dest="min_leaf", type=int, help="Smallest node to split")
    group.add_argument("--sd-stop", dest="sd_stop_fraction", type=float,
                       help="Stop splitting below this fraction of the root deviation")
    return parent


def _cluster_options() -> ArgumentParser:
    parent = ArgumentParser(add_help=False)
    group = parent.add_argument_group("clustering")
    group.add_argument("-k", "--k", dest="k", type=int, help="Number of clusters (default: 4)")
    group.add_argument("--normalize", action="store_const", const=True,
                       help="Z-normalize each product's daily vector")
    group.add_argument("--n-init", dest="n_init", type=int, help="Seeded restarts")
    group.add_argument("--init", choices=list(INIT_METHODS), help="Centroid seeding (default: random)")
    group.add_argument("--max-iter", dest="max_iter", type=int, help="Iteration cap")
    return parent


def _common_options() -> ArgumentParser:
    # SUPPRESS keeps a value given before the command from being reset to None
    parent = ArgumentParser(add_help=False)
    parent.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="Random seed")
    parent.add_argument("--out-dir", dest="out_dir", default=argparse.SUPPRESS, help="Output directory")
    return parent


def _threshold_options() -> ArgumentParser:
    parent = ArgumentParser(add_help=False)
    parent.add_argument("--threshold", type=int, help="Accuracy threshold in percent (default: 70)")
    return parent


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(
        description="BasketLab: market-basket rules with forecast-bounded validity"
    )
    parser.add_argument("--seed", type=int, help=f"Random seed (default: {config.get_default_seed()})")
    parser.add_argument("--out-dir", dest="out_dir",
                        help=f"Output directory (default: {config.get_default_out_dir()})")
    parser.add_argument("--config", help="JSON run configuration file")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="Show progress (-v) or debug output (-vv)")
    subparsers = parser.add_subparsers(dest="command", help="Command to run")

    schema = _schema_options()
    reduction = _reduction_options()
    mining = _mining_options()
    forecasting = _forecast_options()
    clustering = _cluster_options()
    threshold = _threshold_options()
    common = _common_options()

    ingest_parser = subparsers.add_parser("ingest", parents=[common, schema], help="Parse a transaction CSV")
    ingest_parser.add_argument("input", help="Transaction CSV")
    ingest_parser.add_argument("-o", "--output", help="Dataset file to write (default: dataset.bl)")
    ingest_parser.set_defaults(func=ingest_command)

    reduce_parser = subparsers.add_parser("reduce", parents=[common, reduction, forecasting],
                                          help="Reduce a dataset around target items")
    reduce_parser.add_argument("dataset", help="Dataset file")
    reduce_parser.add_argument("-o", "--output", help="Reduced dataset to write")
    reduce_parser.add_argument("--stats", help="Also write reduction statistics to this JSON file")
    reduce_parser.set_defaults(func=reduce_command)

    mine_parser = subparsers.add_parser("mine", parents=[common, mining], help="Mine association rules")
    mine_parser.add_argument("dataset", help="Dataset file")
    mine_parser.add_argument("-o", "--output", help="Rules file to write (default: rules.json)")
    mine_parser.set_defaults(func=mine_command)

    validate_parser = subparsers.add_parser("validate", parents=[common, schema, mining],
                                            help="Re-check rules on holdout data")
    validate_parser.add_argument("rules", help="rules.json")
    validate_parser.add_argument("holdout_file", metavar="holdout", nargs="?",
                                 help="Holdout dataset (.bl) or transaction CSV")
    validate_parser.add_argument("--holdout", dest="holdout_option", metavar="HOLDOUT",
                                 help="Holdout given as an option instead of positionally")
    validate_parser.add_argument("-o", "--output", help="Validation file to write")
    validate_parser.set_defaults(func=validate_command)

    forecast_parser = subparsers.add_parser("forecast", parents=[common, forecasting],
                                            help="Forecast daily sales with model trees")
    forecast_parser.add_argument("dataset", help="Dataset file with quantities (from ingest)")
    forecast_parser.add_argument("--items", help="Comma-separated item codes (default: top-k)")
    forecast_parser.add_argument("--backtest", action="store_true",
                                 help="Also backtest the last horizon days")
    forecast_parser.add_argument("-o", "--output", help="Forecast file to write")
    forecast_parser.set_defaults(func=forecast_command)

    cluster_parser = subparsers.add_parser("cluster", parents=[common, clustering],
                                           help="Cluster products by daily sales")
    cluster_parser.add_argument("dataset", help="Dataset file with quantities (from ingest)")
    cluster_parser.add_argument("-o", "--output", help="Clusters file to write")
    cluster_parser.set_defaults(func=cluster_command)

    accuracy_parser = subparsers.add_parser("accuracy", parents=[common, threshold],
                                            help="Score forecasts and derive the validity horizon")
    accuracy_parser.add_argument("forecast", help="forecast.json")
    accuracy_parser.add_argument("actuals", nargs="?",
                                 help="CSV of observed counts (default: the stored backtests)")
    accuracy_parser.add_argument("-o", "--output", help="Report file to write")
    accuracy_parser.set_defaults(func=accuracy_command)

    run_parser = subparsers.add_parser(
        "run",
        parents=[common, schema, reduction, mining, forecasting, clustering, threshold],
        help="Run the full pipeline",
    )
    run_parser.add_argument("run_input", metavar="input", nargs="?",
                            help="Transaction CSV (default: pipeline.input from --config)")
    run_parser.add_argument("--holdout", help="Next-period transaction CSV for rule validation")
    run_parser.set_defaults(func=run_command)

    synth_parser = subparsers.add_parser("synth", parents=[common], help="Generate synthetic transactions")
    synth_parser.add_argument("--items", type=int, default=20, help="Number of items (default: 20)")
    synth_parser.add_argument("--baskets", type=int, default=10_000,
                              help="Number of baskets (default: 10000)")
    synth_parser.add_argument("--days", type=int, default=60, help="Day span (default: 60)")
    synth_parser.add_argument("--base-prob", dest="base_prob", type=float, default=0.05,
                              help="Base purchase probability per item (default: 0.05)")
    synth_parser.add_argument("--plant", action="append", default=[],
                              help="Planted rule such as 'item01->item02:0.9' (repeatable)")
    synth_parser.add_argument("--start-date", dest="start_date", default="2014-01-01",
                              help="First day (YYYY-MM-DD)")
    synth_parser.add_argument("-o", "--output", help="CSV to write (default: synthetic.csv)")
    synth_parser.set_defaults(func=synth_command)

    defaults_parser = subparsers.add_parser("defaults", help="Configure default settings")
    defaults_parser.add_argument("--seed", dest="set_seed", type=int,
                                 help=f"Set default seed (current: {config.get_default_seed()})")
    defaults_parser.add_argument("--out-dir", dest="set_out_dir",
                                 help=f"Set default output directory (current: {config.get_default_out_dir()})")
    defaults_parser.add_argument("--min-confidence", dest="set_min_confidence", type=float,
                                 help=f"Set default minimum confidence (current: {config.get_default_min_confidence()})")
    defaults_parser.add_argument("--top-k", dest="set_top_k", type=int,
                                 help=f"Set default top-k (current: {config.get_default_top_k()})")
    defaults_parser.set_defaults(func=defaults_command)

    return parser


def main():
    """Main entry point for the CLI."""
    parser = build_parser()
    args = parser.parse_args()
    setup_logging(args.verbose)

    if not getattr(args, "func", None):
        parser.print_help()
        sys.exit(EXIT_USAGE)

    try:
        settings = config.resolve_config(args.config, collect_overrides(args))
        args.func(args, settings)
    except config.ConfigError as e:
        console.print(f"[bold red]Error:[/bold red] {e}")
        sys.exit(EXIT_USAGE)
    except DATA_ERRORS as e:
        console.print(f"[bold red]Error:[/bold red] {e}")
        sys.exit(EXIT_DATA)
    except Exception as e:
        logger.debug("Unhandled error", exc_info=True)
        console.print(f"[bold red]Internal error:[/bold red] {type(e).__name__}: {e}")
        sys.exit(EXIT_INTERNAL)


if __name__ == "__main__":
    main()
