"""
Artifact persistence for BasketLab.

This module reads and writes the pipeline's intermediate files: the
`dataset.bl` text format, the JSON artifacts (rules, validation,
forecasts, accuracy reports, clusters) and exported model trees.
"""

import json
import logging
from datetime import date
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .analysis import AccuracyReport, SeriesClusters
from .forecast import LinearModel, ModelTree, Node, TreeParams
from .ingest import (
    BasketDataset,
    IngestError,
    ItemCatalog,
    TransactionTable,
    binarize,
)
from .rules import AssociationRule, Itemset, RuleCheck, RuleValidation

logger = logging.getLogger(__name__)

DATASET_MAGIC = "#basketlab-dataset"
DATASET_VERSION = 1
MODEL_FORMAT = "basketlab-model-tree"
MODEL_VERSION = 1

KIND_TRANSACTIONS = "transactions"
KIND_BASKETS = "baskets"

PathLike = Union[str, Path]
Dataset = Union[TransactionTable, BasketDataset]


class StorageError(Exception):
    """Exception raised for unreadable or malformed artifact files."""
    pass


def save_json(path: PathLike, data: Any) -> None:
    """Write JSON with a stable layout so identical inputs give identical bytes."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(data, f, indent=2, ensure_ascii=False)
        f.write("\n")


def load_json(path: PathLike) -> Any:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError:
        raise StorageError(f"File not found: {path}") from None
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise StorageError(f"Malformed JSON in {path}: {e}") from e


def save_dataset(path: PathLike, dataset: Dataset) -> None:
    """
    Write a transaction table or basket dataset as a `.bl` file.

    Args:
        path: Destination file
        dataset: TransactionTable (keeps quantities) or BasketDataset (binary)
    """
    if isinstance(dataset, TransactionTable):
        kind = KIND_TRANSACTIONS
        rows = [
            " ".join(f"{j}:{int(q)}" for j, q in enumerate(row) if q > 0)
            for row in dataset.quantities
        ]
    else:
        kind = KIND_BASKETS
        rows = [" ".join(str(j) for j in itemset) for itemset in dataset.itemsets]

    output = f"{DATASET_MAGIC} v{DATASET_VERSION}\n"
    output += f"kind: {kind}\n"
    output += f"items: {len(dataset.catalog)}\n"
    output += f"rows: {len(rows)}\n"
    output += "[catalog]\n"
    for code in dataset.catalog.items:
        output += f"{code}\n"
    output += "[baskets]\n"
    for day, row in zip(dataset.dates, rows):
        output += f"{day.isoformat()}\t{row}\n"

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(output)


def _header_value(lines: List[str], line_no: int, key: str) -> str:
    prefix = f"{key}: "
    if line_no >= len(lines) or not lines[line_no].startswith(prefix):
        raise StorageError(f"line {line_no + 1}: expected '{prefix}...'")
    return lines[line_no][len(prefix):]


def load_dataset(path: PathLike) -> Dataset:
    """
    Read a `.bl` file.

    Returns:
        TransactionTable for kind `transactions`, BasketDataset for kind `baskets`
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            lines = f.read().splitlines()
    except FileNotFoundError:
        raise StorageError(f"File not found: {path}") from None

    if not lines or not lines[0].startswith(DATASET_MAGIC):
        raise StorageError(f"{path} is not a BasketLab dataset file")
    version = lines[0][len(DATASET_MAGIC):].strip()
    if version != f"v{DATASET_VERSION}":
        raise StorageError(f"Unsupported dataset version '{version}' in {path}")

    try:
        kind = _header_value(lines, 1, "kind")
        n_items = int(_header_value(lines, 2, "items"))
        n_rows = int(_header_value(lines, 3, "rows"))
    except ValueError as e:
        raise StorageError(f"Malformed header in {path}: {e}") from e
    if kind not in (KIND_TRANSACTIONS, KIND_BASKETS):
        raise StorageError(f"Unknown dataset kind '{kind}' in {path}")

    catalog_start = 5
    basket_start = catalog_start + n_items + 1
    if (len(lines) < basket_start + n_rows or lines[4] != "[catalog]"
            or lines[basket_start - 1] != "[baskets]"):
        raise StorageError(f"Truncated or malformed dataset file: {path}")
    try:
        catalog = ItemCatalog(tuple(lines[catalog_start:catalog_start + n_items]))
    except IngestError as e:
        raise StorageError(f"{path}: {e}") from e

    dates: List[date] = []
    quantities = np.zeros((n_rows, n_items), dtype=np.int64)
    itemsets: List[Tuple[int, ...]] = []
    for offset in range(n_rows):
        line_no = basket_start + offset
        day_text, _, body = lines[line_no].partition("\t")
        try:
            dates.append(date.fromisoformat(day_text))
            if kind == KIND_TRANSACTIONS:
                for token in body.split():
                    index, _, qty = token.partition(":")
                    quantities[offset, _item_index(index, n_items)] = int(qty)
            else:
                itemsets.append(tuple(_item_index(token, n_items) for token in body.split()))
        except (ValueError, IndexError) as e:
            raise StorageError(f"{path}, line {line_no + 1}: {e}") from e

    try:
        if kind == KIND_TRANSACTIONS:
            return TransactionTable(tuple(dates), quantities, catalog)
        return BasketDataset(tuple(dates), tuple(itemsets), catalog)
    except IngestError as e:
        raise StorageError(f"{path}: {e}") from e


def _item_index(token: str, n_items: int) -> int:
    index = int(token)
    if not 0 <= index < n_items:
        raise IndexError(f"item index {index} outside the catalog of {n_items}")
    return index


def load_transactions(path: PathLike) -> TransactionTable:
    """Read a `.bl` file that must still carry quantities."""
    dataset = load_dataset(path)
    if not isinstance(dataset, TransactionTable):
        raise StorageError(
            f"{path} holds binary baskets; daily sales need the quantities written by 'ingest'"
        )
    return dataset


def load_baskets(path: PathLike) -> BasketDataset:
    """Read a `.bl` file as baskets, binarizing transaction files on the way."""
    dataset = load_dataset(path)
    if isinstance(dataset, TransactionTable):
        return binarize(dataset)
    return dataset


def rule_to_dict(rule: AssociationRule, catalog: ItemCatalog) -> Dict[str, Any]:
    return {
        "antecedent": catalog.codes(rule.antecedent.items),
        "consequent": catalog.codes(rule.consequent.items),
        "support_count": rule.joint_support_count,
        "relative_support": rule.relative_support,
        "confidence": rule.confidence,
        "antecedent_support_count": rule.antecedent.support_count,
        "consequent_support_count": rule.consequent.support_count,
    }


def save_rules(path: PathLike, rules: Sequence[AssociationRule], catalog: ItemCatalog) -> None:
    save_json(path, [rule_to_dict(rule, catalog) for rule in rules])


def load_rules(path: PathLike) -> Tuple[ItemCatalog, List[AssociationRule]]:
    """
    Read rules.json.

    Returns:
        A catalog of the codes the rules mention (first-appearance order) and the rules
    """
    records = load_json(path)
    if not isinstance(records, list):
        raise StorageError(f"{path} must hold a JSON array of rules")

    codes: Dict[str, int] = {}
    for record in records:
        for code in list(record.get("antecedent", [])) + list(record.get("consequent", [])):
            codes.setdefault(code, len(codes))
    catalog = ItemCatalog(tuple(codes))

    rules = []
    for position, record in enumerate(records):
        try:
            antecedent = tuple(sorted(codes[c] for c in record["antecedent"]))
            consequent = tuple(sorted(codes[c] for c in record["consequent"]))
            joint = int(record["support_count"])
            confidence = float(record["confidence"])
            antecedent_support = int(
                record.get("antecedent_support_count", round(joint / confidence) if confidence else 0)
            )
            rules.append(AssociationRule(
                antecedent=Itemset(antecedent, antecedent_support),
                consequent=Itemset(consequent, int(record.get("consequent_support_count", joint))),
                joint_support_count=joint,
                confidence=confidence,
                relative_support=float(record["relative_support"]),
            ))
        except (KeyError, TypeError, ValueError) as e:
            raise StorageError(f"{path}: rule {position} is malformed ({e})") from e
    return catalog, rules


def _check_to_dict(check: RuleCheck, catalog: ItemCatalog) -> Dict[str, Any]:
    record = rule_to_dict(check.rule, catalog)
    record.update({
        "holdout_antecedent_support_count": check.antecedent_support_count,
        "holdout_support_count": check.joint_support_count,
        "holdout_confidence": check.confidence,
        "confidence_delta": check.confidence_delta,
    })
    if check.reason:
        record["reason"] = check.reason
    return record


def validation_to_dict(validation: RuleValidation, catalog: ItemCatalog) -> Dict[str, Any]:
    return {
        "validated": [_check_to_dict(check, catalog) for check in validation.validated],
        "eliminated": [_check_to_dict(check, catalog) for check in validation.eliminated],
    }


def _node_to_dict(node: Node) -> Dict[str, Any]:
    record: Dict[str, Any] = {
        "n": node.n,
        "model": {
            "intercept": node.model.intercept,
            "terms": [[index, coef] for index, coef in node.model.terms],
        },
    }
    if not node.is_leaf:
        record["split"] = {"feature": node.split_feature, "threshold": node.threshold}
        record["left"] = _node_to_dict(node.left)
        record["right"] = _node_to_dict(node.right)
    return record


def _node_from_dict(record: Dict[str, Any]) -> Node:
    model = LinearModel(
        float(record["model"]["intercept"]),
        tuple((int(index), float(coef)) for index, coef in record["model"]["terms"]),
    )
    if "split" not in record:
        return Node(model, int(record["n"]))
    return Node(
        model,
        int(record["n"]),
        int(record["split"]["feature"]),
        float(record["split"]["threshold"]),
        _node_from_dict(record["left"]),
        _node_from_dict(record["right"]),
    )


def tree_to_dict(tree: ModelTree) -> Dict[str, Any]:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "params": {
            "smoothing_k": tree.params.smoothing_k,
            "min_leaf": tree.params.min_leaf,
            "sd_stop_fraction": tree.params.sd_stop_fraction,
        },
        "feature_names": list(tree.feature_names),
        "root": _node_to_dict(tree.root),
    }


def tree_from_dict(data: Dict[str, Any]) -> ModelTree:
    if data.get("format") != MODEL_FORMAT or data.get("version") != MODEL_VERSION:
        raise StorageError("Not a supported BasketLab model tree export")
    try:
        params = TreeParams(**data["params"])
        return ModelTree(_node_from_dict(data["root"]), params, tuple(data["feature_names"]))
    except (KeyError, TypeError, ValueError) as e:
        raise StorageError(f"Malformed model tree export: {e}") from e


def save_model_tree(path: PathLike, tree: ModelTree) -> None:
    save_json(path, tree_to_dict(tree))


def load_model_tree(path: PathLike) -> ModelTree:
    return tree_from_dict(load_json(path))


def forecast_to_dict(
    start_day: date,
    forecasts: Dict[str, List[int]],
    params: Dict[str, Any],
    backtests: Optional[Dict[str, Tuple[List[int], List[int]]]] = None,
) -> Dict[str, Any]:
    """Lay out forward forecasts (and optional backtests) per item."""
    items = []
    for code, predicted in forecasts.items():
        record: Dict[str, Any] = {"item": code, "predicted": list(predicted)}
        if backtests and code in backtests:
            backtest_predicted, backtest_actual = backtests[code]
            record["backtest"] = {"predicted": backtest_predicted, "actual": backtest_actual}
        items.append(record)
    return {"start_day": start_day.isoformat(), "params": params, "items": items}


def load_forecast(path: PathLike) -> Dict[str, List[int]]:
    """Read forecast.json into item code -> predicted counts."""
    data = load_json(path)
    try:
        return {record["item"]: [int(v) for v in record["predicted"]] for record in data["items"]}
    except (KeyError, TypeError, ValueError) as e:
        raise StorageError(f"{path} is not a forecast file ({e})") from e


def load_backtests(path: PathLike) -> Dict[str, Tuple[List[int], List[int]]]:
    """Read the backtest (predicted, actual) pairs stored in forecast.json."""
    data = load_json(path)
    try:
        return {
            record["item"]: (
                [int(v) for v in record["backtest"]["predicted"]],
                [int(v) for v in record["backtest"]["actual"]],
            )
            for record in data["items"]
            if "backtest" in record
        }
    except (KeyError, TypeError, ValueError) as e:
        raise StorageError(f"{path} has malformed backtest records ({e})") from e


def load_actuals(path: PathLike) -> Dict[str, List[int]]:
    """
    Read observed daily counts from CSV: first column the product code,
    remaining columns the counts for each forecast day in order.
    """
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except FileNotFoundError:
        raise StorageError(f"File not found: {path}") from None
    except pd.errors.EmptyDataError:
        raise StorageError(f"{path} is empty") from None

    actuals = {}
    product_column = frame.columns[0]
    for position, row in frame.iterrows():
        try:
            actuals[row[product_column].strip()] = [int(v) for v in row.iloc[1:]]
        except ValueError as e:
            raise StorageError(f"{path}, line {position + 2}: {e}") from e
    return actuals


def report_to_dict(report: AccuracyReport) -> Dict[str, Any]:
    """Mirror the accuracy table: product rows, average row and horizon."""
    rows = []
    for code, predicted, actual, accuracy in zip(
        report.products, report.predicted, report.actual, report.accuracy_pct
    ):
        rows.append({
            "product": code,
            "days": [
                {"p": p, "r": r, "pr": pr} for p, r, pr in zip(predicted, actual, accuracy)
            ],
        })
    average = report.average_row
    return {
        "products": rows,
        "average": [
            {"p": p, "r": r, "pr": pr}
            for p, r, pr in zip(average.predicted, average.actual, average.accuracy_pct)
        ],
        "threshold_pct": report.threshold_pct,
        "validity_horizon": report.validity_horizon,
        "note": report.note,
    }


def clusters_to_dict(clusters: SeriesClusters) -> Dict[str, Any]:
    """Plot-ready cluster output: members, centroid profiles and the day axis."""
    catalog = clusters.series.catalog
    result = clusters.result
    groups = []
    for cluster in clusters.volume_order():
        groups.append({
            "cluster": cluster,
            "members": catalog.codes(result.members(cluster)),
            "mean_daily_volume": float(clusters.profiles[cluster].mean()),
            "profile": [float(v) for v in clusters.profiles[cluster]],
        })
    return {
        "k": result.k,
        "inertia": result.inertia,
        "iterations": result.iterations,
        "days": [day.isoformat() for day in clusters.series.days],
        "assignments": {code: result.assignments[i] for i, code in enumerate(catalog.items)},
        "clusters": groups,
    }
