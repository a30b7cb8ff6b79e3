"""
Transaction ingestion for BasketLab.

This module holds the core data types that flow through the pipeline
(catalog, transaction table, basket dataset, daily series) and the
operations that build them from raw receipt files.
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from datetime import date
from functools import cached_property
from typing import Dict, Iterable, List, Optional, TextIO, Tuple

import numpy as np
import pandas as pd

logger = logging.getLogger(__name__)


class IngestError(Exception):
    """Exception raised for ingestion and dataset-shape errors."""
    pass


class RowError(IngestError):
    """Exception raised for a bad value in a specific input row."""

    def __init__(self, message: str, line: int, column: Optional[str] = None):
        location = f"line {line}" if column is None else f"line {line}, column '{column}'"
        super().__init__(f"{location}: {message}")
        self.line = line
        self.column = column


@dataclass(frozen=True)
class ItemCatalog:
    """Ordered, duplicate-free list of item codes."""

    items: Tuple[str, ...]
    index: Dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        items = tuple(self.items)
        index = {code: position for position, code in enumerate(items)}
        if len(index) != len(items):
            duplicates = sorted(code for code, count in Counter(items).items() if count > 1)
            raise IngestError(f"Duplicate item codes in catalog: {', '.join(duplicates)}")
        object.__setattr__(self, "items", items)
        object.__setattr__(self, "index", index)

    def __len__(self) -> int:
        return len(self.items)

    def __contains__(self, code: str) -> bool:
        return code in self.index

    def position(self, code: str) -> int:
        """Get the zero-based index of an item code."""
        try:
            return self.index[code]
        except KeyError:
            raise IngestError(f"Unknown item code: {code}") from None

    def codes(self, indices: Iterable[int]) -> List[str]:
        """Map item indices back to their codes."""
        return [self.items[i] for i in indices]

    def subset(self, indices: Iterable[int]) -> "ItemCatalog":
        """Catalog restricted to the given indices, keeping catalog order."""
        return ItemCatalog(tuple(self.items[i] for i in sorted(set(indices))))


@dataclass(frozen=True, eq=False)
class TransactionTable:
    """Dated rows of per-item purchase quantities."""

    dates: Tuple[date, ...]
    quantities: np.ndarray  # shape (rows, items), non-negative integers
    catalog: ItemCatalog

    def __post_init__(self):
        quantities = np.asarray(self.quantities, dtype=np.int64).reshape(
            len(self.dates), len(self.catalog)
        )
        if (quantities < 0).any():
            raise IngestError("Transaction quantities must be non-negative")
        quantities.setflags(write=False)
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "quantities", quantities)

    def __len__(self) -> int:
        return len(self.dates)

    @classmethod
    def empty(cls, catalog: Optional[ItemCatalog] = None) -> "TransactionTable":
        catalog = catalog or ItemCatalog(())
        return cls((), np.zeros((0, len(catalog)), dtype=np.int64), catalog)


@dataclass(frozen=True)
class BasketDataset:
    """Binarized, dated baskets over an item catalog."""

    dates: Tuple[date, ...]
    itemsets: Tuple[Tuple[int, ...], ...]
    catalog: ItemCatalog

    def __post_init__(self):
        if len(self.dates) != len(self.itemsets):
            raise IngestError("Basket dates and itemsets differ in length")
        size = len(self.catalog)
        itemsets = []
        for itemset in self.itemsets:
            itemset = tuple(int(i) for i in itemset)
            if any(a >= b for a, b in zip(itemset, itemset[1:])):
                raise IngestError(f"Basket itemset {itemset} is not strictly increasing")
            if itemset and (itemset[0] < 0 or itemset[-1] >= size):
                raise IngestError(f"Basket itemset {itemset} references unknown items")
            itemsets.append(itemset)
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "itemsets", tuple(itemsets))

    def __len__(self) -> int:
        return len(self.itemsets)

    @cached_property
    def matrix(self) -> np.ndarray:
        """Boolean basket-by-item incidence matrix."""
        matrix = np.zeros((len(self.itemsets), len(self.catalog)), dtype=bool)
        for row, itemset in enumerate(self.itemsets):
            matrix[row, list(itemset)] = True
        matrix.setflags(write=False)
        return matrix

    def support_count(self, items: Iterable[int]) -> int:
        """Number of baskets containing every item in the given set."""
        columns = sorted(set(items))
        if not columns:
            return len(self)
        return int(self.matrix[:, columns].all(axis=1).sum())


@dataclass(frozen=True, eq=False)
class DailySeries:
    """Per-item sales totals over a contiguous range of days."""

    days: Tuple[date, ...]
    totals: np.ndarray  # shape (items, days)
    catalog: ItemCatalog

    def __post_init__(self):
        totals = np.asarray(self.totals, dtype=np.int64).reshape(len(self.catalog), len(self.days))
        totals.setflags(write=False)
        object.__setattr__(self, "days", tuple(self.days))
        object.__setattr__(self, "totals", totals)

    def __len__(self) -> int:
        return len(self.days)

    def item_vector(self, code: str) -> np.ndarray:
        """Daily totals for one item code."""
        return self.totals[self.catalog.position(code)]

    def head(self, n_days: int) -> "DailySeries":
        """Series restricted to its first n_days days."""
        return DailySeries(self.days[:n_days], self.totals[:, :n_days], self.catalog)


@dataclass(frozen=True)
class IngestSchema:
    """Column layout of a raw transaction file."""

    format: str = "wide"
    date_col: str = "date"
    receipt_col: Optional[str] = None
    item_col: Optional[str] = None
    qty_col: Optional[str] = None
    delimiter: str = ","


def parse_transactions(source: TextIO, schema: IngestSchema) -> TransactionTable:
    """
    Parse a delimited transaction stream into a transaction table.

    Args:
        source: Text stream (or path) holding the delimited data
        schema: Column layout describing the file

    Returns:
        TransactionTable with one row per record (wide) or per receipt (long)
    """
    # Imported here so readers can depend on this module's types
    from .readers import get_reader

    reader = get_reader(schema.format, schema)
    table = reader.read(source)
    logger.info("Parsed %d transactions over %d items", len(table), len(table.catalog))
    return table


def binarize(table: TransactionTable) -> BasketDataset:
    """Convert quantities to presence: an item is in a basket iff its quantity is > 0."""
    present = table.quantities > 0
    itemsets = tuple(tuple(int(i) for i in np.flatnonzero(row)) for row in present)
    return BasketDataset(table.dates, itemsets, table.catalog)


def aggregate_daily(table: TransactionTable) -> DailySeries:
    """
    Sum quantities per item per day over the table's full date range.

    Days between the first and last transaction with no sales are filled with 0.
    """
    if len(table) == 0:
        raise IngestError("no transactions to aggregate")

    frame = pd.DataFrame(
        table.quantities,
        index=pd.to_datetime(list(table.dates)),
        columns=range(len(table.catalog)),
    )
    daily = frame.groupby(level=0).sum()
    full_range = pd.date_range(daily.index.min(), daily.index.max(), freq="D")
    daily = daily.reindex(full_range, fill_value=0)

    days = tuple(ts.date() for ts in daily.index)
    totals = daily.to_numpy(dtype=np.int64).T
    logger.info("Aggregated %d transactions into %d days", len(table), len(days))
    return DailySeries(days, totals, table.catalog)


def top_k_items(series: DailySeries, k: int) -> Tuple[int, ...]:
    """
    Rank items by total sales, best first; ties go to the earlier catalog index.

    Args:
        series: Daily sales series
        k: Number of items to return

    Returns:
        Up to k item indices
    """
    if k < 1:
        raise IngestError(f"k must be at least 1, got {k}")

    grand_totals = series.totals.sum(axis=1)
    ranked = sorted(range(len(series.catalog)), key=lambda j: (-int(grand_totals[j]), j))
    return tuple(ranked[:k])
