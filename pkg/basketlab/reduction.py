"""
Target-driven data reduction for BasketLab.

Baskets sharing no item with the analysis targets are dropped, then the
attribute set is cut down to the targets (and, optionally, the items
that co-occur with them). Support counts of every itemset that touches a
target are unchanged by the reduction.
"""

import logging
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Dict, FrozenSet, Iterable, Optional, Tuple

import numpy as np

from .ingest import BasketDataset, ItemCatalog

logger = logging.getLogger(__name__)


class ReductionError(Exception):
    """Exception raised for reduction errors."""
    pass


class AttributePolicy(str, Enum):
    """Which attributes survive reduction."""

    TARGETS_ONLY = "targets_only"
    TARGETS_PLUS_COOCCURRING = "cooccur"


@dataclass(frozen=True)
class ReductionSpec:
    """Analysis targets and the attribute retention policy."""

    targets: FrozenSet[str]
    attribute_policy: AttributePolicy = AttributePolicy.TARGETS_PLUS_COOCCURRING
    min_cooccurrence: int = 1

    def __post_init__(self):
        object.__setattr__(self, "targets", frozenset(self.targets))
        object.__setattr__(self, "attribute_policy", AttributePolicy(self.attribute_policy))

    def resolve(self, catalog: ItemCatalog) -> FrozenSet[int]:
        """Validate the spec against a catalog and return target indices."""
        if not self.targets:
            raise ReductionError("Reduction needs at least one target item")
        unknown = sorted(code for code in self.targets if code not in catalog)
        if unknown:
            raise ReductionError(f"Unknown target item(s): {', '.join(unknown)}")
        if (self.attribute_policy is AttributePolicy.TARGETS_PLUS_COOCCURRING
                and self.min_cooccurrence < 1):
            raise ReductionError(
                f"min_cooccurrence must be at least 1, got {self.min_cooccurrence}"
            )
        return frozenset(catalog.index[code] for code in self.targets)


@dataclass(frozen=True)
class ReductionStats:
    """Dataset size before and after reduction."""

    rows_before: int
    rows_after: int
    attrs_before: int
    attrs_after: int

    def to_dict(self) -> Dict[str, int]:
        return asdict(self)


def cooccurrence_counts(
    baskets: BasketDataset,
    targets: Iterable[int],
    chunk_size: Optional[int] = None,
) -> np.ndarray:
    """
    Count, per item, the baskets holding that item together with at least one target.

    Args:
        baskets: Dataset to scan
        targets: Target item indices
        chunk_size: Optional basket-range partition size; the counts are summed across partitions

    Returns:
        Integer vector indexed by item
    """
    columns = sorted(set(targets))
    size = len(baskets.catalog)
    if any(t < 0 or t >= size for t in columns):
        raise ReductionError(f"Target indices {columns} out of range for {size} items")

    matrix = baskets.matrix
    counts = np.zeros(size, dtype=np.int64)
    if not columns or len(baskets) == 0:
        return counts

    step = chunk_size or len(baskets)
    for start in range(0, len(baskets), step):
        block = matrix[start:start + step]
        hits = block[:, columns].any(axis=1)
        counts += block[hits].sum(axis=0, dtype=np.int64)
    return counts


def reduce(baskets: BasketDataset, spec: ReductionSpec) -> Tuple[BasketDataset, ReductionStats]:
    """
    Drop baskets without targets, then drop attributes outside the retention policy.

    Args:
        baskets: Dataset to reduce
        spec: Targets and attribute policy

    Returns:
        The reduced dataset (with a rebuilt catalog) and its size statistics
    """
    targets = spec.resolve(baskets.catalog)
    target_columns = sorted(targets)

    keep_rows = baskets.matrix[:, target_columns].any(axis=1)
    if not keep_rows.any():
        raise ReductionError("reduction removed all instances")

    if spec.attribute_policy is AttributePolicy.TARGETS_ONLY:
        kept = set(targets)
    else:
        counts = cooccurrence_counts(baskets, targets)
        kept = set(targets) | {int(j) for j in np.flatnonzero(counts >= spec.min_cooccurrence)}

    kept_indices = sorted(kept)
    remap = {old: new for new, old in enumerate(kept_indices)}
    catalog = baskets.catalog.subset(kept_indices)

    dates = []
    itemsets = []
    for row in np.flatnonzero(keep_rows):
        dates.append(baskets.dates[row])
        itemsets.append(tuple(remap[i] for i in baskets.itemsets[row] if i in remap))

    reduced = BasketDataset(tuple(dates), tuple(itemsets), catalog)
    stats = ReductionStats(
        rows_before=len(baskets),
        rows_after=len(reduced),
        attrs_before=len(baskets.catalog),
        attrs_after=len(catalog),
    )
    logger.info(
        "Reduced %d -> %d baskets and %d -> %d attributes",
        stats.rows_before, stats.rows_after, stats.attrs_before, stats.attrs_after,
    )
    return reduced, stats
