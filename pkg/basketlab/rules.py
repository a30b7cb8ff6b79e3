"""
Apriori frequent-itemset mining and association rules for BasketLab.
"""

import logging
import math
from dataclasses import dataclass
from itertools import combinations
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .ingest import BasketDataset, ItemCatalog

logger = logging.getLogger(__name__)

DEFAULT_MIN_CONFIDENCE = 0.70
DEFAULT_MIN_SUPPORT = 0.01
DEFAULT_MAX_ITEMSET_SIZE = 5

ANTECEDENT_UNSUPPORTED = "antecedent unsupported"
BELOW_CONFIDENCE = "confidence below threshold"


class MiningError(Exception):
    """Exception raised for mining errors."""
    pass


@dataclass(frozen=True)
class Itemset:
    """Sorted set of item indices with its support count."""

    items: Tuple[int, ...]
    support_count: int

    def __len__(self) -> int:
        return len(self.items)


@dataclass(frozen=True)
class AssociationRule:
    """Rule antecedent -> consequent with its training statistics."""

    antecedent: Itemset
    consequent: Itemset
    joint_support_count: int
    confidence: float
    relative_support: float

    @property
    def items(self) -> Tuple[int, ...]:
        return tuple(sorted(self.antecedent.items + self.consequent.items))


@dataclass(frozen=True)
class MiningParams:
    """Support floor, confidence gate and itemset size cap."""

    min_support: float = DEFAULT_MIN_SUPPORT
    min_confidence: float = DEFAULT_MIN_CONFIDENCE
    max_itemset_size: int = DEFAULT_MAX_ITEMSET_SIZE
    absolute_support: Optional[int] = None

    def validate(self) -> None:
        if not 0.0 <= self.min_confidence <= 1.0:
            raise MiningError(f"min_confidence must be within [0, 1], got {self.min_confidence}")
        if self.max_itemset_size < 1:
            raise MiningError(f"max_itemset_size must be at least 1, got {self.max_itemset_size}")
        if self.absolute_support is None and not 0.0 < self.min_support <= 1.0:
            raise MiningError(f"min_support must be within (0, 1], got {self.min_support}")

    def support_threshold(self, total_baskets: int) -> int:
        """Resolve the support floor to an absolute basket count."""
        self.validate()
        if self.absolute_support is not None:
            threshold = int(self.absolute_support)
        else:
            # Tolerance keeps 0.07 * 100 at 7 rather than 8
            threshold = math.ceil(self.min_support * total_baskets - 1e-9)
        if threshold < 1:
            raise MiningError(f"Support threshold resolves to {threshold}; it must be at least 1")
        return threshold


def _count_support(matrix: np.ndarray, candidates: Sequence[Tuple[int, ...]]) -> List[int]:
    """Count the baskets containing each candidate itemset."""
    return [int(matrix[:, list(candidate)].all(axis=1).sum()) for candidate in candidates]


def _join_level(level: Sequence[Tuple[int, ...]]) -> List[Tuple[int, ...]]:
    """Join k-itemsets sharing a (k-1)-prefix, pruning candidates with an infrequent k-subset."""
    frequent = set(level)
    candidates = []
    ordered = sorted(level)
    for i, first in enumerate(ordered):
        for second in ordered[i + 1:]:
            if first[:-1] != second[:-1]:
                break
            candidate = first + (second[-1],)
            if all(subset in frequent for subset in combinations(candidate, len(candidate) - 1)):
                candidates.append(candidate)
    return candidates


def frequent_itemsets(baskets: BasketDataset, params: MiningParams) -> List[List[Itemset]]:
    """
    Mine all itemsets meeting the support threshold, level by level.

    Args:
        baskets: Binarized dataset
        params: Mining parameters

    Returns:
        Frequent itemsets grouped by size; levels[0] holds the single items
    """
    if len(baskets) == 0:
        raise MiningError("Cannot mine an empty dataset")
    threshold = params.support_threshold(len(baskets))
    matrix = baskets.matrix

    singles = matrix.sum(axis=0)
    level = [
        Itemset((int(j),), int(singles[j]))
        for j in range(len(baskets.catalog))
        if singles[j] >= threshold
    ]
    levels = []
    while level:
        levels.append(level)
        logger.debug("Level %d: %d frequent itemsets", len(level[0]), len(level))
        if len(level[0]) >= params.max_itemset_size:
            break
        candidates = _join_level([itemset.items for itemset in level])
        counts = _count_support(matrix, candidates)
        level = [
            Itemset(candidate, count)
            for candidate, count in zip(candidates, counts)
            if count >= threshold
        ]

    logger.info(
        "Found %d frequent itemsets (threshold %d of %d baskets)",
        sum(len(lvl) for lvl in levels), threshold, len(baskets),
    )
    return levels


def _rule_sort_key(rule: AssociationRule):
    return (
        -rule.confidence,
        -rule.joint_support_count,
        rule.antecedent.items,
        rule.consequent.items,
    )


def generate_rules(
    frequent: Sequence[Sequence[Itemset]],
    total_baskets: int,
    params: MiningParams,
) -> List[AssociationRule]:
    """
    Split every frequent itemset into antecedent -> consequent rules passing the confidence gate.

    Args:
        frequent: Frequent itemsets, as returned by frequent_itemsets
        total_baskets: Dataset size, the relative support denominator
        params: Mining parameters (min_confidence is inclusive)

    Returns:
        Rules sorted by confidence, joint support, then antecedent
    """
    params.validate()
    support: Dict[Tuple[int, ...], int] = {
        itemset.items: itemset.support_count for level in frequent for itemset in level
    }

    def lookup(items: Tuple[int, ...]) -> int:
        try:
            return support[items]
        except KeyError:
            raise MiningError(
                f"Frequent itemset list is missing subset {items}; it must be closed under subsets"
            ) from None

    rules = []
    for level in frequent:
        for itemset in level:
            if len(itemset) < 2:
                continue
            joint = itemset.support_count
            for size in range(1, len(itemset)):
                for antecedent in combinations(itemset.items, size):
                    antecedent_support = lookup(antecedent)
                    confidence = joint / antecedent_support
                    if confidence < params.min_confidence:
                        continue
                    consequent = tuple(i for i in itemset.items if i not in antecedent)
                    rules.append(AssociationRule(
                        antecedent=Itemset(antecedent, antecedent_support),
                        consequent=Itemset(consequent, lookup(consequent)),
                        joint_support_count=joint,
                        confidence=confidence,
                        relative_support=joint / total_baskets,
                    ))

    rules.sort(key=_rule_sort_key)
    logger.info("Generated %d rules at confidence >= %.2f", len(rules), params.min_confidence)
    return rules


def mine_rules(baskets: BasketDataset, params: MiningParams) -> List[AssociationRule]:
    """Frequent itemsets followed by rule generation."""
    return generate_rules(frequent_itemsets(baskets, params), len(baskets), params)


@dataclass(frozen=True)
class RuleCheck:
    """A rule's statistics recomputed on another dataset."""

    rule: AssociationRule
    antecedent_support_count: int
    joint_support_count: int
    confidence: float
    reason: Optional[str] = None

    @property
    def confidence_delta(self) -> float:
        return self.confidence - self.rule.confidence


@dataclass(frozen=True)
class RuleValidation:
    """Rules split into validated and eliminated on a holdout."""

    validated: Tuple[RuleCheck, ...]
    eliminated: Tuple[RuleCheck, ...]


def validate_rules(
    rules: Sequence[AssociationRule],
    catalog: ItemCatalog,
    holdout: BasketDataset,
    min_confidence: float = DEFAULT_MIN_CONFIDENCE,
) -> RuleValidation:
    """
    Recompute each rule's confidence on a holdout dataset and partition the rules.

    Args:
        rules: Rules to check, with indices into `catalog`
        catalog: Catalog the rules were mined against; items are matched to the holdout by code
        holdout: Dataset to recompute statistics on
        min_confidence: Inclusive confidence gate

    Returns:
        RuleValidation keeping the input order within each partition
    """
    validated = []
    eliminated = []
    for rule in rules:
        antecedent = _holdout_columns(rule.antecedent.items, catalog, holdout.catalog)
        joint = _holdout_columns(rule.items, catalog, holdout.catalog)
        antecedent_support = holdout.support_count(antecedent) if antecedent is not None else 0
        joint_support = holdout.support_count(joint) if joint is not None else 0

        if antecedent_support == 0:
            eliminated.append(RuleCheck(rule, 0, 0, 0.0, ANTECEDENT_UNSUPPORTED))
            continue

        confidence = joint_support / antecedent_support
        if confidence >= min_confidence:
            validated.append(RuleCheck(rule, antecedent_support, joint_support, confidence))
        else:
            eliminated.append(
                RuleCheck(rule, antecedent_support, joint_support, confidence, BELOW_CONFIDENCE)
            )

    logger.info("Validated %d rules, eliminated %d", len(validated), len(eliminated))
    return RuleValidation(tuple(validated), tuple(eliminated))


def _holdout_columns(
    items: Sequence[int],
    catalog: ItemCatalog,
    holdout_catalog: ItemCatalog,
) -> Optional[List[int]]:
    """Translate item indices between catalogs; None when any item is absent."""
    columns = []
    for code in catalog.codes(items):
        if code not in holdout_catalog:
            return None
        columns.append(holdout_catalog.index[code])
    return columns
