"""
Tests for target-driven data reduction.
"""

import unittest
from datetime import date
from itertools import combinations

import numpy as np
from hypothesis import assume, given, settings, strategies as st

from basketlab.ingest import BasketDataset, ItemCatalog
from basketlab.reduction import (
    AttributePolicy,
    ReductionError,
    ReductionSpec,
    cooccurrence_counts,
    reduce,
)

DAY = date(2014, 1, 5)


def make_baskets(itemsets, n_items):
    return BasketDataset(
        tuple(DAY for _ in itemsets),
        tuple(tuple(sorted(set(b))) for b in itemsets),
        ItemCatalog(tuple(f"i{j}" for j in range(n_items))),
    )


@st.composite
def reduction_cases(draw):
    n_items = draw(st.integers(1, 8))
    itemsets = draw(st.lists(st.sets(st.integers(0, n_items - 1)), min_size=1, max_size=40))
    targets = draw(st.sets(st.integers(0, n_items - 1), min_size=1))
    return make_baskets(itemsets, n_items), frozenset(f"i{t}" for t in targets)


def support_by_code(baskets, codes):
    """Support of an itemset given by codes; 0 when a code is not in the catalog."""
    if any(code not in baskets.catalog for code in codes):
        return 0
    return baskets.support_count([baskets.catalog.position(code) for code in codes])


class TestReduce(unittest.TestCase):
    """Test suite for reduce."""

    def setUp(self):
        # i0 is the target; i1 co-occurs with it; i2 never does
        self.baskets = make_baskets([[0, 1], [0], [2], [1, 2], []], 3)

    def test_drops_baskets_without_targets(self):
        reduced, stats = reduce(self.baskets, ReductionSpec({"i0"}))
        self.assertEqual(stats.rows_before, 5)
        self.assertEqual(stats.rows_after, 2)
        self.assertEqual(reduced.catalog.items, ("i0", "i1"))
        self.assertEqual(reduced.itemsets, ((0, 1), (0,)))

    def test_targets_only_policy(self):
        reduced, stats = reduce(self.baskets, ReductionSpec({"i0"}, AttributePolicy.TARGETS_ONLY))
        self.assertEqual(reduced.catalog.items, ("i0",))
        self.assertEqual(stats.attrs_after, 1)
        self.assertEqual(stats.to_dict()["attrs_before"], 3)

    def test_min_cooccurrence(self):
        baskets = make_baskets([[0, 1], [0, 1], [0, 2]], 3)
        reduced, _ = reduce(baskets, ReductionSpec({"i0"}, min_cooccurrence=2))
        self.assertEqual(reduced.catalog.items, ("i0", "i1"))

    def test_policy_from_string(self):
        spec = ReductionSpec({"i0"}, "targets_only")
        self.assertIs(spec.attribute_policy, AttributePolicy.TARGETS_ONLY)

    def test_removing_everything_is_an_error(self):
        baskets = make_baskets([[1], [2]], 3)
        with self.assertRaises(ReductionError) as ctx:
            reduce(baskets, ReductionSpec({"i0"}))
        self.assertIn("reduction removed all instances", str(ctx.exception))

    def test_unknown_and_empty_targets(self):
        with self.assertRaises(ReductionError):
            reduce(self.baskets, ReductionSpec({"nope"}))
        with self.assertRaises(ReductionError):
            reduce(self.baskets, ReductionSpec(frozenset()))

    def test_idempotent(self):
        spec = ReductionSpec({"i0"})
        once, _ = reduce(self.baskets, spec)
        twice, stats = reduce(once, spec)
        self.assertEqual(twice, once)
        self.assertEqual(stats.rows_before, stats.rows_after)

    @settings(derandomize=True, deadline=None, max_examples=100)
    @given(reduction_cases())
    def test_target_statistics_preserved(self, case):
        baskets, targets = case
        target_columns = [baskets.catalog.position(code) for code in targets]
        assume(baskets.matrix[:, target_columns].any())

        reduced, stats = reduce(baskets, ReductionSpec(targets))
        self.assertLessEqual(stats.rows_after, stats.rows_before)
        self.assertLessEqual(stats.attrs_after, stats.attrs_before)

        codes = baskets.catalog.items
        for size in range(1, min(len(codes), 3) + 1):
            for itemset in combinations(codes, size):
                if not targets & set(itemset):
                    continue
                self.assertEqual(
                    support_by_code(reduced, itemset), support_by_code(baskets, itemset), itemset
                )

        # Rules whose antecedent involves a target keep their confidence
        for size in range(1, min(len(codes), 3) + 1):
            for itemset in combinations(codes, size):
                for split in range(1, size):
                    for antecedent in combinations(itemset, split):
                        if not targets & set(antecedent):
                            continue
                        before = support_by_code(baskets, antecedent)
                        if before == 0:
                            continue
                        self.assertEqual(
                            support_by_code(reduced, itemset) / support_by_code(reduced, antecedent),
                            support_by_code(baskets, itemset) / before,
                        )

    @settings(derandomize=True, deadline=None, max_examples=100)
    @given(reduction_cases())
    def test_targets_only_preserves_target_itemsets(self, case):
        baskets, targets = case
        target_columns = [baskets.catalog.position(code) for code in targets]
        assume(baskets.matrix[:, target_columns].any())

        reduced, _ = reduce(baskets, ReductionSpec(targets, AttributePolicy.TARGETS_ONLY))
        self.assertEqual(set(reduced.catalog.items), set(targets))
        for size in range(1, len(targets) + 1):
            for itemset in combinations(sorted(targets), size):
                self.assertEqual(support_by_code(reduced, itemset), support_by_code(baskets, itemset))

    @settings(derandomize=True, deadline=None, max_examples=100)
    @given(reduction_cases(), st.sets(st.integers(0, 7)))
    def test_more_targets_never_fewer_rows(self, case, extra):
        baskets, targets = case
        target_columns = [baskets.catalog.position(code) for code in targets]
        assume(baskets.matrix[:, target_columns].any())
        larger = targets | {f"i{j}" for j in extra if j < len(baskets.catalog)}

        _, small = reduce(baskets, ReductionSpec(targets))
        _, large = reduce(baskets, ReductionSpec(larger))
        self.assertGreaterEqual(large.rows_after, small.rows_after)
        self.assertEqual(large.rows_before, small.rows_before)


class TestCooccurrenceCounts(unittest.TestCase):
    """Test suite for cooccurrence_counts."""

    def test_counts(self):
        baskets = make_baskets([[0, 1], [0], [2], [1, 2]], 3)
        self.assertEqual(cooccurrence_counts(baskets, [0]).tolist(), [2, 1, 0])

    def test_chunked_counts_match(self):
        rng = np.random.default_rng(3)
        itemsets = [list(np.flatnonzero(rng.random(6) < 0.3)) for _ in range(50)]
        baskets = make_baskets(itemsets, 6)
        expected = cooccurrence_counts(baskets, [1, 4])
        for chunk_size in (1, 7, 50, 64):
            np.testing.assert_array_equal(
                cooccurrence_counts(baskets, [1, 4], chunk_size=chunk_size), expected
            )

    def test_target_out_of_range(self):
        with self.assertRaises(ReductionError):
            cooccurrence_counts(make_baskets([[0]], 1), [3])


if __name__ == "__main__":
    unittest.main()
