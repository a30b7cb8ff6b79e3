"""
Tests for the shared numeric helpers.
"""

import unittest
from fractions import Fraction

import numpy as np

from basketlab.utils import format_number, round_half_up


class TestRoundHalfUp(unittest.TestCase):
    """Test suite for round_half_up."""

    def test_ties_go_up(self):
        self.assertEqual(round_half_up(2.5), 3)
        self.assertEqual(round_half_up(16.75, 1), 16.8)
        self.assertEqual(round_half_up(Fraction(191, 2)), 96)

    def test_numpy_scalars(self):
        self.assertEqual(round_half_up(np.float64(10.000000000000002)), 10)
        self.assertEqual(round_half_up(np.float64(2.5)), 3)
        self.assertEqual(round_half_up(np.float32(0.25), 1), 0.3)
        self.assertEqual(round_half_up(np.int64(7)), 7)
        self.assertIsInstance(round_half_up(np.float64(4.4)), int)

    def test_non_finite(self):
        with self.assertRaises(ValueError):
            round_half_up(float("nan"))
        with self.assertRaises(ValueError):
            round_half_up(np.float64("inf"))


class TestFormatNumber(unittest.TestCase):
    """Test suite for format_number."""

    def test_trailing_zeros_dropped(self):
        self.assertEqual(format_number(15.0), "15")
        self.assertEqual(format_number(16.80), "16.8")
        self.assertEqual(format_number(np.float64(36.5)), "36.5")
        self.assertEqual(format_number(np.int64(3)), "3")


if __name__ == "__main__":
    unittest.main()
