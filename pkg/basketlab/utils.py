"""
Numeric helpers shared across BasketLab modules.
"""

import math
from decimal import Decimal
from fractions import Fraction
from typing import Union

import numpy as np

Number = Union[int, float, Fraction, Decimal]


def _exact(value: Number) -> Fraction:
    # Floats go through their shortest repr so 2.675 rounds like it prints;
    # numpy scalars are unwrapped first since their repr names the type
    if isinstance(value, (float, np.floating)):
        return Fraction(Decimal(repr(float(value))))
    if isinstance(value, np.integer):
        return Fraction(int(value))
    return Fraction(value)


def round_half_up(value: Number, digits: int = 0) -> Union[int, float]:
    """Round to the given number of decimals, ties going up (2.5 -> 3, 16.25 -> 16.3).

    Args:
        value: Number to round
        digits: Decimal places to keep

    Returns:
        An int when digits is 0, otherwise the nearest float to the rounded value
    """
    if isinstance(value, (float, np.floating)) and not math.isfinite(value):
        raise ValueError(f"Cannot round non-finite value {value}")

    scale = 10 ** digits
    rounded = math.floor(_exact(value) * scale + Fraction(1, 2))
    if digits == 0:
        return int(rounded)
    return float(Fraction(rounded, scale))


def format_number(value: Number) -> str:
    """Format a number without trailing zeros (15.0 -> "15", 16.80 -> "16.8")."""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    text = f"{Decimal(repr(float(value))):f}"
    if "." in text:
        text = text.rstrip("0").rstrip(".")
    return text
