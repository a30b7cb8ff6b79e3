"""
Seeded synthetic basket generator for BasketLab.

Baskets draw every item independently from its base probability; planted
rules then force the consequent into baskets holding the antecedent with
the rule's conditional probability. Output is a wide transaction CSV that
`parse_transactions` reads back.
"""

import logging
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .config import ConfigError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PlantedRule:
    """Antecedent item indices, consequent item indices and P(consequent | antecedent) boost."""

    antecedent: Tuple[int, ...]
    consequent: Tuple[int, ...]
    probability: float

    def __post_init__(self):
        object.__setattr__(self, "antecedent", tuple(sorted(self.antecedent)))
        object.__setattr__(self, "consequent", tuple(sorted(self.consequent)))


@dataclass(frozen=True)
class SyntheticSpec:
    """Shape, planted structure and seed of a synthetic dataset."""

    n_items: int = 20
    n_baskets: int = 10_000
    day_span: int = 60
    planted_rules: Tuple[PlantedRule, ...] = ()
    base_probabilities: Union[float, Tuple[float, ...]] = 0.05
    seed: int = 42
    start_date: date = date(2014, 1, 1)
    max_quantity: int = 3
    code_prefix: str = "item"
    date_col: str = "date"

    def item_codes(self) -> Tuple[str, ...]:
        width = len(str(self.n_items))
        return tuple(f"{self.code_prefix}{j + 1:0{width}d}" for j in range(self.n_items))

    def base_vector(self) -> np.ndarray:
        if isinstance(self.base_probabilities, (int, float)):
            return np.full(self.n_items, float(self.base_probabilities))
        return np.asarray(self.base_probabilities, dtype=float)

    def validate(self) -> None:
        if self.n_items < 1 or self.n_baskets < 1 or self.day_span < 1:
            raise ConfigError("Item count, basket count and day span must all be at least 1")
        if self.max_quantity < 1:
            raise ConfigError(f"max_quantity must be at least 1, got {self.max_quantity}")

        base = self.base_vector()
        if base.shape != (self.n_items,):
            raise ConfigError(
                f"Expected {self.n_items} base probabilities, got {base.size}"
            )
        if ((base < 0) | (base > 1)).any():
            raise ConfigError("Base probabilities must lie within [0, 1]")

        for rule in self.planted_rules:
            if not rule.antecedent or not rule.consequent:
                raise ConfigError("Planted rules need a non-empty antecedent and consequent")
            if set(rule.antecedent) & set(rule.consequent):
                raise ConfigError(
                    f"Planted antecedent {rule.antecedent} overlaps consequent {rule.consequent}"
                )
            if any(not 0 <= j < self.n_items for j in rule.antecedent + rule.consequent):
                raise ConfigError(f"Planted rule items out of range for {self.n_items} items")
            if not 0.0 <= rule.probability <= 1.0:
                raise ConfigError(f"Planted probability must lie within [0, 1], got {rule.probability}")


def synthesize_presence(spec: SyntheticSpec, rng: np.random.Generator) -> np.ndarray:
    """Draw the boolean basket-by-item presence matrix."""
    present = rng.random((spec.n_baskets, spec.n_items)) < spec.base_vector()
    for rule in spec.planted_rules:
        holds_antecedent = present[:, list(rule.antecedent)].all(axis=1)
        forced = holds_antecedent & (rng.random(spec.n_baskets) < rule.probability)
        present[np.ix_(forced, list(rule.consequent))] = True
    return present


def synthesize_frame(spec: SyntheticSpec) -> pd.DataFrame:
    """Build the wide transaction frame for a spec."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    present = synthesize_presence(spec, rng)
    quantities = np.where(
        present, rng.integers(1, spec.max_quantity + 1, size=present.shape), 0
    )

    # Baskets are spread evenly over the day span, in order
    offsets = (np.arange(spec.n_baskets) * spec.day_span) // spec.n_baskets
    days = pd.Timestamp(spec.start_date) + pd.to_timedelta(offsets, unit="D")

    frame = pd.DataFrame(quantities, columns=list(spec.item_codes()))
    frame.insert(0, spec.date_col, days.strftime("%Y-%m-%d"))
    return frame


def generate_synthetic(spec: SyntheticSpec, destination: Union[str, Path]) -> Path:
    """
    Write a synthetic wide transaction file.

    Args:
        spec: Generator settings; the same spec always yields the same file
        destination: CSV path to write

    Returns:
        The path written
    """
    frame = synthesize_frame(spec)
    path = Path(destination)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n")
    logger.info(
        "Wrote %d synthetic baskets over %d items and %d days to %s",
        spec.n_baskets, spec.n_items, spec.day_span, path,
    )
    return path


def parse_planted_rule(text: str, codes: Sequence[str]) -> PlantedRule:
    """
    Parse a planted rule written as "A,B->C:0.9", by item code or 1-based position.
    """
    try:
        body, probability = text.rsplit(":", 1)
        left, right = body.split("->")
    except ValueError:
        raise ConfigError(f"Planted rule '{text}' must look like 'A,B->C:0.9'") from None

    def resolve(token: str) -> int:
        token = token.strip()
        if token in codes:
            return list(codes).index(token)
        if token.isdigit() and 1 <= int(token) <= len(codes):
            return int(token) - 1
        raise ConfigError(f"Unknown item '{token}' in planted rule '{text}'")

    try:
        value = float(probability)
    except ValueError:
        raise ConfigError(f"Invalid probability in planted rule '{text}'") from None
    return PlantedRule(
        tuple(resolve(t) for t in left.split(",") if t.strip()),
        tuple(resolve(t) for t in right.split(",") if t.strip()),
        value,
    )
