"""
Wide transaction reader: one row per receipt, one quantity column per item.
"""

import numpy as np
import pandas as pd

from ..ingest import ItemCatalog, TransactionTable
from .base import TransactionReader


class WideReader(TransactionReader):
    """Reader for the canonical one-column-per-product layout."""

    def parse(self, frame: pd.DataFrame) -> TransactionTable:
        """Every non-date column is an item; its header is the item code."""
        item_columns = [c for c in frame.columns if c != self.schema.date_col]
        catalog = ItemCatalog(tuple(item_columns))
        if frame.empty:
            return TransactionTable.empty(catalog)

        dates = self.parse_dates(frame)
        quantities = np.zeros((len(frame), len(item_columns)), dtype=np.int64)
        for position, column in enumerate(item_columns):
            quantities[:, position] = self.parse_quantities(frame, column)

        return TransactionTable(dates, quantities, catalog)
