"""
Long transaction reader: one line per receipt item.
"""

import numpy as np
import pandas as pd

from ..ingest import IngestError, ItemCatalog, RowError, TransactionTable
from .base import TransactionReader


class LongReader(TransactionReader):
    """Reader for (receipt, date, item, quantity) line-item files."""

    def parse(self, frame: pd.DataFrame) -> TransactionTable:
        """Group line items by receipt id and date, summing repeated items."""
        schema = self.schema
        if not (schema.receipt_col and schema.item_col and schema.qty_col):
            raise IngestError("Long format needs receipt, item and quantity column names")
        self.require_columns(frame, [schema.receipt_col, schema.item_col, schema.qty_col])

        codes = frame[schema.item_col].str.strip()
        catalog = ItemCatalog(tuple(pd.unique(codes[codes != ""])))
        if frame.empty:
            return TransactionTable.empty(catalog)

        blank = (codes == "").to_numpy()
        if blank.any():
            row = int(np.flatnonzero(blank)[0])
            raise RowError("missing item code", self.line_of(frame, row), schema.item_col)

        dates = self.parse_dates(frame)
        quantities = self.parse_quantities(frame, schema.qty_col)

        keys = pd.DataFrame({
            "receipt": frame[schema.receipt_col].str.strip(),
            "date": pd.Series(dates, index=frame.index),
        })
        # First-appearance order of (receipt, date) groups
        group_ids = keys.groupby(["receipt", "date"], sort=False).ngroup().to_numpy()
        n_groups = int(group_ids.max()) + 1

        item_ids = np.array([catalog.index[code] for code in codes])
        matrix = np.zeros((n_groups, len(catalog)), dtype=np.int64)
        np.add.at(matrix, (group_ids, item_ids), quantities)

        group_dates = [None] * n_groups
        for group, day in zip(group_ids, dates):
            if group_dates[group] is None:
                group_dates[group] = day

        return TransactionTable(tuple(group_dates), matrix, catalog)
