"""
Base class for transaction file readers.

This module defines the abstract reader plus the column parsing helpers
both input formats share.
"""

import logging
from abc import ABC, abstractmethod
from typing import List, TextIO, Tuple, Union

import numpy as np
import pandas as pd

from ..ingest import IngestError, IngestSchema, RowError, TransactionTable

logger = logging.getLogger(__name__)

# Header occupies line 1
FIRST_DATA_LINE = 2


class TransactionReader(ABC):
    """Abstract base class for transaction file readers."""

    def __init__(self, schema: IngestSchema):
        self.schema = schema

    @abstractmethod
    def parse(self, frame: pd.DataFrame) -> TransactionTable:
        """Build a transaction table from the raw string frame."""
        pass

    def read(self, source: Union[str, TextIO]) -> TransactionTable:
        """Read a delimited source and parse it; empty input gives an empty table."""
        try:
            raw = pd.read_csv(
                source,
                sep=self.schema.delimiter,
                header=None,
                dtype=str,
                keep_default_na=False,
                skip_blank_lines=False,
                skipinitialspace=True,
                encoding="utf-8",
            )
        except FileNotFoundError:
            raise IngestError(f"Input file not found: {source}") from None
        except pd.errors.EmptyDataError:
            logger.warning("Input is empty; producing an empty transaction table")
            return TransactionTable.empty()
        except (pd.errors.ParserError, UnicodeDecodeError) as e:
            raise IngestError(f"Unable to read delimited input: {e}") from e

        # The header is taken from the raw first line so duplicate names are not renamed
        raw = raw.fillna("")
        header = [str(c).strip() for c in raw.iloc[0]]
        duplicates = sorted({c for c in header if header.count(c) > 1})
        if duplicates:
            raise IngestError(f"Duplicate column(s) in header: {', '.join(duplicates)}")

        frame = raw.iloc[1:].copy()
        frame.columns = header
        # Index holds each row's source line number
        frame.index = pd.RangeIndex(FIRST_DATA_LINE, FIRST_DATA_LINE + len(frame))
        frame = frame[~frame.eq("").all(axis=1)]

        self.require_columns(frame, [self.schema.date_col])
        if frame.empty:
            logger.warning("Input has a header but no rows; producing an empty transaction table")
        return self.parse(frame)

    @staticmethod
    def require_columns(frame: pd.DataFrame, columns: List[str]) -> None:
        """Raise if any named column is missing from the header."""
        missing = [c for c in columns if c not in frame.columns]
        if missing:
            raise IngestError(f"Missing column(s): {', '.join(missing)}")

    def parse_dates(self, frame: pd.DataFrame) -> Tuple:
        """Parse the date column as ISO-8601 days, reporting the first bad row."""
        column = self.schema.date_col
        raw = frame[column].str.strip()
        parsed = pd.to_datetime(raw, format="%Y-%m-%d", errors="coerce")
        bad = parsed.isna().to_numpy()
        if bad.any():
            row = int(np.flatnonzero(bad)[0])
            raise RowError(f"malformed date '{raw.iloc[row]}'", self.line_of(frame, row), column)
        return tuple(ts.date() for ts in parsed)

    @staticmethod
    def line_of(frame: pd.DataFrame, row: int) -> int:
        """Source line number of the row at a position."""
        return int(frame.index[row])

    def parse_quantities(self, frame: pd.DataFrame, column: str) -> np.ndarray:
        """Parse a quantity column as non-negative integers; blank cells are 0."""
        raw = frame[column].str.strip()
        values = pd.to_numeric(raw.replace("", "0"), errors="coerce").to_numpy(dtype=float)

        invalid = ~np.isfinite(values) | (values != np.floor(values))
        if invalid.any():
            row = int(np.flatnonzero(invalid)[0])
            raise RowError(f"invalid quantity '{raw.iloc[row]}'", self.line_of(frame, row), column)

        negative = values < 0
        if negative.any():
            row = int(np.flatnonzero(negative)[0])
            raise RowError(f"negative quantity {raw.iloc[row]}", self.line_of(frame, row), column)

        return values.astype(np.int64)
