"""
Transaction file readers for BasketLab.
"""

from .base import TransactionReader
from .long import LongReader
from .wide import WideReader

from ..ingest import IngestError, IngestSchema

# Map of format names to reader classes
READERS = {
    "wide": WideReader,
    "long": LongReader,
}


def get_reader(format_name: str, schema: IngestSchema) -> TransactionReader:
    """
    Get a reader instance by format name.

    Args:
        format_name: Name of the input format
        schema: Column layout handed to the reader

    Returns:
        Reader instance
    """
    if format_name not in READERS:
        raise IngestError(f"Unknown input format: {format_name}")

    reader_class = READERS[format_name]
    return reader_class(schema)
