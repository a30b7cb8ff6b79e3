"""
Shared rich console and logging setup for BasketLab.
"""

import logging

from rich.console import Console
from rich.logging import RichHandler

# Console for rich output
console = Console()

LEVELS = {0: logging.WARNING, 1: logging.INFO}


def setup_logging(verbosity: int = 0) -> None:
    """Route the package's log records through the rich console.

    Args:
        verbosity: 0 for warnings only, 1 for progress, 2 or more for debug output
    """
    level = LEVELS.get(verbosity, logging.DEBUG)
    handler = RichHandler(console=console, show_path=False, markup=False)
    handler.setFormatter(logging.Formatter("%(message)s"))

    logger = logging.getLogger("basketlab")
    logger.handlers.clear()
    logger.addHandler(handler)
    logger.setLevel(level)
    logger.propagate = False
