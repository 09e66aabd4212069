"""
Logging Setup
One stderr handler with the project format; called once by the CLI
"""

import logging
from typing import Optional

import config


def setup_logging(level: Optional[str] = None, verbose: bool = False) -> logging.Logger:
    """Configure the root logger; ``verbose`` forces DEBUG"""
    name = "DEBUG" if verbose else (level or config.LOG_LEVEL)
    numeric = logging.getLevelName(name.upper())
    if not isinstance(numeric, int):
        raise ValueError(f"unknown log level {name!r}")
    logging.basicConfig(level=numeric, format=config.LOG_FORMAT, force=True)
    return logging.getLogger("ape")
