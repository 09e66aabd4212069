"""
Utility modules: run-configuration files and logging setup
"""

from src.utils.config_file import (
    ConfigError,
    RunConfig,
    load_run_config,
    parse_config_text,
    valid_keys,
)
from src.utils.logging_setup import setup_logging

__all__ = [
    'ConfigError',
    'RunConfig',
    'load_run_config',
    'parse_config_text',
    'valid_keys',
    'setup_logging'
]
