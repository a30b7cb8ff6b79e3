"""
Configuration module for BasketLab.

Handles the built-in defaults, the user's saved defaults and per-run
configuration files. Later layers win: DEFAULT_CONFIG, then the user
file in ~/.config/basketlab/config.json, then a run file given with
--config, then command-line flags.
"""

import copy
import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Union

logger = logging.getLogger(__name__)

# Configuration constants
CONFIG_DIR = Path.home() / ".config" / "basketlab"
CONFIG_FILE = CONFIG_DIR / "config.json"

DEFAULT_CONFIG = {
    "ingest": {
        "format": "wide",  # wide or long
        "date_col": "date",
        "receipt_col": None,
        "item_col": None,
        "qty_col": None,
        "delimiter": ",",
    },
    "reduction": {
        "targets": [],  # empty: the forecast top-k best sellers
        "policy": "cooccur",  # cooccur or targets_only
        "min_cooccurrence": 1,
    },
    "mining": {
        "min_support": 0.01,
        "absolute_support": None,
        "min_confidence": 0.70,
        "max_itemset_size": 5,
    },
    "forecast": {
        "top_k": 4,
        "lag_window": 7,
        "horizon": 5,
        "smoothing": True,
        "smoothing_k": 15,
        "min_leaf": 4,
        "sd_stop_fraction": 0.05,
    },
    "clustering": {
        "k": 4,
        "seed": None,  # None: use pipeline.seed
        "max_iter": 300,
        "tol": 1e-6,
        "normalize": False,
        "n_init": 1,
        "init": "random",
    },
    "accuracy": {
        "threshold_pct": 70,
    },
    "pipeline": {
        "input": None,
        "holdout": None,
        "out_dir": "basketlab-out",
        "seed": 42,
    },
}


class ConfigError(Exception):
    """Exception raised for invalid configuration files or values."""
    pass


def ensure_config_dir():
    """Ensure the configuration directory exists."""
    CONFIG_DIR.mkdir(parents=True, exist_ok=True)


def merge_config(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """
    Merge two config dictionaries section by section.

    Values of None in `override` leave the base value untouched, so unset
    command-line flags can be passed straight through.
    """
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge_config(merged[key], value)
        elif value is not None:
            merged[key] = copy.deepcopy(value)
    return merged


def load_config() -> Dict[str, Any]:
    """Load the user's saved defaults on top of the built-in configuration."""
    if not CONFIG_FILE.exists():
        return copy.deepcopy(DEFAULT_CONFIG)

    try:
        with open(CONFIG_FILE, "r", encoding="utf-8") as f:
            config = json.load(f)
        if not isinstance(config, dict):
            raise ValueError("top level is not an object")
        return merge_config(DEFAULT_CONFIG, config)
    except (json.JSONDecodeError, ValueError, IOError) as e:
        # If there's an error reading the user file, fall back to defaults
        logger.warning("Ignoring unreadable config file %s: %s", CONFIG_FILE, e)
        return copy.deepcopy(DEFAULT_CONFIG)


def save_config(config: Dict[str, Any]):
    """Save configuration to the user config file."""
    ensure_config_dir()

    try:
        with open(CONFIG_FILE, "w", encoding="utf-8") as f:
            json.dump(config, f, indent=4)
    except IOError as e:
        raise ConfigError(f"Error saving configuration: {e}") from e


def load_run_file(path: Union[str, Path]) -> Dict[str, Any]:
    """
    Read a run configuration file.

    Unlike the user file, a run file must be readable and may only use known
    sections and keys.
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise ConfigError(f"Config file not found: {path}") from None
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ConfigError(f"Malformed config file {path}: {e}") from e

    if not isinstance(data, dict):
        raise ConfigError(f"Config file {path} must hold a JSON object")
    for section, values in data.items():
        if section not in DEFAULT_CONFIG:
            raise ConfigError(f"Unknown config section '{section}' in {path}")
        if not isinstance(values, dict):
            raise ConfigError(f"Config section '{section}' in {path} must be an object")
        unknown = sorted(set(values) - set(DEFAULT_CONFIG[section]))
        if unknown:
            raise ConfigError(f"Unknown key(s) in section '{section}': {', '.join(unknown)}")
    return data


def resolve_config(
    run_file: Optional[Union[str, Path]] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> Dict[str, Any]:
    """Build the effective configuration from every layer."""
    config = load_config()
    if run_file:
        config = merge_config(config, load_run_file(run_file))
    if overrides:
        config = merge_config(config, overrides)
    return config


def _set_default(section: str, key: str, value: Any):
    config = load_config()

    if section not in config:
        config[section] = {}

    config[section][key] = value
    save_config(config)


def get_default_seed() -> int:
    """Get the default random seed."""
    config = load_config()
    return config.get("pipeline", {}).get("seed", 42)


def set_default_seed(seed: int):
    """Set the default random seed."""
    _set_default("pipeline", "seed", seed)


def get_default_out_dir() -> str:
    """Get the default output directory."""
    config = load_config()
    return config.get("pipeline", {}).get("out_dir", "basketlab-out")


def set_default_out_dir(out_dir: str):
    """Set the default output directory."""
    _set_default("pipeline", "out_dir", out_dir)


def get_default_min_confidence() -> float:
    """Get the default minimum rule confidence."""
    config = load_config()
    return config.get("mining", {}).get("min_confidence", 0.70)


def set_default_min_confidence(value: float):
    """Set the default minimum rule confidence."""
    if not 0.0 <= value <= 1.0:
        raise ConfigError(f"min_confidence must be within [0, 1], got {value}")
    _set_default("mining", "min_confidence", value)


def get_default_top_k() -> int:
    """Get the default number of best sellers to forecast."""
    config = load_config()
    return config.get("forecast", {}).get("top_k", 4)


def set_default_top_k(value: int):
    """Set the default number of best sellers to forecast."""
    if value < 1:
        raise ConfigError(f"top_k must be at least 1, got {value}")
    _set_default("forecast", "top_k", value)
