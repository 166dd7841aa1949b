"""
Configuration access for the PDSketch toolkit.

Defaults live in `settings.PDSKETCH` (see pdsketch/settings.py). This module
merges one section of it over the built-in fallbacks below and then applies
per-call overrides (typically command-line flags, or a JSON config file
merged below the flags).

Typical usage:
    train_cfg = get_section("TRAIN", {"epochs": 3})
"""

import copy
import json
from pathlib import Path

from django.conf import settings

from .exceptions import ConfigError


# ------------------------------------------------------------------------------
# BUILT-IN FALLBACKS
# ------------------------------------------------------------------------------

DEFAULTS = {
    "ARCH": {"hidden": [64, 64], "nonlinearity": "relu", "encoder": "identity"},
    "TRAIN": {
        "lr": 1e-3,
        "batch_size": 32,
        "epochs": 10,
        "lambda_goal": 1.0,
        "lambda_trans": 1.0,
        "lambda_look": 1.0,
        "clip_norm": 10.0,
        "optimizer": "adam",
        "holdout": 0.1,
    },
    "DISCRETIZE": {
        "bins": 128,
        "max_iter": 100,
        "finetune": False,
        "finetune_lr": 0.05,
        "max_states": 400,
    },
    "FOIL": {"min_precision": 0.95, "max_clause_length": 6},
    "SEARCH": {"max_nodes": 20000, "max_seconds": 120.0, "weight": 1.0, "round_decimals": 4},
    "GRID": {"size": 7, "n_doors": 4, "n_objects": 4},
}


# ------------------------------------------------------------------------------
# PUBLIC FUNCTIONS
# ------------------------------------------------------------------------------

def default_seed():
    """Return the project-wide default seed (0 unless overridden in settings)."""
    return int(getattr(settings, "PDSKETCH", {}).get("SEED", 0))


def record_runs():
    """Whether run manifests should also be stored in the database."""
    return bool(getattr(settings, "PDSKETCH", {}).get("RECORD_RUNS", True))


def get_section(name, overrides=None):
    """
    Return the merged configuration dict for one section.

    Precedence (lowest to highest): built-in fallback, settings.PDSKETCH,
    `overrides`. Keys whose override value is None are ignored, so argparse
    defaults of None never clobber settings.

    Args:
        name (str): Section name, e.g. "TRAIN".
        overrides (dict, optional): Highest-precedence values.

    Returns:
        dict: A fresh, independent copy.

    Raises:
        ConfigError: Unknown section or unknown key.
    """
    if name not in DEFAULTS:
        raise ConfigError(f"unknown configuration section {name!r}")

    merged = copy.deepcopy(DEFAULTS[name])
    project = getattr(settings, "PDSKETCH", {}).get(name, {})
    for layer in (project, overrides or {}):
        for key, value in layer.items():
            if key not in merged:
                raise ConfigError(f"unknown key {key!r} in configuration section {name}")
            if value is not None:
                merged[key] = copy.deepcopy(value)
    return merged


def load_json_config(path):
    """
    Load a JSON config file of the form {"TRAIN": {...}, "SEARCH": {...}}.

    Args:
        path (str | Path | None): File to read; None yields an empty dict.

    Returns:
        dict: Section name -> overrides.
    """
    if not path:
        return {}
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return data


def merge_with_flags(file_section, flags):
    """Merge a config-file section below explicit command-line flags (flags win)."""
    merged = dict(file_section or {})
    merged.update({k: v for k, v in flags.items() if v is not None})
    return merged
