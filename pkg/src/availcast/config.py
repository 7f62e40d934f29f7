"""Pipeline configuration: a single JSON file with a documented key schema.

Defaults are filled in at load time and the fully resolved values are
recorded in every run manifest, so no output depends on a hidden default.
Unknown keys are rejected to catch typos early.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

DEFAULTS: dict = {
    "seed": 0,
    "out_dir": "artifacts",
    "data": {
        "path": None,  # trace CSV; required by most subcommands
        "schema": None,  # DatasetSchema key=value file; required with data.path
        "holidays": None,  # optional holiday calendar file
        "min_service_count": 50,
        "dedup": False,
    },
    "split": {"train": 0.72, "val": 0.08, "test": 0.20},
    "cluster": {
        "k": None,  # fixed count; when null the gap statistic picks it
        "k_range": [1, 8],  # inclusive bounds for the gap search
        "n_refs": 10,
        "max_iter": 100,
        "tol_km": 1e-6,
    },
    "features": {"normalize_latlon": True, "include_month": False},
    "stage1": {
        "hidden": [[16, 0.01], [16, 0.01], [8, 0.01]],
        "batch_size": 32,
        "learning_rate": 0.01,
        "stop_tol": 1e-4,
        "patience": 5,
        "max_epochs": 200,
    },
    "series": {"granularity_s": 60},
    "gaf": {
        "window": 32,
        "stride": 4,
        "horizon": 3,
        "epsilon": 1e-3,
        "paa": None,  # optional reduced length applied before encoding
        "png_dir": None,  # optional directory for grayscale PNG dumps
    },
    "stage2": {
        "channels": [64, 128, 256, 512],
        "width_factor": 0.125,
        "batch_size": 16,
        "max_epochs": 50,
        "patience": 10,
        "val_fraction": 0.1,
        "balance": True,
        "rotation_deg": 40.0,
        "shear_factor": 0.2,
        "use_batch_norm": True,
        "scheduler": {"alpha0": 0.1, "delta": 0.5, "drop": 10},
    },
}


class ConfigError(ValueError):
    pass


def _merge(defaults, user, trail=""):
    if not isinstance(user, dict):
        raise ConfigError(f"config section {trail or '<root>'} must be an object")
    unknown = user.keys() - defaults.keys()
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(trail + k for k in unknown)}")
    out = {}
    for key, default in defaults.items():
        if key not in user:
            out[key] = default
        elif isinstance(default, dict):
            out[key] = _merge(default, user[key], trail=f"{trail}{key}.")
        else:
            out[key] = user[key]
    return out


def load_pipeline_config(path) -> dict:
    """Parse and resolve a pipeline config file against the defaults."""
    try:
        user = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    return _merge(DEFAULTS, user)


def config_hash(cfg: dict) -> str:
    """Stable hash of the fully resolved configuration."""
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def flatten_config(cfg: dict, prefix: str = "") -> dict[str, str]:
    """Dotted-key view of the resolved config for manifest lines."""
    flat: dict[str, str] = {}
    for key, value in cfg.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(flatten_config(value, prefix=f"{name}."))
        else:
            flat[name] = json.dumps(value)
    return flat
