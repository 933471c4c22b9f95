"""Configuration loading for ratelab."""

import copy
import json
import os

from .errors import ConfigError

THREADS_ENV = "QKD_RATELAB_THREADS"

DEFAULTS = {
    "server_port": 19898,
    "threads": 1,
    "cache_size": 32,
    "tolerances": {
        "psd": 1e-9,
    },
    "minimizer": {
        "prescan_points": 200,
        "xatol": 1e-7,
    },
    "noisy_preprocessing": {
        "grid_step": 1e-3,
    },
    "estimation": {
        "max_iterations": 5000,
        "step_tolerance": 1e-8,
        "eta_directions": 26,
    },
    "finite_key": {
        "epsilon": 1e-9,
        "alpha": 0.01,
        "ir_margin": 0.05,
        "desk_block": 16,
    },
    "audit": {
        "max_exhaustive_seeds": 1 << 20,
        "subsample_seeds": 4096,
    },
    "figures": {
        "points": 200,
    },
}


def _merge(base: dict, override: dict) -> dict:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_config(path: str | None = None) -> dict:
    """Load config.json (next to this module unless ``path`` is given).

    Missing files fall back to DEFAULTS; partial files are merged over them.
    ``QKD_RATELAB_THREADS`` overrides the worker count.
    """
    config_path = path or os.path.join(os.path.dirname(__file__), "config.json")
    config = copy.deepcopy(DEFAULTS)
    if os.path.exists(config_path):
        try:
            with open(config_path) as f:
                config = _merge(DEFAULTS, json.load(f))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid config file {config_path}: {exc}") from exc
    elif path is not None:
        raise ConfigError(f"config file not found: {path}")

    env_threads = os.environ.get(THREADS_ENV)
    if env_threads is not None:
        try:
            threads = int(env_threads)
        except ValueError:
            threads = 0
        if threads < 1:
            raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {env_threads!r}")
        config["threads"] = threads
    return config
