"""Flat, strictly validated experiment configuration.

A config is a JSON object. ``schema_version`` and ``seeds`` are required;
every other key falls back to :data:`DEFAULTS`. Unknown keys are errors.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

from .core import PhotonRCError

SCHEMA_VERSION = 1

DEFAULTS: dict = {
    # reservoir family for single-reservoir subcommands and cascade layers
    "family": "delay",
    # echo-state reservoir
    "n_nodes": 100,
    "spectral_radius": 0.9,
    "input_scaling": 1.0,
    "bias_scale": 0.2,
    "activation": "tanh",
    # delay reservoir
    "n_virtual": 400,
    "node_separation": 0.02,
    "response_ratio": 5.0,  # response_time = node_separation / response_ratio
    "feedback_gain": 0.9,
    "input_gain": 0.5,
    "phase_offset": None,  # None -> pi/4 - feedback_gain/2
    "desync_shift": 1,
    "mask_kind": "uniform",
    "regime": "dde",
    "oversample": None,  # None -> 20, or finer if response_time demands it
    "history": 0.0,
    # task
    "task": "narma10",
    "length": 2200,
    "washout": 200,
    "train_fraction": 0.7,
    "test_fraction": 0.3,
    "max_lag": 40,
    "horizon": 1,
    "mg_dt": 0.1,
    "mg_subsample": 10,
    # readout
    "ridge_lambda": 1e-6,
    "readout_layers": "all",
    # cascade and tolerance
    "n_layers": 2,
    "coupling_scale": 0.05,
    "sigmas": [0.0, 0.1, 0.3],
    "n_seeds": 20,
    "perturbation_mode": "multiplicative",
    # outputs
    "dump_states": False,
    "dump_length": 3,
    "dump_trajectory": False,
}

REQUIRED = ("schema_version", "seeds")
NULLABLE = {"phase_offset", "oversample"}
CHOICES = {
    "family": ("esn", "delay"),
    "activation": ("tanh", "identity", "sin2"),
    "mask_kind": ("binary", "uniform"),
    "regime": ("dde", "map"),
    "task": ("narma10", "mackey_glass", "memory_capacity"),
    "readout_layers": ("all", "last"),
    "perturbation_mode": ("multiplicative", "additive"),
}


class ConfigError(PhotonRCError):
    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


def _check_type(key: str, value, default):
    if value is None:
        if key in NULLABLE:
            return None
        raise ConfigError(f"config key {key!r} must not be null", key)
    if isinstance(default, bool) or key in ("dump_states", "dump_trajectory"):
        if not isinstance(value, bool):
            raise ConfigError(f"config key {key!r} must be true/false, got {value!r}", key)
        return value
    if isinstance(default, int) or key == "oversample":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"config key {key!r} must be an integer, got {value!r}", key)
        return value
    if isinstance(default, float) or key == "phase_offset":
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise ConfigError(f"config key {key!r} must be a finite number, got {value!r}", key)
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"config key {key!r} must be a string, got {value!r}", key)
        if key in CHOICES and value not in CHOICES[key]:
            raise ConfigError(f"config key {key!r} must be one of {CHOICES[key]}, got {value!r}", key)
        return value
    if isinstance(default, list):
        if not isinstance(value, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
        ):
            raise ConfigError(f"config key {key!r} must be a list of numbers", key)
        return [float(v) for v in value]
    raise AssertionError(key)


def resolve(raw: dict) -> dict:
    """Validate ``raw`` and fill defaults. Returns a new dict; ``raw`` is not touched."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    for key in REQUIRED:
        if key not in raw:
            raise ConfigError(f"missing required config key {key!r}", key)
    unknown = sorted(set(raw) - set(DEFAULTS) - set(REQUIRED))
    if unknown:
        raise ConfigError(f"unknown config key {unknown[0]!r}", unknown[0])
    if raw["schema_version"] != SCHEMA_VERSION:
        raise ConfigError(
            f"unsupported schema_version {raw['schema_version']!r} (expected {SCHEMA_VERSION})", "schema_version"
        )
    seeds = raw["seeds"]
    if (
        not isinstance(seeds, list)
        or not seeds
        or not all(isinstance(s, int) and not isinstance(s, bool) and 0 <= s < 2**64 for s in seeds)
    ):
        raise ConfigError("config key 'seeds' must be a non-empty list of unsigned 64-bit integers", "seeds")
    out = {"schema_version": SCHEMA_VERSION, "seeds": list(seeds)}
    for key, default in DEFAULTS.items():
        out[key] = _check_type(key, raw[key], default) if key in raw else default
    return out


def parse_override(item: str) -> tuple[str, object]:
    """``key=value`` with the value parsed as JSON when possible."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} is not of the form key=value")
    key, text = item.split("=", 1)
    try:
        value = json.loads(text)
    except json.JSONDecodeError:
        value = text
    return key.strip(), value


def load_raw(path: str | Path) -> dict:
    """Read a config file, or the config section of a run manifest."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    if isinstance(doc, dict) and "manifest_version" in doc:
        return dict(doc["config"])
    return doc
