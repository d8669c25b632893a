"""Layered configuration: built-in defaults, then a config file, then flags.

Config files are YAML (JSON parses as YAML too). Every command echoes the
configuration it actually ran with to "<output>.config.yaml" so results
stay traceable; the echo is key-sorted and timestamp-free, keeping reruns
byte-identical.
"""

from __future__ import annotations

import copy
from pathlib import Path
from typing import Any, Mapping

import yaml

from .errors import ConfigError
from .querygen import DEFAULT_GENERATION_PROMPT, DEFAULT_VALIDATION_PROMPT

DEFAULT_T_GRID = [round(i * 0.005, 3) for i in range(9)]  # 0.000 .. 0.040
DEFAULT_B_GRID = [0.1, 0.2, 0.3]
DEFAULT_K_GRID = [500, 1000, 1500, 2000]

DEFAULTS: dict[str, Any] = {
    "bm25": {
        "k1": 1.2,
        "b": 0.75,
        "fields": ["title", "description", "brand", "color"],
    },
    "grit": {
        "t": 0.02,
        "b": 0.3,
        "sum_over": "seeds",
    },
    "graph": {
        "split": "train",
        "min_weight": None,
        "weights": {"EE": 3, "ES": 2, "EC": 1, "SS": 2, "SC": 1, "CC": 1},
    },
    "eval": {
        "split": "test",
        "relevant": "E",
        "zero_relevant": "exclude",
        "k_values": list(DEFAULT_K_GRID),
    },
    "sweep": {
        "t_values": list(DEFAULT_T_GRID),
        "b_values": list(DEFAULT_B_GRID),
        "k_values": list(DEFAULT_K_GRID),
        "per_depth": True,
    },
    "search": {
        "n": 500,
        "tag": "bm25",
    },
    "querygen": {
        "backend": "mock",
        "max_retries": 5,
        "mock_template": "Find {query} for purchase",
        "mock_verdict": "yes",
        "http": {
            "endpoint": None,
            "model": None,
            "auth_env": None,
            "timeout": 30.0,
            "max_in_flight": 4,
            "max_attempts": 3,
            "backoff_base": 0.5,
        },
        # best-effort reconstructions; override when exact wording matters
        "prompts": {
            "generation": DEFAULT_GENERATION_PROMPT,
            "validation": DEFAULT_VALIDATION_PROMPT,
        },
    },
}


def _merge(base: dict, override: Mapping) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def load_config(path: str | Path | None) -> dict[str, Any]:
    """Defaults merged with an optional config file."""
    if path is None:
        return copy.deepcopy(DEFAULTS)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            loaded = yaml.safe_load(fh)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid config file: {exc}") from None
    if loaded is None:
        loaded = {}
    if not isinstance(loaded, dict):
        raise ConfigError(f"{path}: config root must be a mapping")
    unknown = set(loaded) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"{path}: unknown config section(s): {', '.join(sorted(unknown))}")
    return _merge(DEFAULTS, loaded)


def apply_overrides(cfg: dict[str, Any], section: str, **overrides: Any) -> dict[str, Any]:
    """Fold non-None flag values into one section of the config."""
    chosen = {k: v for k, v in overrides.items() if v is not None}
    if not chosen:
        return cfg
    return _merge(cfg, {section: chosen})


def write_sidecar(cfg: Mapping[str, Any], out_path: str | Path, command: str) -> Path:
    """Echo the effective config next to a command's primary output."""
    sidecar = Path(str(out_path) + ".config.yaml")
    payload = {"command": command, "config": copy.deepcopy(dict(cfg))}
    with open(sidecar, "w", encoding="utf-8") as fh:
        yaml.safe_dump(payload, fh, sort_keys=True, default_flow_style=False)
    return sidecar
