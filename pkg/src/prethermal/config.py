"""Experiment configuration: strict TOML schema, defaults, echo emission.

Unknown keys are fatal -- a silently ignored typo ("nuu = ...") would
invalidate a sweep, so validation errors name the offending key.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import tomli

__all__ = ["ExperimentConfig", "ConfigError", "load_config", "parse_config",
           "emit_config", "DEFAULTS"]

SWEEP_BUDGET = 64


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "experiment": {
        "preset": "ising-domain-wall",
        "theorem": "u1-floquet",      # u1-floquet | zn-quasi
        "mode": "adaptive",           # adaptive | rigorous
        "seed": 42,
        "out": "results",
    },
    "model": {
        "length": 0,                  # 0 = preset default
        "kappa0": 0.0,                # 0 = preset default
        "nu_ratio": 8.0,
        "twist_order": 0,             # 0 = preset default (zn-quasi only)
    },
    "renorm": {
        "max_steps": 6,
        "grid_size": 64,
    },
    "dynamics": {
        "horizon_periods": 1.0e12,
        "sample_count": 80,
        "dt_factor": 0.05,
        "threshold": 0.1,
    },
    "sweep": {
        "nu_ratios": [4.0, 6.0, 8.0, 12.0, 16.0, 20.0],
    },
}

_TYPES = {
    ("experiment", "preset"): str,
    ("experiment", "theorem"): str,
    ("experiment", "mode"): str,
    ("experiment", "seed"): int,
    ("experiment", "out"): str,
    ("model", "length"): int,
    ("model", "kappa0"): (int, float),
    ("model", "nu_ratio"): (int, float),
    ("model", "twist_order"): int,
    ("renorm", "max_steps"): int,
    ("renorm", "grid_size"): int,
    ("dynamics", "horizon_periods"): (int, float),
    ("dynamics", "sample_count"): int,
    ("dynamics", "dt_factor"): (int, float),
    ("dynamics", "threshold"): (int, float),
    ("sweep", "nu_ratios"): list,
}


@dataclass
class ExperimentConfig:
    experiment: dict = field(default_factory=dict)
    model: dict = field(default_factory=dict)
    renorm: dict = field(default_factory=dict)
    dynamics: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return getattr(self, key)


def parse_config(data: dict) -> ExperimentConfig:
    """Validate a raw table against the schema and fill defaults."""
    for section in data:
        if section not in DEFAULTS:
            raise ConfigError(f"unknown section [{section}]")
    merged = {}
    for section, defaults in DEFAULTS.items():
        table = dict(defaults)
        supplied = data.get(section, {})
        if not isinstance(supplied, dict):
            raise ConfigError(f"[{section}] must be a table")
        for key, value in supplied.items():
            if key not in defaults:
                raise ConfigError(f"unknown key '{key}' in [{section}]")
            want = _TYPES[(section, key)]
            if isinstance(value, bool) or not isinstance(value, want):
                raise ConfigError(
                    f"key '{key}' in [{section}] has wrong type "
                    f"{type(value).__name__}")
            table[key] = value
        merged[section] = table
    cfg = ExperimentConfig(**merged)
    _check_semantics(cfg)
    return cfg


def _check_semantics(cfg: ExperimentConfig):
    if cfg.experiment["theorem"] not in ("u1-floquet", "zn-quasi"):
        raise ConfigError(f"unknown theorem '{cfg.experiment['theorem']}'")
    if cfg.experiment["mode"] not in ("adaptive", "rigorous"):
        raise ConfigError(f"unknown mode '{cfg.experiment['mode']}'")
    from .presets import PRESETS
    name = cfg.experiment["preset"]
    if name not in PRESETS:
        raise ConfigError(f"unknown preset '{name}' "
                          f"(available: {', '.join(sorted(PRESETS))})")
    ratios = cfg.sweep["nu_ratios"]
    if not all(isinstance(r, (int, float)) and not isinstance(r, bool)
               and r > 0 for r in ratios):
        raise ConfigError("sweep.nu_ratios must be positive numbers")
    if len(ratios) > SWEEP_BUDGET:
        raise ConfigError(
            f"sweep has {len(ratios)} points, budget is {SWEEP_BUDGET}")
    if cfg.dynamics["threshold"] <= 0:
        raise ConfigError("dynamics.threshold must be positive")
    if cfg.dynamics["dt_factor"] <= 0 or cfg.dynamics["dt_factor"] > 0.1:
        raise ConfigError("dynamics.dt_factor must lie in (0, 0.1]")


def load_config(path) -> ExperimentConfig:
    with open(path, "rb") as fh:
        data = tomli.load(fh)
    return parse_config(data)


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(value, float):
        text = repr(value)
        return text if ("e" in text or "." in text or "inf" in text) else text + ".0"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, list):
        return "[" + ", ".join(_format_value(v) for v in value) + "]"
    raise TypeError(f"cannot emit value of type {type(value).__name__}")


def emit_config(cfg: ExperimentConfig) -> str:
    """Render a config back to TOML; parse(emit(cfg)) == cfg."""
    lines = []
    for section in DEFAULTS:
        lines.append(f"[{section}]")
        for key, value in getattr(cfg, section).items():
            lines.append(f"{key} = {_format_value(value)}")
        lines.append("")
    return "\n".join(lines)
