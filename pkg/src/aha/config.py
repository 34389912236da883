"""Declarative run configuration: JSON file <-> validated dataclasses.

Unknown keys are rejected so typos fail loudly; every numeric range check
lives on the target dataclass.  The effective config is echoed into each
output directory for provenance.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .fastnn import FastNnConfig
from .harness import SweepConfig
from .hippocampus import AhaConfig, PsConfig
from .ltm import InterestConfig, LtmConfig


class ConfigError(Exception):
    """Raised for unreadable, unknown-key, or out-of-range configuration."""


@dataclass(frozen=True)
class DatasetConfig:
    root: str | None = None  # overridden by --data / AHA_DATA_DIR
    runs_dir: str | None = None  # published classification runs, verbatim
    image_size: int = 52

    def __post_init__(self):
        if self.image_size < 16:
            raise ValueError("image_size must be at least 16")


@dataclass(frozen=True)
class Config:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    ltm: LtmConfig = field(default_factory=LtmConfig)
    aha: AhaConfig = field(default_factory=AhaConfig)
    fastnn: FastNnConfig = field(default_factory=FastNnConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    output_dir: str = "out"


_SECTION_TYPES = {
    "dataset": DatasetConfig,
    "ltm": LtmConfig,
    "aha": AhaConfig,
    "fastnn": FastNnConfig,
    "sweep": SweepConfig,
}
_NESTED_TYPES = {
    ("ltm", "interest"): InterestConfig,
    ("aha", "ps"): PsConfig,
}


def _build(cls, data: dict, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected an object")
    allowed = {f.name for f in fields(cls)}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        nested = _NESTED_TYPES.get((path, name))
        if nested is not None:
            value = _build(nested, value, f"{path}.{name}")
        if isinstance(value, list):
            value = tuple(value)
        kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def config_from_dict(data: dict) -> Config:
    if not isinstance(data, dict):
        raise ConfigError("config root must be an object")
    unknown = set(data) - (set(_SECTION_TYPES) | {"output_dir"})
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    kwargs = {}
    for section, cls in _SECTION_TYPES.items():
        if section in data:
            kwargs[section] = _build(cls, data[section], section)
    if "output_dir" in data:
        if not isinstance(data["output_dir"], str):
            raise ConfigError("output_dir must be a string")
        kwargs["output_dir"] = data["output_dir"]
    return Config(**kwargs)


def load_config(path: str | Path) -> Config:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(data)


def config_to_dict(cfg: Config) -> dict:
    return asdict(cfg)


def save_config(cfg: Config, path: str | Path) -> None:
    Path(path).write_text(json.dumps(config_to_dict(cfg), indent=2, sort_keys=True) + "\n")


def apply_fast_profile(cfg: Config) -> Config:
    """The CI profile: 5 runs, 3 seeds, 5 levels."""
    return replace(cfg, sweep=replace(cfg.sweep, levels=5, seeds=3, runs=5))
