"""Pipeline configuration: JSON file plus ``--set key=value`` overrides."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .corpus import AnalysisWindow
from .errors import ConfigError
from .kmeans import TypologyThresholds


@dataclass
class PathsConfig:
    flights: str = "flights.csv"
    airports: str = "airports.csv"
    opsnet: Optional[str] = None  # optional day,opsnet_delay_min pass-through
    out: str = "out"


@dataclass
class WindowConfig:
    start: str = "2010-01-01"
    end: str = "2024-07-31"
    exclusions: list = field(default_factory=lambda: [["2020-03-01", "2021-06-30"]])

    def window(self) -> AnalysisWindow:
        return AnalysisWindow.from_strings(self.start, self.end, [tuple(e) for e in self.exclusions])


@dataclass
class PcaConfig:
    eigenvalue_threshold: float = 1.0
    heatmap_components: int = 4


@dataclass
class KMeansConfig:
    k: int = 12
    restarts: int = 10
    seed: int = 2024
    sweep_min: int = 2
    sweep_max: int = 15


@dataclass
class IForestConfig:
    trees: int = 100
    psi: int = 256
    seed: int = 2025
    input: str = "features"  # "features" (standardized matrix) or "pca" (selected scores)


@dataclass
class ReportConfig:
    disrupted_types: list = field(default_factory=lambda: ["RegionalDisruption", "NASDisruption"])
    disrupted_clusters: Optional[list] = None
    map_days: list = field(default_factory=list)
    map_top: int = 3
    svg: bool = True


@dataclass
class PipelineConfig:
    paths: PathsConfig = field(default_factory=PathsConfig)
    window: WindowConfig = field(default_factory=WindowConfig)
    pca: PcaConfig = field(default_factory=PcaConfig)
    kmeans: KMeansConfig = field(default_factory=KMeansConfig)
    iforest: IForestConfig = field(default_factory=IForestConfig)
    typology: TypologyThresholds = field(default_factory=TypologyThresholds)
    report: ReportConfig = field(default_factory=ReportConfig)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        return _build(cls, data, "")


def _build(kind, data, prefix):
    if not isinstance(data, dict):
        raise ConfigError(f"{prefix or 'config'}: expected an object")
    fields = {f.name: f for f in dataclasses.fields(kind)}
    unknown = set(data) - set(fields)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(prefix + k for k in unknown)}")
    kwargs = {}
    for name, value in data.items():
        default = getattr(kind(), name)
        if dataclasses.is_dataclass(default):
            kwargs[name] = _build(type(default), value, f"{prefix}{name}.")
        else:
            kwargs[name] = value
    return kind(**kwargs)


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(data: dict, overrides) -> dict:
    """Apply dotted ``key=value`` strings; values parse as JSON when possible."""
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        parts = key.strip().split(".")
        node = data
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"--set {key}: {p} is not a section")
        node[parts[-1]] = _parse_value(value)
    return data


def _merge(base: dict, update: dict) -> dict:
    for k, v in update.items():
        if isinstance(v, dict) and isinstance(base.get(k), dict):
            _merge(base[k], v)
        else:
            base[k] = v
    return base


def load_config(path=None, overrides=(), out=None) -> PipelineConfig:
    data = PipelineConfig().to_dict()
    if path is not None:
        try:
            loaded = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path}: {exc}") from None
        _merge(data, loaded)
    user = apply_overrides({}, overrides)
    _merge(data, user)
    if out is not None:
        data["paths"]["out"] = str(out)
    cfg = PipelineConfig.from_dict(data)
    validate(cfg)
    return cfg


def validate(cfg: PipelineConfig) -> None:
    cfg.window.window()
    if cfg.iforest.input not in ("features", "pca"):
        raise ConfigError("iforest.input must be 'features' or 'pca'")
    for name in ("seed",):
        if not isinstance(getattr(cfg.kmeans, name), int) or not isinstance(getattr(cfg.iforest, name), int):
            raise ConfigError("seeds must be explicit integers")
    if cfg.iforest.trees < 1 or cfg.iforest.psi < 2:
        raise ConfigError("iforest needs trees >= 1 and psi >= 2")
    if cfg.kmeans.restarts < 1:
        raise ConfigError("kmeans.restarts must be >= 1")
