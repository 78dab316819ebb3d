"""Engine configuration: every tunable in one tree, loadable from JSON.

The file layout mirrors :class:`EngineConfig`; each section is optional and
unknown keys are rejected so typos don't silently fall back to defaults::

    {"graph": {"theta_dedup": 0.8}, "fusion": {"short_words": 3}}
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field

from .aggregation import AggregationConfig
from .consistency import ConsistencyConfig
from .contradiction import DetectorThresholds
from .errors import ConfigError
from .fusion import FusionConfig
from .lexicons import Lexicons
from .relevance import RelevanceConfig


@dataclass(frozen=True)
class GraphConfig:
    theta_dedup: float = 0.80
    theta_sem: float = 0.50
    dedup_objects: bool = False

    def __post_init__(self):
        if not (0 < self.theta_dedup <= 1 and 0 < self.theta_sem <= 1):
            raise ValueError("graph thresholds must lie in (0, 1]")


@dataclass(frozen=True)
class EngineConfig:
    graph: GraphConfig = field(default_factory=GraphConfig)
    relevance: RelevanceConfig = field(default_factory=RelevanceConfig)
    consistency: ConsistencyConfig = field(default_factory=ConsistencyConfig)
    contradiction: DetectorThresholds = field(default_factory=DetectorThresholds)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    aggregation: AggregationConfig = field(default_factory=AggregationConfig)
    lexicons: Lexicons = field(default_factory=Lexicons)

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            section = getattr(self, f.name)
            if isinstance(section, Lexicons):
                out[f.name] = section.to_dict()
            else:
                out[f.name] = {k: list(v) if isinstance(v, tuple) else v for k, v in dataclasses.asdict(section).items()}
        return out

    @classmethod
    def from_dict(cls, doc: dict) -> "EngineConfig":
        if not isinstance(doc, dict):
            raise ConfigError("config root must be a JSON object")
        known = {f.name: f for f in dataclasses.fields(cls)}
        unknown = set(doc) - set(known)
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        sections = {}
        for name, value in doc.items():
            if not isinstance(value, dict):
                raise ConfigError(f"config section {name!r} must be an object")
            default = known[name].default_factory()
            try:
                if isinstance(default, Lexicons):
                    extra = set(value) - set(default.to_dict())
                    if extra:
                        raise ConfigError(f"unknown keys in {name}: {sorted(extra)}")
                    sections[name] = Lexicons.from_dict(value)
                else:
                    sections[name] = _section(type(default), name, value)
            except ConfigError:
                raise
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"invalid {name} config: {exc}") from None
        return cls(**sections)

    def replace(self, **sections) -> "EngineConfig":
        return dataclasses.replace(self, **sections)


def _section(kind, name: str, value: dict):
    fields = {f.name: f for f in dataclasses.fields(kind)}
    extra = set(value) - set(fields)
    if extra:
        raise ConfigError(f"unknown keys in {name}: {sorted(extra)}")
    kwargs = {k: tuple(v) if isinstance(v, list) else v for k, v in value.items()}
    return kind(**kwargs)


def load_config(path: str | os.PathLike | None) -> EngineConfig:
    if path is None:
        return EngineConfig()
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return EngineConfig.from_dict(doc)
