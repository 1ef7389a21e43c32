"""Pipeline configuration: TOML sections, dotted-name overrides, manifest snapshots."""

from __future__ import annotations

import dataclasses
import json
import sys
import types
import typing
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Any, Iterable, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError


@dataclass
class PathsConfig:
    corpus: str | None = None  # None: the pipeline synthesizes one
    patterns: str | None = None  # None: packaged default
    lexicon: str | None = None  # None: packaged default
    external_scores: str | None = None  # chunk scores from an outside model, replaces the baseline


@dataclass
class SynthConfig:
    n_dp: int = 100
    n_nd: int = 100
    seed: int = 0
    signal_rate_dp: float = 0.08
    signal_rate_nd: float = 0.01
    step_date: date | None = None
    signal_rate_dp_after: float | None = None
    topic_shift_date: date | None = date(2020, 3, 13)
    start_date: date = date(2020, 1, 1)
    end_date: date = date(2020, 5, 22)


@dataclass
class CohortConfig:
    window_days: int = 90
    cap: int = 200
    control_seed: int = 0
    n_control: int | None = None  # None: as many as DP users


@dataclass
class ChunkingConfig:
    target_words: int = 250
    min_words: int = 125


@dataclass
class ScorerConfig:
    seed: int = 0
    epochs: int = 10
    lr: float = 2.0
    batch_size: int = 32
    l2: float = 1e-4
    test_fraction: float = 0.2
    folds: int = 5


@dataclass
class FeaturesConfig:
    seed: int = 0


@dataclass
class FusionConfig:
    groups: str = "V,D,E,P,L,SCORE"
    algorithm: str = "SVM"
    seed: int = 0
    kernel: str = "linear"
    repeats: int = 10


@dataclass
class TrendConfig:
    group: str = "cohort"
    bin_days: int = 3
    trim_fraction: float = 0.10
    window: int = 5
    start: date = date(2020, 1, 1)
    end: date = date(2020, 5, 22)
    trim_scope: str = "global"
    trailing: str = "keep"
    states: str = "NY,CA,FL,TX,IL"
    min_users: int = 550


@dataclass
class TopicsConfig:
    k: int = 5
    split_date: date = date(2020, 3, 13)
    seed: int = 0
    iterations: int = 1000
    alpha: float | None = None  # None: 50 / k
    beta: float = 0.01
    n_keywords: int = 15


@dataclass
class RunConfig:
    jobs: int = 1


@dataclass
class PipelineConfig:
    paths: PathsConfig = field(default_factory=PathsConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    cohort: CohortConfig = field(default_factory=CohortConfig)
    chunking: ChunkingConfig = field(default_factory=ChunkingConfig)
    scorer: ScorerConfig = field(default_factory=ScorerConfig)
    features: FeaturesConfig = field(default_factory=FeaturesConfig)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    trend: TrendConfig = field(default_factory=TrendConfig)
    topics: TopicsConfig = field(default_factory=TopicsConfig)
    run: RunConfig = field(default_factory=RunConfig)

    def validate(self) -> None:
        checks = [
            (self.synth.n_dp >= 0 and self.synth.n_nd >= 0, "synth.n_dp and synth.n_nd must be >= 0"),
            (self.cohort.window_days >= 0, "cohort.window_days must be >= 0"),
            (self.cohort.cap >= 1, "cohort.cap must be >= 1"),
            (self.cohort.n_control is None or self.cohort.n_control >= 0, "cohort.n_control must be >= 0"),
            (self.chunking.target_words >= 1, "chunking.target_words must be >= 1"),
            (0 <= self.chunking.min_words <= self.chunking.target_words,
             "chunking.min_words must be in [0, target_words]"),
            (self.scorer.epochs >= 1, "scorer.epochs must be >= 1"),
            (self.scorer.lr > 0, "scorer.lr must be > 0"),
            (self.scorer.batch_size >= 1, "scorer.batch_size must be >= 1"),
            (0 < self.scorer.test_fraction < 1, "scorer.test_fraction must be in (0, 1)"),
            (self.scorer.folds >= 2, "scorer.folds must be >= 2"),
            (self.fusion.repeats >= 1, "fusion.repeats must be >= 1"),
            (self.fusion.kernel in ("linear", "rbf"), "fusion.kernel must be linear or rbf"),
            (self.trend.group in ("cohort", "state"), "trend.group must be cohort or state"),
            (self.trend.bin_days >= 1, "trend.bin_days must be >= 1"),
            (0 <= self.trend.trim_fraction < 0.5, "trend.trim_fraction must be in [0, 0.5)"),
            (self.trend.window >= 1 and self.trend.window % 2 == 1, "trend.window must be odd and >= 1"),
            (self.trend.end >= self.trend.start, "trend.end must not precede trend.start"),
            (self.trend.trim_scope in ("global", "per_bin"), "trend.trim_scope must be global or per_bin"),
            (self.trend.trailing in ("keep", "drop"), "trend.trailing must be keep or drop"),
            (self.trend.min_users >= 0, "trend.min_users must be >= 0"),
            (self.topics.k >= 2, "topics.k must be >= 2"),
            (self.topics.iterations >= 1, "topics.iterations must be >= 1"),
            (self.topics.beta > 0, "topics.beta must be > 0"),
            (self.topics.alpha is None or self.topics.alpha > 0, "topics.alpha must be > 0"),
            (self.topics.n_keywords >= 1, "topics.n_keywords must be >= 1"),
            (self.run.jobs >= 1, "run.jobs must be >= 1"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        from .fusion import parse_algorithm, parse_groups

        parse_groups(self.fusion.groups)
        parse_algorithm(self.fusion.algorithm)

    def to_json(self) -> dict:
        return {
            f.name: {k: (v.isoformat() if isinstance(v, date) else v) for k, v in dataclasses.asdict(getattr(self, f.name)).items()}
            for f in dataclasses.fields(self)
        }


SECTIONS = {f.name: f.default_factory for f in dataclasses.fields(PipelineConfig)}  # type: ignore[misc]


def _field_types(section: str) -> dict[str, Any]:
    cls = SECTIONS[section]
    hints = typing.get_type_hints(cls)
    return {f.name: hints[f.name] for f in dataclasses.fields(cls)}


def dotted_keys() -> list[tuple[str, Any]]:
    """Every ``section.key`` with its annotated type, in declaration order."""
    return [(f"{s}.{k}", t) for s in SECTIONS for k, t in _field_types(s).items()]


def _base_types(tp) -> tuple[list[type], bool]:
    origin = typing.get_origin(tp)
    if origin in (typing.Union, types.UnionType):
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        return args, len(args) < len(typing.get_args(tp))
    return [tp], False


def coerce(key: str, tp, value):
    """Convert a TOML or command-line value to the field's type."""
    bases, optional = _base_types(tp)
    if value is None or (optional and isinstance(value, str) and value.strip().lower() in ("", "none", "null")):
        if optional:
            return None
        raise ConfigError(f"{key} may not be empty")
    base = bases[0]
    try:
        if base is bool:
            if isinstance(value, bool):
                return value
            if str(value).lower() in ("true", "1", "yes"):
                return True
            if str(value).lower() in ("false", "0", "no"):
                return False
            raise ValueError(value)
        if base is int:
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise ValueError(value)
            return int(value)
        if base is float:
            if isinstance(value, bool):
                raise ValueError(value)
            return float(value)
        if base is date:
            return value if isinstance(value, date) else date.fromisoformat(str(value))
        if base is str:
            if isinstance(value, (list, tuple)):
                return ",".join(str(v) for v in value)
            return str(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key}: cannot interpret {value!r} as {base.__name__}") from exc
    raise ConfigError(f"{key}: unsupported type {tp}")


def from_mapping(obj: Mapping[str, Mapping[str, Any]], base: PipelineConfig | None = None) -> PipelineConfig:
    cfg = base if base is not None else PipelineConfig()
    for section, values in obj.items():
        if section not in SECTIONS:
            raise ConfigError(f"unknown config section [{section}]")
        if not isinstance(values, Mapping):
            raise ConfigError(f"[{section}] must be a table")
        types_ = _field_types(section)
        target = getattr(cfg, section)
        for key, value in values.items():
            if key not in types_:
                raise ConfigError(f"unknown config key {section}.{key}")
            setattr(target, key, coerce(f"{section}.{key}", types_[key], value))
    return cfg


def load_config(path: str | Path | None) -> PipelineConfig:
    """Read a TOML config, or the ``config`` snapshot of a run manifest (JSON)."""
    if path is None:
        return PipelineConfig()
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".json":
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from exc
        return from_mapping(obj.get("config", obj))
    try:
        obj = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML: {exc}") from exc
    return from_mapping(obj)


def apply_overrides(cfg: PipelineConfig, overrides: Iterable[tuple[str, Any]]) -> PipelineConfig:
    """Apply ``(section.key, value)`` pairs on top of ``cfg``."""
    for dotted, value in overrides:
        section, _, key = dotted.partition(".")
        if section not in SECTIONS or key not in _field_types(section):
            raise ConfigError(f"unknown config key {dotted}")
        setattr(getattr(cfg, section), key, coerce(dotted, _field_types(section)[key], value))
    return cfg


def parse_set_option(text: str) -> tuple[str, str]:
    if "=" not in text:
        raise ConfigError(f"--set expects section.key=value, got {text!r}")
    key, _, value = text.partition("=")
    return key.strip(), value.strip()
