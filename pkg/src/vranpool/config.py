"""Experiment configuration: YAML file -> validated, hashable dataclasses.

Unknown keys are rejected so a typo cannot silently fall back to a default.
The hash covers every field that can change a numeric output; the output
directory is excluded.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .agent import AgentConfig
from .energy import EnergyParams
from .env import ContentionParams, DemandParams, EnvParams
from .traces import TraceProfile

OUTPUT_DIR_ENV = "VRANPOOL_OUTPUT_DIR"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TrainSettings:
    iterations: int = 20000
    n_min: int = 2
    n_max: int = 4
    eps_decay_fraction: float = 0.6   # decay constant as a fraction of iterations
    lr_anneal_fraction: float = 0.75  # lr drops to agent.lr_final after this fraction
    ma_window: int = 500
    schedule: str = "random"          # or "sequential": follow `arrivals`
    arrivals: tuple[tuple[int, int], ...] = ((0, 2), (4000, 3), (8000, 4))


@dataclass(frozen=True)
class EvalSettings:
    episodes: int = 2000
    n_min: int = 2
    n_max: int = 4
    sequential_iterations: int = 12000
    arrivals: tuple[tuple[int, int], ...] = ((0, 2), (4000, 3), (8000, 4))
    sequential_learn: bool = False
    trace_learn: bool = False
    warmup_days: float = 1.0


@dataclass(frozen=True)
class BenchSettings:
    episodes: int = 2000
    n_vbs: tuple[int, ...] = (2, 3, 4)
    workers: int = 1


@dataclass(frozen=True)
class TraceSettings:
    horizon_days: float = 5.0
    interval_s: float = 300.0
    profile: TraceProfile = field(default_factory=TraceProfile)


@dataclass(frozen=True)
class InferenceSettings:
    repetitions: int = 1000
    warmup: int = 50


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    n_physical: int = 2
    output_dir: str = "runs"
    env: EnvParams = field(default_factory=EnvParams)
    energy: EnergyParams = field(default_factory=EnergyParams)
    agent: AgentConfig = field(default_factory=AgentConfig)
    train: TrainSettings = field(default_factory=TrainSettings)
    eval: EvalSettings = field(default_factory=EvalSettings)
    bench: BenchSettings = field(default_factory=BenchSettings)
    traces: TraceSettings = field(default_factory=TraceSettings)
    inference: InferenceSettings = field(default_factory=InferenceSettings)

    def agent_config(self) -> AgentConfig:
        """Agent settings with the run seed and schedules scaled to the training length."""
        t = self.train
        return dataclasses.replace(self.agent, seed=self.seed,
                                   eps_decay=t.eps_decay_fraction * t.iterations,
                                   lr_anneal_at=int(round(t.lr_anneal_fraction * t.iterations)))

    def to_dict(self) -> dict:
        return _plain(dataclasses.asdict(self))

    def hash(self) -> str:
        d = self.to_dict()
        d.pop("output_dir")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def resolved_output_dir(self) -> Path:
        return Path(os.environ.get(OUTPUT_DIR_ENV) or self.output_dir)


def _plain(x):
    if isinstance(x, dict):
        return {k: _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    return x


# nested dataclass fields and how to build them from plain YAML values
_NESTED = {
    (ExperimentConfig, "env"): EnvParams,
    (ExperimentConfig, "energy"): EnergyParams,
    (ExperimentConfig, "agent"): AgentConfig,
    (ExperimentConfig, "train"): TrainSettings,
    (ExperimentConfig, "eval"): EvalSettings,
    (ExperimentConfig, "bench"): BenchSettings,
    (ExperimentConfig, "traces"): TraceSettings,
    (ExperimentConfig, "inference"): InferenceSettings,
    (EnvParams, "contention"): ContentionParams,
    (EnvParams, "demand"): DemandParams,
    (TraceSettings, "profile"): TraceProfile,
}


def _tuplify(v):
    if isinstance(v, dict):
        # e.g. ipc anchors written as a {count: ipc} map
        return tuple(sorted((int(k), _tuplify(val)) for k, val in v.items()))
    if isinstance(v, list):
        return tuple(_tuplify(x) for x in v)
    return v


def _build(cls, data: Any, where: str):
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected a mapping, got {type(data).__name__}")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")
    kwargs = {}
    for name, value in data.items():
        sub = _NESTED.get((cls, name))
        path = f"{where}.{name}" if where else name
        if sub is not None:
            kwargs[name] = _build(sub, value, path)
        else:
            f = fields[name]
            default = f.default if f.default is not dataclasses.MISSING else None
            kwargs[name] = _coerce(value, default, path)
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where or 'config'}: {exc}") from exc


def _coerce(value, default, where: str):
    value = _tuplify(value)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true/false")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string")
        return value
    if isinstance(default, tuple) and not isinstance(value, tuple):
        raise ConfigError(f"{where}: expected a list")
    return value


def _check_arrivals(where: str, arrivals, iterations: int, max_vbs: int) -> None:
    if any(not (isinstance(a, tuple) and len(a) == 2) for a in arrivals):
        raise ConfigError(f"{where}: expected a list of [start_iteration, n_vbs] pairs")
    starts = [s for s, _ in arrivals]
    if not starts or starts[0] != 0 or starts != sorted(set(starts)):
        raise ConfigError(f"{where}: start iterations must begin at 0 and increase")
    if any(not 1 <= n <= max_vbs for _, n in arrivals) or starts[-1] >= iterations:
        raise ConfigError(f"{where}: counts must lie in 1..max_vbs and starts before the run ends")


def _cross_check(cfg: ExperimentConfig) -> None:
    if cfg.n_physical < 1:
        raise ConfigError("n_physical must be >= 1")
    m = cfg.env.max_vbs
    for name, lo, hi in (("train", cfg.train.n_min, cfg.train.n_max), ("eval", cfg.eval.n_min, cfg.eval.n_max)):
        if not 1 <= lo <= hi <= m:
            raise ConfigError(f"{name}: need 1 <= n_min <= n_max <= env.max_vbs ({m})")
    t = cfg.train
    if t.iterations < 1 or t.ma_window < 1 or t.eps_decay_fraction <= 0:
        raise ConfigError("train: iterations, ma_window and eps_decay_fraction must be positive")
    if not 0 <= t.lr_anneal_fraction <= 1:
        raise ConfigError("train.lr_anneal_fraction must lie in [0, 1]")
    if t.schedule not in ("random", "sequential"):
        raise ConfigError("train.schedule must be 'random' or 'sequential'")
    if t.schedule == "sequential":
        _check_arrivals("train.arrivals", t.arrivals, t.iterations, m)
    e = cfg.eval
    if e.episodes < 1 or e.sequential_iterations < 1 or e.warmup_days < 0:
        raise ConfigError("eval: episodes and sequential_iterations must be >= 1, warmup_days >= 0")
    _check_arrivals("eval.arrivals", e.arrivals, e.sequential_iterations, m)
    b = cfg.bench
    if b.episodes < 1 or b.workers < 1 or not b.n_vbs or any(not 1 <= n <= m for n in b.n_vbs):
        raise ConfigError("bench: episodes, workers >= 1 and n_vbs within 1..max_vbs")
    tr = cfg.traces
    if tr.horizon_days < 1 or tr.interval_s <= 0:
        raise ConfigError("traces: horizon_days must be >= 1 and interval_s > 0")
    if e.warmup_days >= tr.horizon_days:
        raise ConfigError("eval.warmup_days must be shorter than traces.horizon_days")
    if cfg.inference.repetitions < 1 or cfg.inference.warmup < 0:
        raise ConfigError("inference: repetitions >= 1, warmup >= 0")


def from_dict(data: dict | None) -> ExperimentConfig:
    cfg = _build(ExperimentConfig, data or {}, "")
    _cross_check(cfg)
    return cfg


def load_config(path: str | Path | None) -> ExperimentConfig:
    if path is None:
        return from_dict({})
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    return from_dict(data)


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)
