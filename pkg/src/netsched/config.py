"""Declarative experiment configuration (versioned JSON, strict keys).

A config file fully determines a run: grid construction parameters, the
adversary and its constants, scheduler settings, probe settings, horizon and
seed.  Parsing rejects unknown keys at every level; serialization is
canonical (sorted keys, two-space indent) so parse -> serialize round-trips
byte-identically.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

SCHEMA_VERSION = 1

ADVERSARY_KINDS = ("exponential", "cyclic-arrival", "cyclic-edge-arrival", "constant")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SchedulerConfig:
    beta: float = 1.0
    eps_hat: float = 0.0


@dataclass(frozen=True)
class GridConfig:
    n1: int = 3
    n2: int = 4
    k_pairs: int = 10
    rate_low: float = 0.5
    rate_high: float = 2.0
    gamma_low: float = 0.5
    gamma_high: float = 2.0
    removed_per_vector: int = 3
    removed: tuple[tuple[int, ...], ...] | None = None


@dataclass(frozen=True)
class AdversaryConfig:
    kind: str = "cyclic-arrival"
    edges: int = 6             # exponential: number of parallel edges
    eps: float = 0.1           # exponential: subcriticality
    rate_idx: int = 0          # cyclic-arrival / constant: fixed cap vector
    gamma_idx: int = 0         # constant: fixed arrival vector
    load: float | None = None  # constant: explicit load factor (else c table)
    c_table: tuple[tuple[float, ...], ...] | None = None  # None -> probe first

    def __post_init__(self):
        if self.kind not in ADVERSARY_KINDS:
            raise ConfigError(f"unknown adversary kind {self.kind!r}")


@dataclass(frozen=True)
class ProbeConfig:
    window: int = 100_000
    tol: float = 0.001
    c_hi: float = 1.0
    workers: int = 2


@dataclass(frozen=True)
class ExperimentConfig:
    version: int = SCHEMA_VERSION
    seed: int = 0
    horizon: int = 100_000
    scheduler: SchedulerConfig = field(default_factory=SchedulerConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    adversary: AdversaryConfig = field(default_factory=AdversaryConfig)
    probe: ProbeConfig = field(default_factory=ProbeConfig)

    def to_dict(self) -> dict:
        return _as_plain(dataclasses.asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _as_plain(obj):
    if isinstance(obj, dict):
        return {k: _as_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_as_plain(v) for v in obj]
    return obj


def _build(cls, data: dict, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected an object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {sorted(unknown)}")
    return data


def _tuplize(x):
    if isinstance(x, list):
        return tuple(_tuplize(v) for v in x)
    return x


def from_dict(data: dict) -> ExperimentConfig:
    data = dict(_build(ExperimentConfig, data, "config"))
    version = data.pop("version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"config: unsupported version {version}")
    sections = {}
    for name, cls in (("scheduler", SchedulerConfig), ("grid", GridConfig),
                      ("adversary", AdversaryConfig), ("probe", ProbeConfig)):
        if name in data:
            sub = {k: _tuplize(v) for k, v in _build(cls, data.pop(name), name).items()}
            try:
                sections[name] = cls(**sub)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{name}: {exc}") from exc
    try:
        return ExperimentConfig(version=SCHEMA_VERSION, **data, **sections)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"config: {exc}") from exc


def loads(text: str) -> ExperimentConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return from_dict(data)


def load(path) -> ExperimentConfig:
    with open(path) as f:
        return loads(f.read())


# ---------------------------------------------------------------------------
# Presets
# ---------------------------------------------------------------------------

def preset(name: str, *, full: bool = False) -> ExperimentConfig:
    """Named ready-to-run configurations; --full switches the desk-scale
    horizons/windows (1e5) to 1e6."""
    horizon = 1_000_000 if full else 100_000
    window = 1_000_000 if full else 100_000
    if name == "exp1":
        return ExperimentConfig(horizon=horizon,
                                adversary=AdversaryConfig(kind="cyclic-arrival", rate_idx=0),
                                probe=ProbeConfig(window=window))
    if name == "exp2":
        return ExperimentConfig(horizon=horizon,
                                adversary=AdversaryConfig(kind="cyclic-edge-arrival"),
                                probe=ProbeConfig(window=window))
    if name == "exp-exponential":
        return ExperimentConfig(horizon=10_000_000,
                                adversary=AdversaryConfig(kind="exponential", edges=6, eps=0.1))
    if name == "grid-probe":
        return ExperimentConfig(horizon=horizon, probe=ProbeConfig(window=window))
    raise ConfigError(f"unknown preset {name!r} "
                      "(expected exp1, exp2, exp-exponential, grid-probe)")
