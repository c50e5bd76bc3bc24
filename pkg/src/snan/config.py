"""Experiment configuration: YAML files validated into frozen dataclasses."""
from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from typing import Any, Optional

import numpy as np
import yaml

from .astrocyte import AstrocytePrototype
from .errors import ConfigError
from .ising import CouplingSpec
from .plasticity import BhpParams, HsdParams, StdpParams, TraceParams
from .substrate import CompartmentConfig

logger = logging.getLogger(__name__)

EXPERIMENTS = ("sync", "group-sync", "memory", "chaos")
SHIPPED_CONFIGS = {name: f"{name}.yaml" for name in EXPERIMENTS}


@dataclass(frozen=True)
class SicTableRanges:
    weights: tuple[int, ...]
    decays: tuple[int, ...]
    thresholds: tuple[int, ...]


@dataclass(frozen=True)
class AstrocyteSection:
    prototypes: tuple[AstrocytePrototype, ...]
    prototype_map: tuple[int, ...] = ()
    input_weight: int = 1
    output_weight: int = 0
    sic_table: Optional[SicTableRanges] = None


@dataclass(frozen=True)
class SyncSection:
    n_sources: int
    source_rate_hz: float
    n_post: int
    connection_probability: float
    weight: int
    neuron: CompartmentConfig


@dataclass(frozen=True)
class GroupSyncSection:
    n_inputs: int
    n_outputs: int
    input_rate_hz: float
    connection_probability: float
    weight: int
    neuron: CompartmentConfig
    input_groups: tuple[tuple[int, ...], ...]
    output_groups: tuple[tuple[int, ...], ...]
    score_groups: tuple[tuple[int, ...], ...]
    bin_ms: float = 10.0


@dataclass(frozen=True)
class PatternSet:
    patterns: tuple[tuple[int, ...], ...]
    baseline_rate_hz: float = 5.0
    active_rate_hz: float = 100.0
    grid: int = 3

    def __post_init__(self) -> None:
        cells = self.grid * self.grid
        if len(self.patterns) != 5:
            raise ConfigError(f"Expected 5 patterns, got {len(self.patterns)}")
        for index, pattern in enumerate(self.patterns):
            if len(set(pattern)) != 3:
                raise ConfigError(f"Pattern {index} must have exactly 3 distinct active blocks, got {list(pattern)}")
            if any(not 0 <= cell < cells for cell in pattern):
                raise ConfigError(f"Pattern {index} references blocks outside the {self.grid}x{self.grid} grid")
        for i in range(len(self.patterns)):
            for j in range(i + 1, len(self.patterns)):
                overlap = set(self.patterns[i]) & set(self.patterns[j])
                if len(overlap) != 1:
                    raise ConfigError(f"Patterns {i} and {j} overlap in {len(overlap)} blocks, expected 1")
        if not 0 <= self.baseline_rate_hz < self.active_rate_hz:
            raise ConfigError("Pattern rates must satisfy 0 <= baseline_rate_hz < active_rate_hz")

    def rates(self, index: int) -> np.ndarray:
        rates = np.full(self.grid * self.grid, float(self.baseline_rate_hz))
        rates[list(self.patterns[index])] = self.active_rate_hz
        return rates

    def grids(self) -> list[list[list[int]]]:
        out = []
        for pattern in self.patterns:
            cells = [1 if c in pattern else 0 for c in range(self.grid * self.grid)]
            out.append([cells[r * self.grid : (r + 1) * self.grid] for r in range(self.grid)])
        return out


@dataclass(frozen=True)
class MemorySection:
    patterns: PatternSet
    learned_pattern: int
    train_s: float
    retrieval_s: float
    initial_weight: int
    neuron: CompartmentConfig


@dataclass(frozen=True)
class PlasticitySection:
    stdp: StdpParams = field(default_factory=StdpParams)
    hsd: HsdParams = field(default_factory=HsdParams)
    traces: TraceParams = field(default_factory=TraceParams)
    w_min: int = -64
    w_max: int = 64


@dataclass(frozen=True)
class IsingSection:
    coupling: CouplingSpec
    t_grid: tuple[float, ...]
    burn_in: int = 200
    n_samples: int = 300
    tick_steps: int = 5
    sweeps_per_tick: int = 1
    phase_burn_in: int = 50


@dataclass(frozen=True)
class MonitorSection:
    n_inputs: int = 1764
    r_max: float = 200.0
    g: str = "identity"
    eta: Optional[float] = None
    train_s: float = 25.0
    test_s: float = 25.0
    rate_window_ms: float = 100.0
    w0: float = 0.0
    bhp: BhpParams = field(default_factory=BhpParams)
    record_drive: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    seed: int
    dt_ms: float
    output_dir: str
    astrocyte: AstrocyteSection
    duration_s: float = 0.0
    ablate_astrocyte: bool = False
    snapshot_every: int = 0
    sync: Optional[SyncSection] = None
    group_sync: Optional[GroupSyncSection] = None
    memory: Optional[MemorySection] = None
    plasticity: Optional[PlasticitySection] = None
    ising: Optional[IsingSection] = None
    monitor: Optional[MonitorSection] = None
    source: str = field(default="", compare=False)
    raw: dict = field(default_factory=dict, compare=False, repr=False)

    def steps(self, seconds: float) -> int:
        return int(round(seconds * 1000.0 / self.dt_ms))

    def with_overrides(
        self, seed: Optional[int] = None, output_dir: Optional[str] = None, ablate_astrocyte: Optional[bool] = None
    ) -> "ExperimentConfig":
        changes: dict[str, Any] = {}
        raw = dict(self.raw)
        if seed is not None:
            changes["seed"] = raw["seed"] = int(seed)
        if output_dir is not None:
            changes["output_dir"] = raw["output_dir"] = output_dir
        if ablate_astrocyte:
            changes["ablate_astrocyte"] = raw["ablate_astrocyte"] = True
        return replace(self, raw=raw, **changes)

    def canonical_json(self) -> str:
        return json.dumps(self.raw, sort_keys=True, separators=(",", ":"))

    def sha256(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()


def shipped_config_path(name: str) -> str:
    if name not in SHIPPED_CONFIGS:
        raise ConfigError(f"Unknown shipped config {name!r}; expected one of {list(SHIPPED_CONFIGS)}")
    return str(resources.files("snan").joinpath("configs", SHIPPED_CONFIGS[name]))


def load_experiment_config(path_or_name: str) -> ExperimentConfig:
    """Load a YAML config from a path, or a shipped config by experiment name."""
    path = path_or_name
    if not os.path.exists(path) and path_or_name in SHIPPED_CONFIGS:
        path = shipped_config_path(path_or_name)
    try:
        with open(path, encoding="utf-8") as handle:
            raw = yaml.safe_load(handle)
    except FileNotFoundError as exc:
        raise ConfigError(f"Config not found: {path_or_name}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"Invalid YAML in {path}: {exc}") from exc
    logger.debug("Loaded config %s", path)
    return parse_experiment_config(raw, source=path)


def parse_experiment_config(raw: Any, source: str = "<memory>") -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    try:
        return _parse(raw, source)
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def _section(raw: dict, name: str, source: str) -> dict:
    value = raw.get(name)
    if not isinstance(value, dict):
        raise ConfigError(f"{source}: missing or invalid section {name!r}")
    return value


def _build(cls, data: dict, source: str, where: str):
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"{source}: unknown keys in {where}: {sorted(unknown)}")
    return cls(**data)


def _compartment(data: dict, source: str, where: str) -> CompartmentConfig:
    return _build(CompartmentConfig, dict(data), source, where)


def _groups(value) -> tuple[tuple[int, ...], ...]:
    return tuple(tuple(int(i) for i in group) for group in value)


def _prototype(data: dict, source: str) -> AstrocytePrototype:
    data = dict(data)
    overrides = data.pop("overrides", None) or {}
    proto = _build(AstrocytePrototype, data, source, "astrocyte.prototypes")
    return replace(proto, low_level_overrides=dict(overrides))


def _astrocyte(raw: dict, source: str) -> AstrocyteSection:
    data = dict(_section(raw, "astrocyte", source))
    prototypes = tuple(_prototype(p, source) for p in data.pop("prototypes", []) or [])
    if not prototypes:
        raise ConfigError(f"{source}: astrocyte.prototypes must list at least one prototype")
    table = data.pop("sic_table", None)
    ranges = None
    if table is not None:
        ranges = SicTableRanges(
            weights=tuple(int(w) for w in table["weights"]),
            decays=tuple(int(d) for d in table["decays"]),
            thresholds=tuple(int(t) for t in table["thresholds"]),
        )
    prototype_map = tuple(int(i) for i in data.pop("prototype_map", ()) or ())
    if any(not 0 <= i < len(prototypes) for i in prototype_map):
        raise ConfigError(f"{source}: astrocyte.prototype_map references a missing prototype")
    section = _build(AstrocyteSection, dict(data, prototypes=prototypes, prototype_map=prototype_map), source, "astrocyte")
    return replace(section, sic_table=ranges)


def _plasticity(raw: dict, source: str) -> PlasticitySection:
    data = dict(raw.get("plasticity") or {})
    return PlasticitySection(
        stdp=_build(StdpParams, data.pop("stdp", {}) or {}, source, "plasticity.stdp"),
        hsd=_build(HsdParams, data.pop("hsd", {}) or {}, source, "plasticity.hsd"),
        traces=_build(TraceParams, data.pop("traces", {}) or {}, source, "plasticity.traces"),
        **data,
    )


def _check_positive(source: str, **values) -> None:
    for name, value in values.items():
        if value is None or value <= 0:
            raise ConfigError(f"{source}: {name} must be positive, got {value}")


def _check_probability(source: str, name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise ConfigError(f"{source}: {name} must be in [0, 1], got {value}")


def _parse(raw: dict, source: str) -> ExperimentConfig:
    experiment = raw.get("experiment")
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"{source}: unknown experiment {experiment!r}; expected one of {list(EXPERIMENTS)}")
    seed = int(raw.get("seed", 0))
    if not 0 <= seed < 2**64:
        raise ConfigError(f"{source}: seed must be an unsigned 64-bit integer, got {seed}")
    dt_ms = float(raw.get("dt_ms", 1.0))
    duration_s = float(raw.get("duration_s", 0.0))
    _check_positive(source, dt_ms=dt_ms)
    snapshot_every = int(raw.get("snapshot_every", 0))
    if snapshot_every < 0:
        raise ConfigError(f"{source}: snapshot_every must be non-negative")

    sections: dict[str, Any] = {}
    if experiment == "sync":
        data = dict(_section(raw, "network", source))
        data["neuron"] = _compartment(data.get("neuron", {}), source, "network.neuron")
        section = _build(SyncSection, data, source, "network")
        _check_positive(source, n_sources=section.n_sources, n_post=section.n_post, duration_s=duration_s)
        _check_probability(source, "network.connection_probability", section.connection_probability)
        sections["sync"] = section
    elif experiment == "group-sync":
        data = dict(_section(raw, "network", source))
        data["neuron"] = _compartment(data.get("neuron", {}), source, "network.neuron")
        for key in ("input_groups", "output_groups", "score_groups"):
            data[key] = _groups(data.get(key, ()))
        section = _build(GroupSyncSection, data, source, "network")
        _check_positive(source, n_inputs=section.n_inputs, n_outputs=section.n_outputs, duration_s=duration_s)
        _check_probability(source, "network.connection_probability", section.connection_probability)
        if len(section.input_groups) != len(section.output_groups):
            raise ConfigError(f"{source}: input_groups and output_groups must pair up per astrocyte")
        for key, limit in (("input_groups", section.n_inputs), ("output_groups", section.n_outputs), ("score_groups", section.n_outputs)):
            if any(not 0 <= i < limit for group in getattr(section, key) for i in group):
                raise ConfigError(f"{source}: network.{key} references neurons outside [0, {limit})")
        sections["group_sync"] = section
    elif experiment == "memory":
        data = dict(_section(raw, "memory", source))
        patterns = _build(PatternSet, dict(_section(data, "patterns", source)), source, "memory.patterns")
        data["patterns"] = replace(patterns, patterns=_groups(patterns.patterns))
        data["neuron"] = _compartment(data.get("neuron", {}), source, "memory.neuron")
        section = _build(MemorySection, data, source, "memory")
        if not 0 <= section.learned_pattern < len(section.patterns.patterns):
            raise ConfigError(f"{source}: memory.learned_pattern out of range")
        _check_positive(source, train_s=section.train_s, retrieval_s=section.retrieval_s)
        sections["memory"] = section
        sections["plasticity"] = _plasticity(raw, source)
    else:
        data = dict(_section(raw, "ising", source))
        coupling = dict(_section(data, "coupling", source))
        coupling["cluster_grid"] = tuple(coupling.get("cluster_grid", (16, 16)))
        coupling["intra_strength_range"] = tuple(coupling.get("intra_strength_range", (1.5, 2.5)))
        data["coupling"] = _build(CouplingSpec, coupling, source, "ising.coupling")
        data["t_grid"] = tuple(float(t) for t in data.get("t_grid", ()))
        if len(data["t_grid"]) < 3:
            raise ConfigError(f"{source}: ising.t_grid needs at least 3 temperatures")
        sections["ising"] = _build(IsingSection, data, source, "ising")
        monitor = dict(_section(raw, "monitor", source))
        monitor["bhp"] = _build(BhpParams, monitor.get("bhp", {}) or {}, source, "monitor.bhp")
        sections["monitor"] = _build(MonitorSection, monitor, source, "monitor")
        _check_positive(
            source,
            train_s=sections["monitor"].train_s,
            test_s=sections["monitor"].test_s,
            rate_window_ms=sections["monitor"].rate_window_ms,
        )

    return ExperimentConfig(
        experiment=experiment,
        seed=seed,
        dt_ms=dt_ms,
        output_dir=str(raw.get("output_dir", os.path.join("out", experiment))),
        astrocyte=_astrocyte(raw, source),
        duration_s=duration_s,
        ablate_astrocyte=bool(raw.get("ablate_astrocyte", False)),
        snapshot_every=snapshot_every,
        source=source,
        raw=json.loads(json.dumps(raw)),
        **sections,
    )
