"""Fixed-point compartment dynamics, spike traces and Poisson sources.

Every state variable is an integer. Decays are 12-bit fractions: a decay of
``d`` multiplies by ``(4096 - d) / 4096`` and floors the result.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import WiringError

logger = logging.getLogger(__name__)

DECAY_ONE = 4096
INT32_MIN = -(2**31)
INT32_MAX = 2**31 - 1

DEFAULT_TRACE_MAX = 127


@dataclass(frozen=True)
class CompartmentConfig:
    current_decay: int = DECAY_ONE
    voltage_decay: int = 0
    threshold: int = 1
    bias: int = 0
    refractory_steps: int = 0
    spiking: bool = True
    v_min: int = INT32_MIN

    def __post_init__(self) -> None:
        for name in ("current_decay", "voltage_decay"):
            value = getattr(self, name)
            if not 0 <= value <= DECAY_ONE:
                raise ValueError(f"{name} must be in [0, {DECAY_ONE}], got {value}")
        if self.spiking and self.threshold <= 0:
            raise ValueError(f"threshold must be positive for a spiking compartment, got {self.threshold}")
        if self.refractory_steps < 0:
            raise ValueError(f"refractory_steps must be non-negative, got {self.refractory_steps}")

    def with_overrides(self, overrides: Optional[dict] = None) -> "CompartmentConfig":
        if not overrides:
            return self
        unknown = set(overrides) - set(self.__dataclass_fields__)
        if unknown:
            raise ValueError(f"Unknown compartment fields: {sorted(unknown)}")
        return replace(self, **overrides)


@dataclass(frozen=True)
class CompartmentState:
    u: int = 0
    v: int = 0
    refractory_remaining: int = 0


def _saturate(value: int) -> int:
    if value > INT32_MAX:
        return INT32_MAX
    if value < INT32_MIN:
        return INT32_MIN
    return value


def decay(value: int, amount: int) -> int:
    return (value * (DECAY_ONE - amount)) // DECAY_ONE


def step_compartment(
    state: CompartmentState, cfg: CompartmentConfig, synaptic_input: int
) -> tuple[CompartmentState, bool]:
    u = _saturate(decay(state.u, cfg.current_decay) + int(synaptic_input))
    v = _saturate(decay(state.v, cfg.voltage_decay) + u + cfg.bias)
    if v < cfg.v_min:
        v = cfg.v_min
    if state.refractory_remaining > 0:
        return CompartmentState(u, 0, state.refractory_remaining - 1), False
    if cfg.spiking and v >= cfg.threshold:
        return CompartmentState(u, 0, cfg.refractory_steps), True
    return CompartmentState(u, v, 0), False


@dataclass
class CompartmentArrays:
    """Configuration and state of many compartments, one entry per unit."""

    current_decay: np.ndarray
    voltage_decay: np.ndarray
    threshold: np.ndarray
    bias: np.ndarray
    refractory_steps: np.ndarray
    spiking: np.ndarray
    v_min: np.ndarray
    u: np.ndarray
    v: np.ndarray
    refractory_remaining: np.ndarray

    @classmethod
    def from_configs(cls, configs: list[CompartmentConfig]) -> "CompartmentArrays":
        def column(name: str, dtype=np.int64) -> np.ndarray:
            return np.array([getattr(cfg, name) for cfg in configs], dtype=dtype)

        n = len(configs)
        return cls(
            current_decay=column("current_decay"),
            voltage_decay=column("voltage_decay"),
            threshold=column("threshold"),
            bias=column("bias"),
            refractory_steps=column("refractory_steps"),
            spiking=column("spiking", dtype=bool),
            v_min=column("v_min"),
            u=np.zeros(n, dtype=np.int64),
            v=np.zeros(n, dtype=np.int64),
            refractory_remaining=np.zeros(n, dtype=np.int64),
        )

    def __len__(self) -> int:
        return len(self.u)


def step_compartments(arrays: CompartmentArrays, synaptic_input: np.ndarray) -> np.ndarray:
    """Advance every compartment in place; returns the boolean spike vector."""
    u = (arrays.u * (DECAY_ONE - arrays.current_decay)) // DECAY_ONE + synaptic_input
    np.clip(u, INT32_MIN, INT32_MAX, out=u)
    v = (arrays.v * (DECAY_ONE - arrays.voltage_decay)) // DECAY_ONE + u + arrays.bias
    np.clip(v, INT32_MIN, INT32_MAX, out=v)
    np.maximum(v, arrays.v_min, out=v)

    refractory = arrays.refractory_remaining > 0
    spiked = arrays.spiking & ~refractory & (v >= arrays.threshold)
    v[refractory | spiked] = 0
    remaining = np.where(refractory, arrays.refractory_remaining - 1, 0)
    remaining[spiked] = arrays.refractory_steps[spiked]

    arrays.u = u
    arrays.v = v
    arrays.refractory_remaining = remaining
    return spiked


def trace_decay_factor(tau: float) -> int:
    return int(round(DECAY_ONE * math.exp(-1.0 / tau)))


@dataclass(frozen=True)
class Trace:
    value: int = 0
    impulse: int = 16
    tau: float = 2.0
    trace_max: int = DEFAULT_TRACE_MAX

    def __post_init__(self) -> None:
        if self.impulse <= 0 or self.tau <= 0 or self.trace_max <= 0:
            raise ValueError("Trace impulse, tau and trace_max must be positive")
        if not 0 <= self.value <= self.trace_max:
            raise ValueError(f"Trace value {self.value} outside [0, {self.trace_max}]")


def update_trace(tr: Trace, spiked_now: bool) -> Trace:
    value = (tr.value * trace_decay_factor(tr.tau)) // DECAY_ONE
    if spiked_now:
        value = min(value + tr.impulse, tr.trace_max)
    return replace(tr, value=value)


def update_traces(
    values: np.ndarray, spiked: np.ndarray, impulse: int, tau: float, trace_max: int = DEFAULT_TRACE_MAX
) -> np.ndarray:
    decayed = (values * trace_decay_factor(tau)) // DECAY_ONE
    return np.where(spiked, np.minimum(decayed + impulse, trace_max), decayed)


@dataclass(frozen=True)
class SpikeEvent:
    step: int
    unit_id: int


@dataclass(frozen=True)
class Synapse:
    pre_id: int
    post_id: int
    weight: int
    delay: int = 1
    rule: Optional[object] = None

    def __post_init__(self) -> None:
        if self.delay < 1:
            raise WiringError(
                f"Synapse {self.pre_id}->{self.post_id}: delay must be >= 1, got {self.delay}"
            )


def emission_probability(rate_hz: float, dt_ms: float) -> float:
    return min(max(rate_hz * dt_ms / 1000.0, 0.0), 1.0)


@dataclass(frozen=True)
class PoissonSource:
    rate_hz: float
    rng_stream: np.random.Generator
    dt_ms: float = 1.0

    def __post_init__(self) -> None:
        if self.rate_hz < 0:
            raise ValueError(f"rate_hz must be non-negative, got {self.rate_hz}")
        if self.dt_ms <= 0:
            raise ValueError(f"dt_ms must be positive, got {self.dt_ms}")

    @classmethod
    def seeded(cls, rate_hz: float, seed: int, dt_ms: float = 1.0) -> "PoissonSource":
        logger.debug("Poisson source seed %d", seed)
        return cls(rate_hz=rate_hz, rng_stream=np.random.default_rng(seed), dt_ms=dt_ms)


def poisson_spike(src: PoissonSource) -> tuple[PoissonSource, bool]:
    p = emission_probability(src.rate_hz, src.dt_ms)
    return src, bool(src.rng_stream.random() < p)
