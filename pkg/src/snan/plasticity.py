"""Trace-product learning rules: STDP, astrocyte-driven heterosynaptic
depression, their sum, the reward channel feeding ``r1`` and the
bidirectional homeostatic rule on neuron-to-astrocyte weights.

Rule helpers are written with plain arithmetic and ``numpy`` ufuncs so the
same functions evaluate one synapse or a whole projection.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Protocol, Sequence

import numpy as np

from .substrate import DEFAULT_TRACE_MAX, Synapse, Trace, update_traces

W_MIN = -64
W_MAX = 64

TRACE_NAMES = ("x0", "y0", "x1", "y1", "r1")


@dataclass(frozen=True)
class StdpParams:
    a: float = 2.0**-5
    b: float = 2.0**-6

    def __post_init__(self) -> None:
        if self.a <= 0 or self.b <= 0:
            raise ValueError(f"STDP rates must be positive, got a={self.a} b={self.b}")


@dataclass(frozen=True)
class HsdParams:
    c: float = 2.0**-2
    d: float = 2.0**-1

    def __post_init__(self) -> None:
        if self.c <= 0 or self.d <= 0:
            raise ValueError(f"HSD rates must be positive, got c={self.c} d={self.d}")


@dataclass(frozen=True)
class TraceParams:
    x1_impulse: int = 16
    y1_impulse: int = 16
    r1_impulse: int = 8
    tau: float = 2.0
    trace_max: int = DEFAULT_TRACE_MAX


@dataclass
class TraceSet:
    """Per-synapse traces. ``x0``/``y0`` are this step's spike indicators."""

    x0: Any = 0
    y0: Any = 0
    x1: Any = 0
    y1: Any = 0
    r1: Any = 0

    @classmethod
    def zeros(cls, n: int) -> "TraceSet":
        return cls(
            x0=np.zeros(n, dtype=np.int64),
            y0=np.zeros(n, dtype=np.int64),
            x1=np.zeros(n, dtype=np.int64),
            y1=np.zeros(n, dtype=np.int64),
            r1=np.zeros(n, dtype=np.int64),
        )


def stdp_dw(x0, y0, x1, y1, p: StdpParams):
    return p.a * x1 * y0 - p.b * x0 * y1


def hsd_dw(x0, y0, r1, p: HsdParams):
    return -p.c * y0 * r1 + p.d * x0 * r1


def combined_dw(stdp_term, hsd_term):
    return stdp_term + hsd_term


class LearningRule(Protocol):
    uses_reward: bool

    def dw(self, traces: TraceSet):
        ...


@dataclass(frozen=True)
class TraceProductRule:
    """A rule written as a sum of ``coefficient * trace * trace ...`` terms."""

    terms: tuple[tuple[float, tuple[str, ...]], ...]

    def __post_init__(self) -> None:
        for _, factors in self.terms:
            unknown = set(factors) - set(TRACE_NAMES)
            if unknown:
                raise ValueError(f"Unknown trace names in rule term: {sorted(unknown)}")

    @property
    def uses_reward(self) -> bool:
        return any("r1" in factors for _, factors in self.terms)

    def dw(self, traces: TraceSet):
        total = 0.0
        for coefficient, factors in self.terms:
            product = coefficient
            for name in factors:
                product = product * getattr(traces, name)
            total = total + product
        return total


@dataclass(frozen=True)
class StdpRule:
    params: StdpParams = field(default_factory=StdpParams)
    uses_reward: bool = False

    def dw(self, traces: TraceSet):
        return stdp_dw(traces.x0, traces.y0, traces.x1, traces.y1, self.params)


@dataclass(frozen=True)
class CombinedRule:
    stdp: StdpParams = field(default_factory=StdpParams)
    hsd: HsdParams = field(default_factory=HsdParams)
    uses_reward: bool = True

    def dw(self, traces: TraceSet):
        return combined_dw(
            stdp_dw(traces.x0, traces.y0, traces.x1, traces.y1, self.stdp),
            hsd_dw(traces.x0, traces.y0, traces.r1, self.hsd),
        )


def accumulate_weight(weight, residual, dw, w_min: int = W_MIN, w_max: int = W_MAX):
    """Add ``dw`` to the fractional residual and move its whole part, rounded
    toward zero, into the integer weight."""
    total = residual + dw
    whole = np.trunc(total)
    new_weight = np.clip(weight + whole.astype(np.int64), w_min, w_max)
    return new_weight, total - whole


def apply_rule(
    syn: Synapse, traces: TraceSet, residual: float = 0.0, w_min: int = W_MIN, w_max: int = W_MAX
) -> tuple[Synapse, float]:
    if syn.rule is None:
        raise ValueError(f"Synapse {syn.pre_id}->{syn.post_id} has no plasticity rule")
    weight, residual = accumulate_weight(syn.weight, residual, syn.rule.dw(traces), w_min, w_max)
    return replace(syn, weight=int(weight)), float(residual)


@dataclass(frozen=True)
class RewardChannel:
    """``r1`` traces of the synapses tagged by one astrocyte's SG output."""

    source: int
    tagged: tuple[int, ...]
    r1: Trace = field(default_factory=lambda: Trace(impulse=8, tau=2.0))
    values: np.ndarray = field(default=None, compare=False)

    def __post_init__(self) -> None:
        if self.values is None:
            object.__setattr__(self, "values", np.full(len(self.tagged), self.r1.value, dtype=np.int64))


def feed_reward(chan: RewardChannel, sg_spiked: bool) -> RewardChannel:
    values = update_traces(
        chan.values, np.full(len(chan.tagged), bool(sg_spiked)), chan.r1.impulse, chan.r1.tau, chan.r1.trace_max
    )
    return replace(chan, values=values)


@dataclass(frozen=True)
class BhpParams:
    a: float = 2.0**-6
    b: float = 2.0**-2
    c: float = 2.0**-3
    w_max: float = 16.0
    k: int = 4
    t_max: float = 1024.0

    def __post_init__(self) -> None:
        if min(self.a, self.b, self.c, self.w_max, self.t_max) <= 0:
            raise ValueError("BHP a, b, c, w_max and t_max must be positive")
        if self.k < 0:
            raise ValueError(f"BHP k must be non-negative, got {self.k}")

    @property
    def period(self) -> int:
        return 2**self.k


@dataclass(frozen=True)
class BhpState:
    t: Any = 0.0
    w: Any = 0.0
    epoch_counter: int = 0

    @classmethod
    def zeros(cls, n: int, w0: float = 0.0) -> "BhpState":
        return cls(t=np.zeros(n), w=np.full(n, float(w0)), epoch_counter=0)


def bhp_step(s: BhpState, x0, p: BhpParams) -> BhpState:
    t = np.minimum(s.t + p.a * x0, p.t_max)
    counter = s.epoch_counter + 1
    if counter % p.period:
        return BhpState(t=t, w=s.w, epoch_counter=counter)
    w = np.clip(s.w + p.b * (p.w_max - s.w) - p.c * t, 0.0, p.w_max)
    return BhpState(t=t, w=w, epoch_counter=counter)


def stdp_rule_terms(p: StdpParams) -> TraceProductRule:
    return TraceProductRule(terms=((p.a, ("x1", "y0")), (-p.b, ("x0", "y1"))))


def hsd_rule_terms(p: HsdParams) -> TraceProductRule:
    return TraceProductRule(terms=((-p.c, ("y0", "r1")), (p.d, ("x0", "r1"))))


def sum_rules(rules: Sequence[TraceProductRule]) -> TraceProductRule:
    terms: tuple = ()
    for rule in rules:
        terms = terms + rule.terms
    return TraceProductRule(terms=terms)
