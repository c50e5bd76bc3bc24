"""Synchronous step loop over sources, neurons, astrocytes and projections.

Every unit has a global integer id. Spikes emitted at step ``t`` are routed
with the weight they carry at emission and arrive at step ``t + delay``
through a ring buffer of per-unit input sums. Plastic projections update
after routing; reward channels feed ``r1`` last, so a rule evaluated at step
``t`` sees traces up to step ``t - 1`` and the current spike indicators.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .astrocyte import AstrocyteUnits, astrocyte_step
from .errors import WiringError
from .plasticity import W_MAX, W_MIN, LearningRule, RewardChannel, TraceParams, TraceSet, accumulate_weight, feed_reward
from .streams import iter_csv_dicts, write_csv
from .substrate import (
    CompartmentArrays,
    CompartmentConfig,
    SpikeEvent,
    Synapse,
    step_compartments,
    update_traces,
)

logger = logging.getLogger(__name__)

SPIKES_HEADER = ("step", "unit_id")
WEIGHTS_HEADER = ("step", "pre_id", "post_id", "weight")

POISSON = "poisson"
INPUT = "input"
NEURON = "neuron"
SR = "sr"
IP3 = "ip3"
SIC = "sic"
SG = "sg"

# kinds that may send spikes, and kinds that accept synaptic input
SPIKING_KINDS = frozenset({POISSON, INPUT, NEURON, SR, IP3, SG})
RECEIVING_KINDS = frozenset({NEURON, SR})


@dataclass
class PoissonGroup:
    ids: np.ndarray
    rates: np.ndarray
    rng: np.random.Generator
    dt_ms: float = 1.0

    def emit(self) -> np.ndarray:
        p = np.clip(self.rates * self.dt_ms / 1000.0, 0.0, 1.0)
        return self.rng.random(len(self.ids)) < p


@dataclass(eq=False)
class Projection:
    """A set of synapses sharing one learning rule."""

    pre: np.ndarray
    post: np.ndarray
    weights: np.ndarray
    delays: np.ndarray
    rule: Optional[LearningRule] = None
    trace_params: TraceParams = field(default_factory=TraceParams)
    w_min: int = W_MIN
    w_max: int = W_MAX
    name: str = ""
    residual: np.ndarray = None
    traces: TraceSet = None

    def __post_init__(self) -> None:
        n = len(self.pre)
        if not len(self.post) == len(self.weights) == len(self.delays) == n:
            raise WiringError(f"Projection {self.name!r}: pre/post/weights/delays lengths differ")
        if n and int(self.delays.min()) < 1:
            raise WiringError(f"Projection {self.name!r}: delays must be >= 1")
        if self.residual is None:
            self.residual = np.zeros(n)
        if self.traces is None:
            self.traces = TraceSet.zeros(n)

    def __len__(self) -> int:
        return len(self.pre)

    @property
    def plastic(self) -> bool:
        return self.rule is not None

    def synapses(self) -> list[Synapse]:
        return [
            Synapse(int(p), int(q), int(w), int(d), self.rule)
            for p, q, w, d in zip(self.pre, self.post, self.weights, self.delays)
        ]


@dataclass
class _RewardLink:
    channel: RewardChannel
    projection: Projection
    index: np.ndarray


class Network:
    def __init__(self, dt_ms: float = 1.0, seed: int = 0, snapshot_every: int = 0) -> None:
        if dt_ms <= 0:
            raise ValueError(f"dt_ms must be positive, got {dt_ms}")
        self.dt_ms = dt_ms
        self.seed = seed
        self.snapshot_every = snapshot_every
        self.kinds: list[str] = []
        self.poisson_groups: list[PoissonGroup] = []
        self.astrocytes: list = []
        self.projections: list[Projection] = []
        self.plasticity_enabled = True
        self.weight_snapshots: list[tuple[int, int, int, int]] = []
        self.t = 0
        self._seed_sequence = np.random.SeedSequence(seed)
        self._neuron_ids: list[int] = []
        self._neuron_configs: list[CompartmentConfig] = []
        self._input_ids: list[int] = []
        self._reward_links: list[_RewardLink] = []
        self._tagged: dict[int, set[int]] = {}
        self._pending_inputs: Optional[np.ndarray] = None
        self._neurons: Optional[CompartmentArrays] = None
        self._neuron_index = np.zeros(0, dtype=np.int64)
        self._input_index = np.zeros(0, dtype=np.int64)
        self._ring: Optional[np.ndarray] = None
        self._started = False

    @property
    def n_units(self) -> int:
        return len(self.kinds)

    @property
    def neurons(self) -> Optional[CompartmentArrays]:
        return self._neurons

    def _allocate(self, kind: str, n: int) -> np.ndarray:
        if self._started:
            raise WiringError("Cannot add units once the network has started stepping")
        start = len(self.kinds)
        self.kinds.extend([kind] * n)
        return np.arange(start, start + n, dtype=np.int64)

    def add_poisson(self, rates: Sequence[float] | float, n: Optional[int] = None) -> np.ndarray:
        rates = np.atleast_1d(np.asarray(rates, dtype=float))
        if n is not None:
            rates = np.broadcast_to(rates, (n,)).copy()
        if (rates < 0).any():
            raise ValueError("Poisson rates must be non-negative")
        ids = self._allocate(POISSON, len(rates))
        stream = self._seed_sequence.spawn(1)[0]
        logger.debug("Poisson group of %d sources, stream %s", len(ids), stream.spawn_key)
        self.poisson_groups.append(PoissonGroup(ids, rates, np.random.default_rng(stream), self.dt_ms))
        return ids

    def set_rates(self, ids: Sequence[int], rates: Sequence[float] | float) -> None:
        ids = np.asarray(ids, dtype=np.int64)
        rates = np.broadcast_to(np.asarray(rates, dtype=float), ids.shape)
        assigned = np.zeros(len(ids), dtype=bool)
        for group in self.poisson_groups:
            positions = np.searchsorted(group.ids, ids)
            hit = (positions < len(group.ids)) & (group.ids[np.minimum(positions, len(group.ids) - 1)] == ids)
            group.rates[positions[hit]] = rates[hit]
            assigned |= hit
        if not assigned.all():
            raise WiringError(f"Not Poisson sources: {ids[~assigned].tolist()}")

    def add_inputs(self, n: int) -> np.ndarray:
        """Externally driven spike units; see :meth:`set_input_spikes`."""
        ids = self._allocate(INPUT, n)
        self._input_ids.extend(int(i) for i in ids)
        return ids

    def set_input_spikes(self, ids: Sequence[int], spikes: Sequence[bool]) -> None:
        """Spikes emitted by input units on the next step."""
        if self._pending_inputs is None:
            self._pending_inputs = np.zeros(self.n_units, dtype=bool)
        ids = np.asarray(ids, dtype=np.int64)
        self._check_ids(ids, {INPUT}, "input spikes")
        self._pending_inputs[ids] = np.asarray(spikes, dtype=bool)

    def add_neurons(self, n: int, cfg: CompartmentConfig) -> np.ndarray:
        ids = self._allocate(NEURON, n)
        self._neuron_ids.extend(int(i) for i in ids)
        self._neuron_configs.extend([cfg] * n)
        return ids

    def add_astrocyte(self, a):
        if a.unit_ids is not None:
            raise WiringError("Astrocyte is already attached to a network")
        start = self.n_units
        for kind in (SR, IP3, SIC, SG):
            self._allocate(kind, 1)
        attached = replace(a, unit_ids=AstrocyteUnits(start, start + 1, start + 2, start + 3), network=self)
        self.astrocytes.append(attached)
        return attached

    def astrocyte(self, a):
        """Current state of the astrocyte ``a`` refers to."""
        for current in self.astrocytes:
            if current.unit_ids == a.unit_ids:
                return current
        raise WiringError(f"Astrocyte {a.unit_ids} is not part of this network")

    def _check_ids(self, ids: np.ndarray, allowed: Iterable[str], role: str) -> None:
        allowed = set(allowed)
        for unit in np.unique(ids):
            if not 0 <= unit < self.n_units:
                raise WiringError(f"Unknown unit id {int(unit)} used as {role}")
            if self.kinds[unit] not in allowed:
                raise WiringError(f"Unit {int(unit)} of kind {self.kinds[unit]!r} cannot be used as {role}")

    def connect(
        self,
        pre: Sequence[int],
        post: Sequence[int],
        weights: Sequence[int] | int,
        delay: Sequence[int] | int = 1,
        rule: Optional[LearningRule] = None,
        trace_params: Optional[TraceParams] = None,
        w_min: int = W_MIN,
        w_max: int = W_MAX,
        name: str = "",
    ) -> Projection:
        if self._started:
            raise WiringError("Cannot add projections once the network has started stepping")
        pre = np.asarray(pre, dtype=np.int64)
        post = np.asarray(post, dtype=np.int64)
        if pre.shape != post.shape or pre.ndim != 1:
            raise WiringError(f"Projection {name!r}: pre and post must be 1-D and equally long")
        self._check_ids(pre, SPIKING_KINDS, "presynaptic unit")
        self._check_ids(post, RECEIVING_KINDS, "postsynaptic unit")
        projection = Projection(
            pre=pre,
            post=post,
            weights=np.broadcast_to(np.asarray(weights, dtype=np.int64), pre.shape).copy(),
            delays=np.broadcast_to(np.asarray(delay, dtype=np.int64), pre.shape).copy(),
            rule=rule,
            trace_params=trace_params or TraceParams(),
            w_min=w_min,
            w_max=w_max,
            name=name,
        )
        if rule is not None:
            np.clip(projection.weights, w_min, w_max, out=projection.weights)
        self.projections.append(projection)
        return projection

    def connect_synapses(self, synapses: Sequence[Synapse], **kwargs) -> Projection:
        return self.connect(
            [s.pre_id for s in synapses],
            [s.post_id for s in synapses],
            [s.weight for s in synapses],
            [s.delay for s in synapses],
            **kwargs,
        )

    def add_reward_channel(self, channel: RewardChannel, projection: Projection) -> None:
        if not any(p is projection for p in self.projections):
            raise WiringError("Reward channel targets a projection outside this network")
        if not 0 <= channel.source < self.n_units or self.kinds[channel.source] != SG:
            raise WiringError(f"Reward channel source {channel.source} is not an SG unit")
        tagged = self._tagged.setdefault(id(projection), set())
        overlap = tagged & set(channel.tagged)
        if overlap:
            raise WiringError(f"Synapses {sorted(overlap)} already carry a reward channel")
        if channel.tagged and not 0 <= max(channel.tagged) < len(projection):
            raise WiringError("Reward channel tags a synapse index outside the projection")
        tagged.update(channel.tagged)
        self._reward_links.append(_RewardLink(channel, projection, np.asarray(channel.tagged, dtype=np.int64)))

    @property
    def reward_channels(self) -> list[RewardChannel]:
        return [link.channel for link in self._reward_links]

    def _start(self) -> None:
        self._started = True
        self._neurons = CompartmentArrays.from_configs(self._neuron_configs)
        max_delay = max((int(p.delays.max()) for p in self.projections if len(p)), default=1)
        self._ring = np.zeros((max_delay + 1, self.n_units), dtype=np.int64)
        pending = np.zeros(self.n_units, dtype=bool)
        if self._pending_inputs is not None:
            pending[: len(self._pending_inputs)] = self._pending_inputs
        self._pending_inputs = pending
        self._neuron_index = np.asarray(self._neuron_ids, dtype=np.int64)
        self._input_index = np.asarray(self._input_ids, dtype=np.int64)
        logger.debug(
            "Network start: %d units, %d projections, %d astrocytes, ring depth %d",
            self.n_units,
            len(self.projections),
            len(self.astrocytes),
            len(self._ring),
        )
        self._snapshot(0)

    def step_spikes(self) -> np.ndarray:
        """Advance one step and return the boolean spike vector over unit ids."""
        if not self._started:
            self._start()
        t = self.t
        slot = t % len(self._ring)
        synaptic_input = self._ring[slot].copy()
        self._ring[slot] = 0

        spikes = np.zeros(self.n_units, dtype=bool)
        for group in self.poisson_groups:
            spikes[group.ids] = group.emit()
        if len(self._input_index):
            spikes[self._input_index] = self._pending_inputs[self._input_index]
            self._pending_inputs[self._input_index] = False
        if len(self._neuron_index):
            spikes[self._neuron_index] = step_compartments(self._neurons, synaptic_input[self._neuron_index])
        self._step_astrocytes(synaptic_input, spikes)

        for projection in self.projections:
            self._route(projection, spikes, t)
        for projection in self.projections:
            if projection.plastic:
                self._learn(projection, spikes)
        for link in self._reward_links:
            link.channel = feed_reward(link.channel, bool(spikes[link.channel.source]))
            link.projection.traces.r1[link.index] = link.channel.values

        self.t = t + 1
        if self.snapshot_every and self.t % self.snapshot_every == 0:
            self._snapshot(self.t)
        return spikes

    def _step_astrocytes(self, synaptic_input: np.ndarray, spikes: np.ndarray) -> None:
        for index, a in enumerate(self.astrocytes):
            units = a.unit_ids
            stepped, sg_spiked, ip3_spiked = astrocyte_step(a, int(synaptic_input[units.sr]))
            self.astrocytes[index] = stepped
            spikes[units.sr] = stepped.last_spikes[0]
            spikes[units.ip3] = ip3_spiked
            spikes[units.sg] = sg_spiked

    def _route(self, projection: Projection, spikes: np.ndarray, t: int) -> None:
        fired = spikes[projection.pre]
        if not fired.any():
            return
        slots = (t + projection.delays[fired]) % len(self._ring)
        np.add.at(self._ring, (slots, projection.post[fired]), projection.weights[fired])

    def _learn(self, projection: Projection, spikes: np.ndarray) -> None:
        traces = projection.traces
        params = projection.trace_params
        traces.x0 = spikes[projection.pre].astype(np.int64)
        traces.y0 = spikes[projection.post].astype(np.int64)
        if self.plasticity_enabled and (traces.x0.any() or traces.y0.any()):
            projection.weights, projection.residual = accumulate_weight(
                projection.weights, projection.residual, projection.rule.dw(traces), projection.w_min, projection.w_max
            )
        traces.x1 = update_traces(traces.x1, traces.x0 > 0, params.x1_impulse, params.tau, params.trace_max)
        traces.y1 = update_traces(traces.y1, traces.y0 > 0, params.y1_impulse, params.tau, params.trace_max)

    def _snapshot(self, step: int) -> None:
        if not self.snapshot_every:
            return
        for projection in self.projections:
            if projection.plastic:
                self.weight_snapshots.extend(
                    (step, int(p), int(q), int(w))
                    for p, q, w in zip(projection.pre, projection.post, projection.weights)
                )

    def step(self) -> list[SpikeEvent]:
        t = self.t
        spikes = self.step_spikes()
        return [SpikeEvent(t, int(unit)) for unit in np.flatnonzero(spikes)]

    def run(self, n_steps: int) -> list[SpikeEvent]:
        events: list[SpikeEvent] = []
        for _ in range(n_steps):
            events.extend(self.step())
        return events


def step_network(net: Network, t: int) -> list[SpikeEvent]:
    """One synchronous update at step ``t``; events come back sorted by unit id."""
    if t != net.t:
        raise ValueError(f"Network is at step {net.t}, cannot step {t}")
    return net.step()


def write_spikes_csv(path: str, events: Iterable[SpikeEvent]) -> str:
    return write_csv(path, SPIKES_HEADER, ((e.step, e.unit_id) for e in events))


def read_spikes_csv(path: str) -> list[SpikeEvent]:
    return [SpikeEvent(int(row["step"]), int(row["unit_id"])) for row in iter_csv_dicts(path, SPIKES_HEADER)]


def write_weights_csv(path: str, snapshots: Iterable[tuple[int, int, int, int]]) -> str:
    return write_csv(path, WEIGHTS_HEADER, snapshots)
