"""Four-compartment astrocyte (SR -> IP3 -> SIC -> SG) and its wiring API.

An astrocyte is described by an :class:`AstrocytePrototype` (sensitivity plus
the SIC burst it should produce), realised as an :class:`AstrocyteInstance`
whose SIC/SG parameters come from the closest row of a SIC configuration
table, and wired to neurons through :class:`ConnectionMask` objects.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Any, NamedTuple, Optional, Sequence

import numpy as np

from .errors import WiringError
from .plasticity import RewardChannel
from .sic_table import SicConfigTable, default_sic_table, lookup_sic_config, sg_config, sic_config
from .substrate import DECAY_ONE, CompartmentConfig, CompartmentState, Synapse, Trace, step_compartment

logger = logging.getLogger(__name__)

DEFAULT_IP3_THRESHOLD = 256
DEFAULT_IP3_VOLTAGE_DECAY = 1

SIC_PARAMETERS = ("ip3_to_sic_weight", "sic_current_decay", "sg_threshold")
COMPARTMENTS = ("sr", "ip3", "sic", "sg")


@dataclass(frozen=True)
class AstrocytePrototype:
    """Target behaviour of an astrocyte.

    ``low_level_overrides`` may pin any of ``ip3_to_sic_weight``,
    ``sic_current_decay`` and ``sg_threshold`` directly, and may carry
    per-compartment dicts under ``sr``/``ip3``/``sic``/``sg`` with
    :class:`CompartmentConfig` fields. Overrides are applied after the table
    lookup, flat keys first.
    """

    ip3_sensitivity: int = 1
    sic_amplitude: float = 1000.0
    sic_window: float = 299.0
    low_level_overrides: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.ip3_sensitivity <= 0:
            raise ValueError(f"ip3_sensitivity must be positive, got {self.ip3_sensitivity}")
        if self.sic_amplitude <= 0:
            raise ValueError(f"sic_amplitude must be positive, got {self.sic_amplitude}")
        if self.sic_window <= 0:
            raise ValueError(f"sic_window must be positive, got {self.sic_window}")
        if self.sic_amplitude * self.sic_window / 1000.0 < 1.0:
            raise ValueError(
                f"sic_amplitude={self.sic_amplitude} Hz over sic_window={self.sic_window} ms "
                "cannot realise a single SG spike"
            )
        unknown = set(self.low_level_overrides) - set(SIC_PARAMETERS) - set(COMPARTMENTS)
        if unknown:
            raise ValueError(f"Unknown astrocyte overrides: {sorted(unknown)}")
        for name in COMPARTMENTS:
            if name in self.low_level_overrides and not isinstance(self.low_level_overrides[name], dict):
                raise ValueError(f"Override for compartment {name!r} must be a mapping")

    @property
    def pins_sic_parameters(self) -> bool:
        return all(name in self.low_level_overrides for name in SIC_PARAMETERS)


DEFAULT_PROTOTYPE = AstrocytePrototype(
    low_level_overrides={"ip3_to_sic_weight": 320, "sic_current_decay": 1, "sg_threshold": 16}
)


class AstrocyteUnits(NamedTuple):
    sr: int
    ip3: int
    sic: int
    sg: int


@dataclass
class AstrocyteInstance:
    sr_config: CompartmentConfig
    ip3_config: CompartmentConfig
    sic_config: CompartmentConfig
    sg_config: CompartmentConfig
    ip3_sensitivity: int
    ip3_to_sic_weight: int
    prototype: AstrocytePrototype = DEFAULT_PROTOTYPE
    sr: CompartmentState = field(default_factory=CompartmentState)
    ip3: CompartmentState = field(default_factory=CompartmentState)
    sic: CompartmentState = field(default_factory=CompartmentState)
    sg: CompartmentState = field(default_factory=CompartmentState)
    input_synapses: list = field(default_factory=list)
    output_targets: list = field(default_factory=list)
    unit_ids: Optional[AstrocyteUnits] = None
    network: Any = field(default=None, compare=False, repr=False)
    last_spikes: tuple[bool, bool, bool] = (False, False, False)

    @property
    def sic_voltage(self) -> int:
        return self.sic.v


def default_sr_config() -> CompartmentConfig:
    return CompartmentConfig(current_decay=DECAY_ONE, voltage_decay=0, threshold=1)


def default_ip3_config() -> CompartmentConfig:
    return CompartmentConfig(
        current_decay=DECAY_ONE, voltage_decay=DEFAULT_IP3_VOLTAGE_DECAY, threshold=DEFAULT_IP3_THRESHOLD
    )


def resolve_instance(
    proto: AstrocytePrototype, table: Optional[SicConfigTable] = None
) -> AstrocyteInstance:
    """Build an unwired instance for ``proto``."""
    overrides = proto.low_level_overrides
    if proto.pins_sic_parameters:
        triple = {name: int(overrides[name]) for name in SIC_PARAMETERS}
    else:
        table = table if table is not None else default_sic_table()
        row = lookup_sic_config(table, proto.sic_amplitude, proto.sic_window)
        logger.debug(
            "SIC lookup (%.1f Hz, %.1f ms) -> %s measuring (%.1f Hz, %.1f ms)",
            proto.sic_amplitude,
            proto.sic_window,
            row.triple,
            row.measured_amplitude,
            row.measured_window,
        )
        triple = dict(zip(SIC_PARAMETERS, row.triple))
        triple.update({name: int(overrides[name]) for name in SIC_PARAMETERS if name in overrides})

    return AstrocyteInstance(
        sr_config=default_sr_config().with_overrides(overrides.get("sr")),
        ip3_config=default_ip3_config().with_overrides(overrides.get("ip3")),
        sic_config=sic_config(triple["sic_current_decay"]).with_overrides(overrides.get("sic")),
        sg_config=sg_config(triple["sg_threshold"]).with_overrides(overrides.get("sg")),
        ip3_sensitivity=proto.ip3_sensitivity,
        ip3_to_sic_weight=triple["ip3_to_sic_weight"],
        prototype=proto,
    )


def create_astrocyte(
    net=None, proto: Optional[AstrocytePrototype] = None, table: Optional[SicConfigTable] = None
) -> AstrocyteInstance:
    """Create an astrocyte and, when ``net`` is given, register its four units."""
    a = resolve_instance(proto or DEFAULT_PROTOTYPE, table)
    if net is not None:
        a = net.add_astrocyte(a)
    return a


def astrocyte_step(a: AstrocyteInstance, presyn_input: int) -> tuple[AstrocyteInstance, bool, bool]:
    sr, sr_spiked = step_compartment(a.sr, a.sr_config, presyn_input)
    ip3, ip3_spiked = step_compartment(a.ip3, a.ip3_config, a.ip3_sensitivity if sr_spiked else 0)
    sic, _ = step_compartment(a.sic, a.sic_config, a.ip3_to_sic_weight if ip3_spiked else 0)
    sg, sg_spiked = step_compartment(a.sg, a.sg_config, sic.v)
    stepped = replace(a, sr=sr, ip3=ip3, sic=sic, sg=sg, last_spikes=(sr_spiked, ip3_spiked, sg_spiked))
    return stepped, sg_spiked, ip3_spiked


@dataclass(frozen=True)
class AstrocyteGroup:
    prototypes: tuple[AstrocytePrototype, ...]
    size: int
    prototype_map: Optional[tuple[int, ...]] = None

    def __post_init__(self) -> None:
        if not self.prototypes:
            raise ValueError("AstrocyteGroup needs at least one prototype")
        if self.size <= 0:
            raise ValueError(f"AstrocyteGroup size must be positive, got {self.size}")
        mapping = self.prototype_map if self.prototype_map is not None else (0,) * self.size
        if len(mapping) != self.size:
            raise ValueError(f"prototype_map has {len(mapping)} entries for {self.size} astrocytes")
        bad = [i for i in mapping if not 0 <= i < len(self.prototypes)]
        if bad:
            raise ValueError(f"prototype_map entries out of range: {bad}")
        object.__setattr__(self, "prototypes", tuple(self.prototypes))
        object.__setattr__(self, "prototype_map", tuple(int(i) for i in mapping))

    def instantiate(self, net=None, table: Optional[SicConfigTable] = None) -> list[AstrocyteInstance]:
        resolved: dict[int, AstrocyteInstance] = {}
        instances = []
        for index in self.prototype_map:
            if index not in resolved:
                resolved[index] = resolve_instance(self.prototypes[index], table)
            template = resolved[index]
            instance = replace(template, input_synapses=[], output_targets=[])
            instances.append(net.add_astrocyte(instance) if net is not None else instance)
        return instances


@dataclass(frozen=True)
class ConnectionMask:
    """Neurons x astrocytes selection with a matching weight matrix."""

    mask: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        mask = np.asarray(self.mask, dtype=bool)
        weights = np.broadcast_to(np.asarray(self.weights, dtype=np.int64), mask.shape).copy()
        if mask.ndim != 2:
            raise WiringError(f"Connection mask must be 2-D, got shape {mask.shape}")
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "weights", weights)

    @property
    def shape(self) -> tuple[int, int]:
        return self.mask.shape

    @classmethod
    def full(cls, n_neurons: int, n_astrocytes: int = 1, weight: int = 1) -> "ConnectionMask":
        return cls(np.ones((n_neurons, n_astrocytes), dtype=bool), weight)

    @classmethod
    def from_groups(cls, n_neurons: int, groups: Sequence[Sequence[int]], weight: int = 1) -> "ConnectionMask":
        mask = np.zeros((n_neurons, len(groups)), dtype=bool)
        for column, members in enumerate(groups):
            mask[list(members), column] = True
        return cls(mask, weight)


def _astrocyte_list(a) -> list[AstrocyteInstance]:
    if isinstance(a, AstrocyteInstance):
        return [a]
    return list(a)


def _check_wired(a: AstrocyteInstance) -> None:
    if a.network is None or a.unit_ids is None:
        raise WiringError("Astrocyte is not attached to a network")


def _check_shape(mask: ConnectionMask, rows: int, columns: int) -> None:
    if mask.shape != (rows, columns):
        raise WiringError(f"Connection mask has shape {mask.shape}, expected {(rows, columns)}")


def connect_inputs(a, neurons: Sequence[int], mask: ConnectionMask, delay: int = 1) -> None:
    """Wire masked neuron -> SR synapses for one astrocyte or a list of them."""
    astros = _astrocyte_list(a)
    neurons = np.asarray(neurons, dtype=np.int64)
    _check_shape(mask, len(neurons), len(astros))
    for column, astro in enumerate(astros):
        _check_wired(astro)
        rows = np.flatnonzero(mask.mask[:, column])
        synapses = [
            Synapse(int(neurons[i]), astro.unit_ids.sr, int(mask.weights[i, column]), delay) for i in rows
        ]
        if synapses:
            astro.network.connect_synapses(synapses)
            astro.input_synapses.extend(synapses)


def connect_outputs(a, targets, mask: ConnectionMask, delay: int = 1) -> None:
    """Wire SG outputs.

    ``targets`` is either a sequence of neuron unit ids (SG -> neuron
    synapses with the masked weights) or a plastic projection, in which case
    mask rows index the projection's synapses and each astrocyte gets a
    reward channel tagging its masked synapses.
    """
    astros = _astrocyte_list(a)
    if hasattr(targets, "traces") and hasattr(targets, "trace_params"):
        _connect_reward(astros, targets, mask)
        return
    targets = np.asarray(targets, dtype=np.int64)
    _check_shape(mask, len(targets), len(astros))
    for column, astro in enumerate(astros):
        _check_wired(astro)
        rows = np.flatnonzero(mask.mask[:, column])
        synapses = [
            Synapse(astro.unit_ids.sg, int(targets[i]), int(mask.weights[i, column]), delay) for i in rows
        ]
        if synapses:
            astro.network.connect_synapses(synapses)
            astro.output_targets.extend(synapses)


def _connect_reward(astros: list[AstrocyteInstance], projection, mask: ConnectionMask) -> None:
    _check_shape(mask, len(projection), len(astros))
    params = projection.trace_params
    for column, astro in enumerate(astros):
        _check_wired(astro)
        tagged = tuple(int(i) for i in np.flatnonzero(mask.mask[:, column]))
        if not tagged:
            continue
        channel = RewardChannel(
            source=astro.unit_ids.sg,
            tagged=tagged,
            r1=Trace(impulse=params.r1_impulse, tau=params.tau, trace_max=params.trace_max),
        )
        astro.network.add_reward_channel(channel, projection)
        astro.output_targets.append(channel)

