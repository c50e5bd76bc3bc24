"""End-to-end experiments built from an :class:`ExperimentConfig`.

Each runner returns a :class:`SummaryReport` whose JSON form is canonical and
whose ``streams`` carry the raw spike events, weight snapshots and plot data
that :func:`snan.outputs.emit_outputs` writes to disk.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from importlib import metadata
from typing import Callable, Dict, Optional, Sequence

import numpy as np

from .astrocyte import (
    AstrocyteGroup,
    AstrocyteUnits,
    ConnectionMask,
    connect_inputs,
    connect_outputs,
    create_astrocyte,
)
from .chaos import (
    ChaosMonitorConfig,
    RateEstimates,
    boxcar_rates,
    f_astro_reference,
    long_term_floor,
    measure_wave_frequency,
    per_step,
    quantize_weights,
    run_activity,
    train_bhp,
    weight_rate_spearman,
    with_rate_window,
)
from .config import ExperimentConfig
from .errors import ConfigError
from .ising import IsingDriveThread, classify_states, init_lattice, mcmc_sweep, read_drive_csv
from .network import Network
from .plasticity import CombinedRule, StdpRule
from .sic_table import SicConfigTable, build_sic_table
from .substrate import SpikeEvent

logger = logging.getLogger(__name__)

# spawn-key prefix for experiment-level streams, disjoint from Network's children
_EXPERIMENT_STREAM = 0xA57A


@dataclass
class RawStreams:
    events: list = field(default_factory=list)
    weight_snapshots: list = field(default_factory=list)
    bars: dict = field(default_factory=dict)
    bar_label: str = ""
    learned_weights: Optional[tuple[np.ndarray, np.ndarray]] = None
    drive_frames: Optional[list] = None


@dataclass
class SummaryReport:
    experiment: str
    metrics: dict
    provenance: dict
    streams: RawStreams = field(default_factory=RawStreams, compare=False, repr=False)

    def to_dict(self) -> dict:
        return {"experiment": self.experiment, "metrics": self.metrics, "provenance": self.provenance}

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.to_dict()), sort_keys=True, indent=2) + "\n"


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if not math.isfinite(value):
            return None
        return round(value, 9)
    return value


def _version(package: str) -> str:
    try:
        return metadata.version(package)
    except metadata.PackageNotFoundError:
        return "unknown"


def provenance(cfg: ExperimentConfig) -> dict:
    return {
        "config_sha256": cfg.sha256(),
        "seed": cfg.seed,
        "versions": {"snan-emulator": _version("snan-emulator"), "numpy": np.__version__},
    }


def experiment_rng(seed: int, purpose: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(_EXPERIMENT_STREAM, purpose)))


def sic_table_for(cfg: ExperimentConfig) -> Optional[SicConfigTable]:
    ranges = cfg.astrocyte.sic_table
    if ranges is None:
        return None
    return build_sic_table(ranges.weights, ranges.decays, ranges.thresholds, dt_ms=cfg.dt_ms)


def unit_steps(events: Sequence[SpikeEvent], unit_id: int) -> list[int]:
    return [e.step for e in events if e.unit_id == unit_id]


def burst_windows(ip3_steps: Sequence[int], sg_steps: Sequence[int]) -> list[tuple[int, int]]:
    """First/last SG step of the burst following each IP3 event."""
    windows = []
    bounds = list(ip3_steps) + [math.inf]
    for start, stop in zip(bounds, bounds[1:]):
        burst = [s for s in sg_steps if start <= s < stop]
        if burst:
            windows.append((burst[0], burst[-1]))
    return windows


def random_connections(rng: np.random.Generator, n_pre: int, n_post: int, p: float) -> tuple[np.ndarray, np.ndarray]:
    pre, post = np.nonzero(rng.random((n_pre, n_post)) < p)
    return pre, post


def active_fraction(events: Sequence[SpikeEvent], neuron_ids: Sequence[int], start: int, stop: int) -> float:
    ids = set(int(i) for i in neuron_ids)
    fired = {e.unit_id for e in events if e.unit_id in ids and start <= e.step <= stop}
    return len(fired) / len(ids) if ids else 0.0


def run_sync(cfg: ExperimentConfig) -> SummaryReport:
    s = cfg.sync
    if s is None:
        raise ConfigError("sync experiment needs a network section")
    n_steps = cfg.steps(cfg.duration_s)
    net = Network(cfg.dt_ms, cfg.seed, cfg.snapshot_every)
    sources = net.add_poisson(s.source_rate_hz, n=s.n_sources)
    post = net.add_neurons(s.n_post, s.neuron)
    pre_idx, post_idx = random_connections(experiment_rng(cfg.seed, 0), s.n_sources, s.n_post, s.connection_probability)
    net.connect(sources[pre_idx], post[post_idx], s.weight, name="sources->post")

    astro = create_astrocyte(net, cfg.astrocyte.prototypes[0], sic_table_for(cfg))
    connect_inputs(astro, sources, ConnectionMask.full(s.n_sources, 1, cfg.astrocyte.input_weight))
    if not cfg.ablate_astrocyte:
        connect_outputs(astro, post, ConnectionMask.full(s.n_post, 1, cfg.astrocyte.output_weight))

    logger.debug("sync: %d steps", n_steps)
    events = net.run(n_steps)
    ip3 = unit_steps(events, astro.unit_ids.ip3)
    sg = unit_steps(events, astro.unit_ids.sg)
    windows = burst_windows(ip3, sg)

    metrics: dict = {
        "ablate_astrocyte": cfg.ablate_astrocyte,
        "ip3_times_s": [t * cfg.dt_ms / 1000.0 for t in ip3],
        "first_ip3_time_s": ip3[0] * cfg.dt_ms / 1000.0 if ip3 else None,
        "burst_window_ms": None,
        "burst_fraction": None,
        "baseline_fraction": None,
        "synchrony_index": None,
    }
    if ip3 and windows:
        first, last = windows[0]
        length = last - first + 1
        burst = active_fraction(events, post, first, last + 1)
        rng = experiment_rng(cfg.seed, 1)
        latest_start = max(ip3[0] - length - 1, 0)
        base_start = int(rng.integers(0, latest_start + 1))
        baseline = active_fraction(events, post, base_start, base_start + length)
        metrics.update(
            burst_window_ms=(last - first) * cfg.dt_ms,
            burst_fraction=burst,
            baseline_fraction=baseline,
            synchrony_index=burst / max(baseline, 1.0 / s.n_post),
        )
        logger.info("sync: IP3 at %.3f s, burst %.0f ms", metrics["first_ip3_time_s"], metrics["burst_window_ms"])

    post_ids = set(post.tolist())
    counts = np.bincount([e.unit_id - int(post[0]) for e in events if e.unit_id in post_ids], minlength=s.n_post)
    streams = RawStreams(
        events=events,
        weight_snapshots=net.weight_snapshots,
        bars={f"post {i}": int(c) for i, c in enumerate(counts)},
        bar_label="spikes",
    )
    return SummaryReport("sync", metrics, provenance(cfg), streams)


def binned_counts(events: Sequence[SpikeEvent], neuron_ids: Sequence[int], n_steps: int, bin_steps: int) -> np.ndarray:
    index = {int(unit): row for row, unit in enumerate(neuron_ids)}
    n_bins = max(1, -(-n_steps // bin_steps))
    counts = np.zeros((len(index), n_bins))
    for e in events:
        row = index.get(e.unit_id)
        if row is not None:
            counts[row, min(e.step // bin_steps, n_bins - 1)] += 1
    return counts


def cosine_matrix(counts: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(counts, axis=1)
    safe = np.where(norms > 0, norms, 1.0)
    unit = counts / safe[:, None]
    return unit @ unit.T


def burst_coincidence(counts: np.ndarray, groups: Sequence[Sequence[int]]) -> list[dict]:
    """Mean pairwise cosine overlap within each group and against the other groups."""
    sim = cosine_matrix(counts)
    scores = []
    for g, members in enumerate(groups):
        members = list(members)
        others = [i for h, group in enumerate(groups) if h != g for i in group if i not in members]
        within = [sim[i, j] for a, i in enumerate(members) for j in members[a + 1 :]]
        across = [sim[i, j] for i in members for j in others]
        scores.append(
            {
                "members": members,
                "within": float(np.mean(within)) if within else None,
                "across": float(np.mean(across)) if across else None,
            }
        )
    return scores


def run_group_sync(cfg: ExperimentConfig) -> SummaryReport:
    s = cfg.group_sync
    if s is None:
        raise ConfigError("group-sync experiment needs a network section")
    n_steps = cfg.steps(cfg.duration_s)
    net = Network(cfg.dt_ms, cfg.seed, cfg.snapshot_every)
    inputs = net.add_poisson(s.input_rate_hz, n=s.n_inputs)
    outputs = net.add_neurons(s.n_outputs, s.neuron)
    pre_idx, post_idx = random_connections(experiment_rng(cfg.seed, 0), s.n_inputs, s.n_outputs, s.connection_probability)
    net.connect(inputs[pre_idx], outputs[post_idx], s.weight, name="inputs->outputs")

    n_astro = len(s.input_groups)
    prototype_map = cfg.astrocyte.prototype_map or tuple(min(i, len(cfg.astrocyte.prototypes) - 1) for i in range(n_astro))
    group = AstrocyteGroup(cfg.astrocyte.prototypes, n_astro, prototype_map)
    astros = group.instantiate(net, sic_table_for(cfg))
    connect_inputs(astros, inputs, ConnectionMask.from_groups(s.n_inputs, s.input_groups, cfg.astrocyte.input_weight))
    if not cfg.ablate_astrocyte:
        connect_outputs(
            astros, outputs, ConnectionMask.from_groups(s.n_outputs, s.output_groups, cfg.astrocyte.output_weight)
        )

    events = net.run(n_steps)
    bin_steps = max(1, int(round(s.bin_ms / cfg.dt_ms)))
    counts = binned_counts(events, outputs, n_steps, bin_steps)
    astro_metrics = []
    for a in astros:
        ip3 = unit_steps(events, a.unit_ids.ip3)
        windows = burst_windows(ip3, unit_steps(events, a.unit_ids.sg))
        astro_metrics.append(
            {
                "ip3_times_s": [t * cfg.dt_ms / 1000.0 for t in ip3],
                "burst_windows_s": [[b0 * cfg.dt_ms / 1000.0, b1 * cfg.dt_ms / 1000.0] for b0, b1 in windows],
            }
        )
    groups = burst_coincidence(counts, s.score_groups)
    separated = all(
        g["within"] is not None and g["across"] is not None and g["within"] > g["across"] for g in groups
    )
    metrics = {
        "ablate_astrocyte": cfg.ablate_astrocyte,
        "astrocytes": astro_metrics,
        "groups": groups,
        "within_exceeds_across": separated,
    }
    streams = RawStreams(
        events=events,
        weight_snapshots=net.weight_snapshots,
        bars={f"output {i}": int(c) for i, c in enumerate(counts.sum(axis=1))},
        bar_label="spikes",
    )
    return SummaryReport("group-sync", metrics, provenance(cfg), streams)


@dataclass
class MemoryRun:
    weights: np.ndarray
    retrieval_counts: list
    events: list
    snapshots: list
    ip3_steps: list


def _run_memory_once(cfg: ExperimentConfig, rule, reward: bool, table: Optional[SicConfigTable]) -> MemoryRun:
    m = cfg.memory
    p = cfg.plasticity
    patterns = m.patterns
    net = Network(cfg.dt_ms, cfg.seed, cfg.snapshot_every)
    sensory = net.add_poisson(patterns.rates(m.learned_pattern))
    memory = net.add_neurons(1, m.neuron)
    projection = net.connect(
        sensory,
        np.repeat(memory, len(sensory)),
        m.initial_weight,
        rule=rule,
        trace_params=p.traces,
        w_min=p.w_min,
        w_max=p.w_max,
        name="sensory->memory",
    )
    astro = create_astrocyte(net, cfg.astrocyte.prototypes[0], table)
    connect_inputs(astro, sensory, ConnectionMask.full(len(sensory), 1, cfg.astrocyte.input_weight))
    if reward:
        connect_outputs(astro, projection, ConnectionMask.full(len(projection), 1, 1))

    trajectory = [projection.weights.copy()]
    events: list = []
    for _ in range(cfg.steps(m.train_s)):
        events.extend(net.step())
        trajectory.append(projection.weights.copy())

    net.plasticity_enabled = False
    counts = []
    retrieval_steps = cfg.steps(m.retrieval_s)
    for index in range(len(patterns.patterns)):
        net.set_rates(sensory, patterns.rates(index))
        window = net.run(retrieval_steps)
        events.extend(window)
        counts.append(sum(1 for e in window if e.unit_id == int(memory[0])))
    return MemoryRun(
        weights=np.array(trajectory),
        retrieval_counts=counts,
        events=events,
        snapshots=net.weight_snapshots,
        ip3_steps=unit_steps(events, astro.unit_ids.ip3),
    )


def run_memory(cfg: ExperimentConfig) -> SummaryReport:
    m = cfg.memory
    p = cfg.plasticity
    if m is None or p is None:
        raise ConfigError("memory experiment needs memory and plasticity sections")
    table = sic_table_for(cfg)
    combined = CombinedRule(stdp=p.stdp, hsd=p.hsd)
    ablated = _run_memory_once(cfg, combined, reward=False, table=table)
    reference = _run_memory_once(cfg, StdpRule(params=p.stdp), reward=False, table=table)
    main = ablated if cfg.ablate_astrocyte else _run_memory_once(cfg, combined, reward=True, table=table)

    learned = m.learned_pattern
    active = set(m.patterns.patterns[learned])
    final = main.weights[-1]
    off_pattern = [int(w) for i, w in enumerate(final) if i not in active]
    others = [c for i, c in enumerate(main.retrieval_counts) if i != learned]
    metrics = {
        "ablate_astrocyte": cfg.ablate_astrocyte,
        "learned_pattern": learned,
        "patterns": m.patterns.grids(),
        "retrieval_counts": main.retrieval_counts,
        "learned_is_max": all(main.retrieval_counts[learned] > c for c in others),
        "final_weights": [int(w) for w in final],
        "off_pattern_negative": all(w < 0 for w in off_pattern),
        "ip3_times_s": [t * cfg.dt_ms / 1000.0 for t in main.ip3_steps],
        "ablated": {
            "retrieval_counts": ablated.retrieval_counts,
            "final_weights": [int(w) for w in ablated.weights[-1]],
            "min_weight": int(ablated.weights.min()),
            "no_negative": bool(ablated.weights.min() >= 0),
            "matches_stdp": bool(np.array_equal(ablated.weights, reference.weights)),
        },
    }
    logger.info("memory: retrieval counts %s", main.retrieval_counts)
    streams = RawStreams(
        events=main.events,
        weight_snapshots=main.snapshots,
        bars={f"pattern {i + 1}": int(c) for i, c in enumerate(main.retrieval_counts)},
        bar_label="memory neuron spikes",
    )
    return SummaryReport("memory", metrics, provenance(cfg), streams)


def _chaos_frames(cfg: ExperimentConfig, replay: Optional[str]):
    """Tick frames for the training, ordered-test and chaotic-test phases."""
    ising = cfg.ising
    mon = cfg.monitor
    tick = ising.tick_steps
    n_train = cfg.steps(mon.train_s) // tick
    n_test = cfg.steps(mon.test_s) // tick
    if replay is not None:
        recorded = read_drive_csv(replay, mon.n_inputs, tick)
        silent = np.zeros(mon.n_inputs, dtype=bool)
        ticks = [recorded.get(k * tick, silent) for k in range(n_train + 2 * n_test)]
        return (ticks[:n_train], ticks[n_train : n_train + n_test], ticks[n_train + n_test :]), None, None

    t_ordered, t_chaotic = classify_states(ising.coupling, ising.t_grid, cfg.seed, ising.burn_in, ising.n_samples)
    lat = init_lattice(ising.coupling, t_ordered, cfg.seed)
    for _ in range(ising.burn_in):
        lat = mcmc_sweep(lat)

    phases = []
    for n_ticks, temperature in ((n_train + n_test, t_ordered), (n_test, t_chaotic)):
        lat = lat.with_temperature(temperature)
        if temperature != t_ordered:
            for _ in range(ising.phase_burn_in):
                lat = mcmc_sweep(lat)
        worker = IsingDriveThread(lat, n_ticks, ising.sweeps_per_tick)
        phases.append(list(worker.frames()))
        worker.join()
        lat = worker.final_lattice or lat
    ordered, chaotic = phases
    return (ordered[:n_train], ordered[n_train:], chaotic), t_ordered, t_chaotic


def run_chaos(cfg: ExperimentConfig, replay: Optional[str] = None) -> SummaryReport:
    ising = cfg.ising
    mon = cfg.monitor
    if ising is None or mon is None:
        raise ConfigError("chaos experiment needs ising and monitor sections")
    monitor = ChaosMonitorConfig(
        n_inputs=mon.n_inputs,
        r_max=mon.r_max,
        eta=mon.eta,
        g=mon.g,
        bhp=mon.bhp,
        train_duration=mon.train_s,
        test_duration=mon.test_s,
        rate_window_ms=mon.rate_window_ms,
    )
    tick = ising.tick_steps
    (train_frames, ordered_frames, chaotic_frames), t_ordered, t_chaotic = _chaos_frames(cfg, replay)

    training = train_bhp(per_step(train_frames, tick, mon.n_inputs), mon.n_inputs, mon.bhp, mon.w0, cfg.dt_ms)
    n_train_steps = training.n_steps
    weights = quantize_weights(training.weights)
    sr_weights = np.zeros_like(weights) if cfg.ablate_astrocyte else weights

    proto = with_rate_window(cfg.astrocyte.prototypes[0], mon.rate_window_ms, cfg.dt_ms)
    astro = create_astrocyte(None, proto, sic_table_for(cfg))
    # same unit ids a network with the inputs registered first would assign
    units = AstrocyteUnits(*(mon.n_inputs + k for k in range(4)))
    spiking_units = (units.sr, units.ip3, units.sg)

    events: list = []
    phase_reports = []
    active_means = {}
    boxcars = {}
    silent = np.zeros(mon.n_inputs, dtype=bool)
    # SR input lags the input spikes by one step
    previous = silent
    step = n_train_steps
    for phase, frames in (("ordered", ordered_frames), ("chaotic", chaotic_frames)):
        ip3_steps = []
        for frame in frames:
            for current in (frame,) + (silent,) * (tick - 1):
                astro, _, ip3_spiked = run_activity(astro, sr_weights, previous)
                for unit, spiked in zip(spiking_units, astro.last_spikes):
                    if spiked:
                        events.append(SpikeEvent(step, unit))
                if ip3_spiked:
                    ip3_steps.append(step)
                previous = current
                step += 1
        window_s = len(frames) * tick * cfg.dt_ms / 1000.0
        report = measure_wave_frequency(ip3_steps, window_s, phase)
        phase_reports.append(report)
        active_means[phase] = float(np.mean([frame.sum() for frame in frames])) if frames else 0.0
        boxcars[phase] = boxcar_rates(frames, tick, mon.rate_window_ms, cfg.dt_ms)
        logger.info("chaos: %s phase %.3f IP3 events/s", phase, report.events_per_second)

    long_term, n_floored = long_term_floor(training.rates_hz, mon.train_s)
    long_term = np.minimum(long_term, mon.r_max)
    f_astro = {
        phase: float(
            np.mean([f_astro_reference(RateEstimates(np.minimum(r, mon.r_max), long_term), monitor) for r in rates])
        )
        for phase, rates in boxcars.items()
    }
    ordered_rate = phase_reports[0].events_per_second
    chaotic_rate = phase_reports[1].events_per_second
    ordered_active = active_means["ordered"]
    metrics = {
        "ablate_astrocyte": cfg.ablate_astrocyte,
        "t_ordered": t_ordered,
        "t_chaotic": t_chaotic,
        "replayed": replay is not None,
        "wave_frequency": [r.to_dict() for r in phase_reports],
        "frequency_ratio": chaotic_rate / ordered_rate if ordered_rate > 0 else None,
        "mean_active": active_means,
        "activity_difference": abs(active_means["chaotic"] - ordered_active) / ordered_active if ordered_active else None,
        "weight_rate_spearman": weight_rate_spearman(training.weights, training.rates_hz),
        "f_astro": f_astro,
        "long_term_floored": n_floored,
    }
    drive = None
    if mon.record_drive:
        ticks = list(train_frames) + list(ordered_frames) + list(chaotic_frames)
        drive = [(k * tick, frame) for k, frame in enumerate(ticks)]
    streams = RawStreams(
        events=events,
        weight_snapshots=[(n_train_steps, int(i), units.sr, int(w)) for i, w in enumerate(weights)],
        bars={r.phase: r.events_per_second for r in phase_reports},
        bar_label="IP3 events / s",
        learned_weights=(training.weights, training.rates_hz),
        drive_frames=drive,
    )
    return SummaryReport("chaos", metrics, provenance(cfg), streams)


ExperimentRunner = Callable[[ExperimentConfig], SummaryReport]

_EXPERIMENTS: Dict[str, ExperimentRunner] = {}


def register_experiment(name: str, runner: ExperimentRunner) -> None:
    _EXPERIMENTS[name] = runner


def get_experiment(name: str) -> ExperimentRunner:
    try:
        return _EXPERIMENTS[name]
    except KeyError as exc:
        raise ConfigError(f"Unknown experiment {name!r}; expected one of {sorted(_EXPERIMENTS)}") from exc


def run_experiment(cfg: ExperimentConfig, replay: Optional[str] = None) -> SummaryReport:
    if replay is not None:
        if cfg.experiment != "chaos":
            raise ConfigError("--replay is only supported by the chaos experiment")
        return run_chaos(cfg, replay=replay)
    return get_experiment(cfg.experiment)(cfg)


register_experiment("sync", run_sync)
register_experiment("group-sync", run_group_sync)
register_experiment("memory", run_memory)
register_experiment("chaos", run_chaos)
