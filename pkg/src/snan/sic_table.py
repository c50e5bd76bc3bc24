"""Brute-force compilation of SIC parameters.

Each row records what one ``(ip3_to_sic_weight, sic_current_decay,
sg_threshold)`` triple does to an isolated SIC + SG pair after a single IP3
spike: the peak instantaneous SG rate and the first-to-last SG spike span.
"""
from __future__ import annotations

import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import EmptyTableError
from .settings import settings_from_env
from .substrate import DECAY_ONE, CompartmentConfig, CompartmentState, step_compartment
from .streams import iter_csv_dicts, write_csv

logger = logging.getLogger(__name__)

CSV_HEADER = (
    "ip3_to_sic_weight",
    "sic_current_decay",
    "sg_threshold",
    "measured_amplitude_hz",
    "measured_window_ms",
)

DEFAULT_WEIGHTS = tuple(2**i for i in range(0, 11))
DEFAULT_DECAYS = tuple(range(64, DECAY_ONE + 1, 64))
DEFAULT_THRESHOLDS = tuple(2**i for i in range(4, 11))

MAX_RESPONSE_STEPS = 100_000


def sic_config(sic_current_decay: int) -> CompartmentConfig:
    return CompartmentConfig(
        current_decay=sic_current_decay, voltage_decay=DECAY_ONE, threshold=1, spiking=False
    )


def sg_config(sg_threshold: int) -> CompartmentConfig:
    # integrates (SIC voltage - threshold) above a zero floor
    return CompartmentConfig(
        current_decay=DECAY_ONE,
        voltage_decay=0,
        threshold=sg_threshold,
        bias=-sg_threshold,
        v_min=0,
    )


@dataclass(frozen=True)
class SicConfigRow:
    ip3_to_sic_weight: int
    sic_current_decay: int
    sg_threshold: int
    measured_amplitude: float
    measured_window: float

    @property
    def triple(self) -> tuple[int, int, int]:
        return (self.ip3_to_sic_weight, self.sic_current_decay, self.sg_threshold)


@dataclass(frozen=True)
class SicConfigTable:
    rows: tuple[SicConfigRow, ...] = ()

    def __post_init__(self) -> None:
        triples = [row.triple for row in self.rows]
        if len(set(triples)) != len(triples):
            raise ValueError("SIC configuration table contains duplicate parameter triples")

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)


def measure_sic_response(
    ip3_to_sic_weight: int,
    sic_current_decay: int,
    sg_threshold: int,
    dt_ms: float = 1.0,
) -> Optional[tuple[float, float]]:
    """Simulate one IP3 spike into SIC + SG; ``None`` when SG stays silent."""
    if sic_current_decay <= 0:
        raise ValueError("SIC current decay must be positive; a non-decaying SIC never releases SG")
    sic_cfg = sic_config(sic_current_decay)
    sg_cfg = sg_config(sg_threshold)
    sic = CompartmentState()
    sg = CompartmentState()
    spike_steps: list[int] = []
    for step in range(MAX_RESPONSE_STEPS):
        sic, _ = step_compartment(sic, sic_cfg, ip3_to_sic_weight if step == 0 else 0)
        sg, spiked = step_compartment(sg, sg_cfg, sic.v)
        if spiked:
            spike_steps.append(step)
        # SG needs the envelope strictly above threshold and SIC only decays
        if sic.v <= sg_threshold:
            break
    else:
        logger.warning(
            "SIC response (%d, %d, %d) still above threshold after %d steps; window clipped",
            ip3_to_sic_weight,
            sic_current_decay,
            sg_threshold,
            MAX_RESPONSE_STEPS,
        )
    return response_metrics(spike_steps, dt_ms)


def response_metrics(spike_steps: Sequence[int], dt_ms: float = 1.0) -> Optional[tuple[float, float]]:
    if not spike_steps:
        return None
    if len(spike_steps) == 1:
        return 1000.0 / dt_ms, 0.0
    shortest = min(b - a for a, b in zip(spike_steps, spike_steps[1:]))
    return 1000.0 / (shortest * dt_ms), float((spike_steps[-1] - spike_steps[0]) * dt_ms)


def _measure_row(args: tuple[int, int, int, float]) -> Optional[SicConfigRow]:
    weight, decay, threshold, dt_ms = args
    measured = measure_sic_response(weight, decay, threshold, dt_ms)
    if measured is None:
        return None
    return SicConfigRow(weight, decay, threshold, measured[0], measured[1])


def _sort_key(row: SicConfigRow):
    return (row.measured_amplitude, row.measured_window, row.triple)


def build_sic_table(
    weight_range: Iterable[int] = DEFAULT_WEIGHTS,
    decay_range: Iterable[int] = DEFAULT_DECAYS,
    threshold_range: Iterable[int] = DEFAULT_THRESHOLDS,
    dt_ms: float = 1.0,
    workers: Optional[int] = None,
) -> SicConfigTable:
    weights = sorted(set(int(w) for w in weight_range))
    decays = sorted(set(int(d) for d in decay_range))
    thresholds = sorted(set(int(t) for t in threshold_range))
    if not weights or not decays or not thresholds:
        raise ValueError("SIC table ranges must be non-empty")
    if any(w <= 0 for w in weights) or any(t <= 0 for t in thresholds):
        raise ValueError("SIC weights and SG thresholds must be positive")
    if any(not 1 <= d <= DECAY_ONE for d in decays):
        raise ValueError(f"SIC current decays must lie in [1, {DECAY_ONE}]")

    jobs = [(w, d, t, dt_ms) for w, d, t in itertools.product(weights, decays, thresholds)]
    workers = workers or settings_from_env().threads
    logger.debug("Building SIC table: %d configurations, %d worker(s)", len(jobs), workers)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            measured = list(pool.map(_measure_row, jobs, chunksize=max(1, len(jobs) // (workers * 4))))
    else:
        measured = [_measure_row(job) for job in jobs]

    rows = sorted((row for row in measured if row is not None), key=_sort_key)
    if not rows:
        logger.warning("No SIC configuration in the requested ranges produced an SG spike")
    return SicConfigTable(rows=tuple(rows))


@lru_cache(maxsize=1)
def default_sic_table() -> SicConfigTable:
    return build_sic_table()


def lookup_sic_config(table: SicConfigTable, target_amplitude: float, target_window: float) -> SicConfigRow:
    if len(table) == 0:
        raise EmptyTableError("Cannot look up a SIC configuration in an empty table")
    amplitude = np.array([row.measured_amplitude for row in table.rows])
    window = np.array([row.measured_window for row in table.rows])
    d_amp = target_amplitude - amplitude
    d_win = target_window - window
    cost = d_amp * d_amp + d_win * d_win
    best = np.flatnonzero(cost == cost.min())
    return min((table.rows[i] for i in best), key=lambda row: row.triple)


def save_sic_table(table: SicConfigTable, path: str) -> str:
    rows = (
        [
            row.ip3_to_sic_weight,
            row.sic_current_decay,
            row.sg_threshold,
            repr(row.measured_amplitude),
            repr(row.measured_window),
        ]
        for row in table.rows
    )
    return write_csv(path, CSV_HEADER, rows)


def load_sic_table(path: str) -> SicConfigTable:
    rows = [
        SicConfigRow(
            ip3_to_sic_weight=int(record["ip3_to_sic_weight"]),
            sic_current_decay=int(record["sic_current_decay"]),
            sg_threshold=int(record["sg_threshold"]),
            measured_amplitude=float(record["measured_amplitude_hz"]),
            measured_window=float(record["measured_window_ms"]),
        )
        for record in iter_csv_dicts(path, CSV_HEADER)
    ]
    return SicConfigTable(rows=tuple(sorted(rows, key=_sort_key)))
