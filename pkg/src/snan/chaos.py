"""Homeostatic chaos monitor: the astrocytic rate-deviation signal, its
weighted-sum realisation, BHP training and calcium-wave frequency."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np
from scipy.stats import spearmanr

from .astrocyte import AstrocyteInstance, AstrocytePrototype, astrocyte_step
from .plasticity import BhpParams, BhpState, bhp_step
from .streams import write_csv
from .substrate import DECAY_ONE

logger = logging.getLogger(__name__)

LEARNED_WEIGHTS_HEADER = ("input_id", "weight", "train_rate_hz")

ACTIVATIONS = ("identity", "rectifier")


@dataclass(frozen=True)
class ChaosMonitorConfig:
    n_inputs: int = 1764
    r_max: float = 200.0
    eta: Optional[float] = None
    g: str = "identity"
    bhp: BhpParams = field(default_factory=BhpParams)
    train_duration: float = 25.0
    test_duration: float = 25.0
    rate_window_ms: float = 100.0

    def __post_init__(self) -> None:
        if self.n_inputs < 1:
            raise ValueError(f"n_inputs must be at least 1, got {self.n_inputs}")
        if self.r_max <= 0:
            raise ValueError(f"r_max must be positive, got {self.r_max}")
        if self.g not in ACTIVATIONS:
            raise ValueError(f"Unknown activation {self.g!r}; expected one of {ACTIVATIONS}")
        if self.eta is not None and self.eta <= 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        if self.train_duration <= 0 or self.test_duration <= 0:
            raise ValueError("train_duration and test_duration must be positive")
        if self.rate_window_ms <= 0:
            raise ValueError(f"rate_window_ms must be positive, got {self.rate_window_ms}")

    @property
    def scale(self) -> float:
        return self.eta if self.eta is not None else 1.0 / self.n_inputs


@dataclass(frozen=True)
class RateEstimates:
    short_term: np.ndarray
    long_term: np.ndarray

    def __post_init__(self) -> None:
        short = np.asarray(self.short_term, dtype=float)
        long = np.asarray(self.long_term, dtype=float)
        if short.shape != long.shape:
            raise ValueError(f"Rate vectors differ in shape: {short.shape} vs {long.shape}")
        if (short < 0).any() or (long < 0).any():
            raise ValueError("Rates must be non-negative")
        object.__setattr__(self, "short_term", short)
        object.__setattr__(self, "long_term", long)


@dataclass(frozen=True)
class WaveFrequencyReport:
    events_per_second: float
    window: float
    phase: str = ""

    def to_dict(self) -> dict:
        return {"phase": self.phase, "events_per_second": self.events_per_second, "window_s": self.window}


def _activation(name: str, x: float) -> float:
    if name == "rectifier":
        return max(x, 0.0)
    return x


def _check_rates(rates: RateEstimates, cfg: ChaosMonitorConfig) -> None:
    if len(rates.short_term) != cfg.n_inputs:
        raise ValueError(f"Expected {cfg.n_inputs} rates, got {len(rates.short_term)}")
    if (rates.short_term > cfg.r_max).any() or (rates.long_term > cfg.r_max).any():
        raise ValueError(f"Rates must not exceed r_max={cfg.r_max}")
    if (rates.long_term <= 0).any():
        raise ValueError("Long-term rates must be positive; floor silent inputs first")


def f_astro_reference(rates: RateEstimates, cfg: ChaosMonitorConfig) -> float:
    _check_rates(rates, cfg)
    total = 0.0
    for r, r_hat in zip(rates.short_term, rates.long_term):
        total += (r / cfg.r_max) * np.log(cfg.r_max / r_hat)
    return _activation(cfg.g, cfg.scale * total)


def astro_weights(long_term: np.ndarray, r_max: float) -> np.ndarray:
    return np.log(r_max / np.asarray(long_term, dtype=float))


def f_astro_weighted_sum(rates: RateEstimates, cfg: ChaosMonitorConfig) -> float:
    _check_rates(rates, cfg)
    weights = astro_weights(rates.long_term, cfg.r_max)
    normalised = rates.short_term / cfg.r_max
    return _activation(cfg.g, cfg.scale * float(np.dot(weights, normalised)))


def long_term_floor(rates_hz: np.ndarray, window_s: float) -> tuple[np.ndarray, int]:
    """Raise silent long-term rates to one event per training window."""
    if window_s <= 0:
        raise ValueError(f"window_s must be positive, got {window_s}")
    floor = 1.0 / window_s
    rates = np.asarray(rates_hz, dtype=float)
    floored = rates < floor
    if floored.any():
        logger.warning("Flooring %d long-term rates at %.4f Hz", int(floored.sum()), floor)
    return np.maximum(rates, floor), int(floored.sum())


def quantize_weights(weights: np.ndarray) -> np.ndarray:
    """Round learned BHP weights down to integer synaptic weights."""
    return np.floor(np.asarray(weights, dtype=float)).astype(np.int64)


def run_activity(
    astro: AstrocyteInstance, weights: np.ndarray, input_currents: np.ndarray
) -> tuple[AstrocyteInstance, bool, bool]:
    """Step ``astro`` with SR input ``sum(w_i * I_i)``.

    Weights must already be integers; see :func:`quantize_weights`.
    """
    weights = np.asarray(weights)
    if not np.issubdtype(weights.dtype, np.integer):
        raise TypeError(f"SR weights must be integers, got dtype {weights.dtype}; quantize them first")
    presyn = int(np.dot(weights.astype(np.int64), np.asarray(input_currents, dtype=np.int64)))
    return astrocyte_step(astro, presyn)


def sr_current_decay(rate_window_ms: float, dt_ms: float = 1.0) -> int:
    """12-bit SR current decay whose time constant is ``rate_window_ms``."""
    if rate_window_ms <= 0:
        raise ValueError(f"rate_window_ms must be positive, got {rate_window_ms}")
    return int(round(DECAY_ONE * (1.0 - math.exp(-dt_ms / rate_window_ms))))


def with_rate_window(proto: AstrocytePrototype, rate_window_ms: float, dt_ms: float = 1.0) -> AstrocytePrototype:
    """Set the SR current decay from the rate window unless an override pins it."""
    overrides = dict(proto.low_level_overrides)
    sr = dict(overrides.get("sr") or {})
    derived = sr_current_decay(rate_window_ms, dt_ms)
    if "current_decay" in sr:
        if sr["current_decay"] != derived:
            logger.warning(
                "SR current_decay pinned at %s; rate_window_ms=%.1f would give %d",
                sr["current_decay"],
                rate_window_ms,
                derived,
            )
        return proto
    sr["current_decay"] = derived
    overrides["sr"] = sr
    return replace(proto, low_level_overrides=overrides)


def boxcar_rates(frames: Sequence[np.ndarray], tick_steps: int, rate_window_ms: float, dt_ms: float = 1.0) -> np.ndarray:
    """Per-input rates in Hz over consecutive windows of ``rate_window_ms``.

    Returns one row per complete window; a trailing partial window is dropped.
    """
    ticks_per_window = max(1, int(round(rate_window_ms / (tick_steps * dt_ms))))
    n_windows = len(frames) // ticks_per_window
    if n_windows == 0:
        raise ValueError(f"{len(frames)} ticks do not fill one {rate_window_ms} ms rate window")
    counts = np.asarray(frames[: n_windows * ticks_per_window], dtype=np.int64)
    counts = counts.reshape(n_windows, ticks_per_window, -1).sum(axis=1)
    return counts * 1000.0 / (ticks_per_window * tick_steps * dt_ms)


@dataclass(frozen=True)
class BhpTraining:
    state: BhpState
    rates_hz: np.ndarray
    n_steps: int

    @property
    def weights(self) -> np.ndarray:
        return self.state.w


def train_bhp(
    drive: Iterable[np.ndarray],
    n_inputs: int,
    params: BhpParams,
    w0: float = 0.0,
    dt_ms: float = 1.0,
) -> BhpTraining:
    """Evolve one BHP state per input over the per-step spike vectors in ``drive``."""
    state = BhpState.zeros(n_inputs, w0)
    counts = np.zeros(n_inputs, dtype=np.int64)
    n_steps = 0
    for x0 in drive:
        x0 = np.asarray(x0, dtype=np.int64)
        state = bhp_step(state, x0, params)
        counts += x0
        n_steps += 1
    if n_steps == 0:
        raise ValueError("BHP training needs at least one drive step")
    logger.debug("BHP trained over %d steps, %d gated updates", n_steps, n_steps // params.period)
    return BhpTraining(state=state, rates_hz=counts * 1000.0 / (n_steps * dt_ms), n_steps=n_steps)


def per_step(frames: Iterable[np.ndarray], tick_steps: int, n_inputs: int) -> Iterator[np.ndarray]:
    """Expand one spike frame per tick into one vector per step."""
    silent = np.zeros(n_inputs, dtype=bool)
    for frame in frames:
        yield frame
        for _ in range(tick_steps - 1):
            yield silent


def measure_wave_frequency(event_steps: Sequence[int], window: float, phase: str = "") -> WaveFrequencyReport:
    """IP3 events per second over ``window`` seconds."""
    if window <= 0:
        raise ValueError(f"window must be positive, got {window}")
    return WaveFrequencyReport(events_per_second=len(event_steps) / window, window=float(window), phase=phase)


def weight_rate_spearman(weights: np.ndarray, rates: np.ndarray) -> float:
    weights = np.asarray(weights, dtype=float)
    rates = np.asarray(rates, dtype=float)
    if np.ptp(weights) == 0 or np.ptp(rates) == 0:
        return float("nan")
    rho, _ = spearmanr(weights, rates)
    return float(rho)


def write_learned_weights_csv(path: str, weights: np.ndarray, rates_hz: np.ndarray) -> str:
    rows = ((i, repr(float(w)), repr(float(r))) for i, (w, r) in enumerate(zip(weights, rates_hz)))
    return write_csv(path, LEARNED_WEIGHTS_HEADER, rows)
