"""Clustered 2-D Ising lattice used as a neuronal drive.

Couplings live on the right and down edge of every site with periodic
boundaries. Metropolis sweeps visit sites in raster order inside a numba
kernel fed with uniforms drawn up front from the lattice's generator, so a
trajectory depends only on (couplings, seed, temperature).
"""
from __future__ import annotations

import logging
import os
import queue
import threading
from dataclasses import dataclass, replace
from typing import Iterator, Optional, Sequence

import numpy as np
from numba import njit

from .errors import ClassificationError
from .network import SPIKES_HEADER
from .streams import iter_csv_dicts, write_csv

logger = logging.getLogger(__name__)

SHEET_SIZE = 42
TICK_STEPS = 5


@dataclass(frozen=True)
class CouplingSpec:
    size: int = 256
    cluster_grid: tuple[int, int] = (16, 16)
    intra_strength_range: tuple[float, float] = (1.5, 2.5)
    inter_strength: float = 0.01
    seed: int = 0

    def __post_init__(self) -> None:
        rows, cols = self.cluster_grid
        if self.size < 2:
            raise ValueError(f"Lattice size must be at least 2, got {self.size}")
        if not (1 <= rows <= self.size and 1 <= cols <= self.size):
            raise ValueError(f"Cluster grid {self.cluster_grid} does not partition a {self.size}x{self.size} lattice")
        lo, hi = self.intra_strength_range
        if lo > hi:
            raise ValueError(f"intra_strength_range must satisfy lo <= hi, got {self.intra_strength_range}")
        if self.inter_strength < 0:
            raise ValueError(f"inter_strength must be non-negative, got {self.inter_strength}")
        if (rows, cols) != (1, 1) and lo <= self.inter_strength:
            raise ValueError("Intra-cluster couplings must be stronger than inter-cluster couplings")

    def block_index(self) -> np.ndarray:
        """Cluster label of every site."""
        rows, cols = self.cluster_grid
        index = np.arange(self.size)
        row_block = index * rows // self.size
        col_block = index * cols // self.size
        return row_block[:, None] * cols + col_block[None, :]


@dataclass(frozen=True)
class Couplings:
    right: np.ndarray
    down: np.ndarray


def build_couplings(spec: CouplingSpec) -> Couplings:
    rng = np.random.default_rng(spec.seed)
    lo, hi = spec.intra_strength_range
    blocks = spec.block_index()
    right = rng.uniform(lo, hi, size=(spec.size, spec.size))
    down = rng.uniform(lo, hi, size=(spec.size, spec.size))
    right[blocks != np.roll(blocks, -1, axis=1)] = spec.inter_strength
    down[blocks != np.roll(blocks, -1, axis=0)] = spec.inter_strength
    right.flags.writeable = False
    down.flags.writeable = False
    return Couplings(right=right, down=down)


@dataclass(frozen=True)
class IsingLattice:
    spec: CouplingSpec
    spins: np.ndarray
    couplings: Couplings
    temperature: float
    rng_stream: np.random.Generator

    @property
    def size(self) -> int:
        return self.spec.size

    def magnetization(self) -> float:
        return float(self.spins.mean())

    def with_temperature(self, temperature: float) -> "IsingLattice":
        if temperature <= 0:
            raise ValueError(f"temperature must be positive, got {temperature}")
        return replace(self, temperature=float(temperature))


def init_lattice(spec: CouplingSpec, temperature: float, seed: int, ordered: bool = False) -> IsingLattice:
    """Couplings come from ``spec.seed``; spins and proposals from ``seed``.

    ``ordered`` starts from all spins up instead of a random configuration.
    """
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    rng = np.random.default_rng(seed)
    if ordered:
        spins = np.ones((spec.size, spec.size), dtype=np.int8)
    else:
        spins = np.where(rng.random((spec.size, spec.size)) < 0.5, -1, 1).astype(np.int8)
    return IsingLattice(spec, spins, build_couplings(spec), float(temperature), rng)


@njit(cache=True, nogil=True)
def _metropolis_sweep(spins, right, down, beta, uniforms):
    n = spins.shape[0]
    accepted = 0
    k = 0
    for i in range(n):
        up = i - 1 if i > 0 else n - 1
        below = i + 1 if i < n - 1 else 0
        for j in range(n):
            left = j - 1 if j > 0 else n - 1
            nxt = j + 1 if j < n - 1 else 0
            s = spins[i, j]
            field = (
                right[i, j] * spins[i, nxt]
                + right[i, left] * spins[i, left]
                + down[i, j] * spins[below, j]
                + down[up, j] * spins[up, j]
            )
            delta = 2.0 * s * field
            if delta <= 0.0 or uniforms[k] < np.exp(-delta * beta):
                spins[i, j] = -s
                accepted += 1
            k += 1
    return accepted


def mcmc_sweep(lat: IsingLattice) -> IsingLattice:
    spins = lat.spins.copy()
    uniforms = lat.rng_stream.random(spins.size)
    _metropolis_sweep(spins, lat.couplings.right, lat.couplings.down, 1.0 / lat.temperature, uniforms)
    return replace(lat, spins=spins)


def energy(lat: IsingLattice) -> float:
    s = lat.spins.astype(float)
    bonds = lat.couplings.right * s * np.roll(s, -1, axis=1) + lat.couplings.down * s * np.roll(s, -1, axis=0)
    return float(-bonds.sum())


@dataclass(frozen=True)
class SusceptibilityEstimate:
    chi: float
    n_samples: int
    temperature: float


def susceptibility(magnetization_samples: Sequence[float], temperature: float, n_spins: int) -> SusceptibilityEstimate:
    samples = np.asarray(magnetization_samples, dtype=float)
    if samples.size < 2:
        raise ValueError(f"susceptibility needs at least 2 samples, got {samples.size}")
    if temperature <= 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    variance = max(float(np.mean(samples * samples) - np.mean(samples) ** 2), 0.0)
    return SusceptibilityEstimate(chi=n_spins * variance / temperature, n_samples=int(samples.size), temperature=float(temperature))


def sample_magnetization(lat: IsingLattice, burn_in: int, n_samples: int) -> tuple[IsingLattice, np.ndarray]:
    for _ in range(burn_in):
        lat = mcmc_sweep(lat)
    samples = np.empty(n_samples)
    for index in range(n_samples):
        lat = mcmc_sweep(lat)
        samples[index] = lat.magnetization()
    return lat, samples


def susceptibility_sweep(
    spec: CouplingSpec, t_grid: Sequence[float], seed: int = 0, burn_in: int = 200, n_samples: int = 300
) -> list[SusceptibilityEstimate]:
    """Estimate chi at every grid temperature; each chain starts with all spins up."""
    estimates = []
    for temperature in t_grid:
        lat = init_lattice(spec, temperature, seed, ordered=True)
        _, samples = sample_magnetization(lat, burn_in, n_samples)
        estimate = susceptibility(samples, temperature, spec.size * spec.size)
        logger.debug("T=%.3f chi=%.4f", temperature, estimate.chi)
        estimates.append(estimate)
    return estimates


def classify_estimates(estimates: Sequence[SusceptibilityEstimate]) -> tuple[float, float]:
    ordered = sorted(estimates, key=lambda e: e.temperature)
    chi = np.array([e.chi for e in ordered])
    peak = int(np.argmax(chi))
    if peak == 0 or peak == len(chi) - 1:
        raise ClassificationError(
            f"Susceptibility peak at T={ordered[peak].temperature} is not bracketed by the temperature grid"
        )
    below = [e for e in ordered[:peak] if e.chi < 0.1 * chi[peak]]
    if not below:
        raise ClassificationError("No grid temperature below the peak has chi under 10% of the peak")
    return below[-1].temperature, ordered[peak].temperature


def classify_states(
    spec: CouplingSpec, t_grid: Sequence[float], seed: int = 0, burn_in: int = 200, n_samples: int = 300
) -> tuple[float, float]:
    """Return ``(T_ordered, T_chaotic)`` for ``spec`` over ``t_grid``."""
    t_ordered, t_chaotic = classify_estimates(susceptibility_sweep(spec, t_grid, seed, burn_in, n_samples))
    logger.info("Ising classification: ordered T=%.3f, chaotic T=%.3f", t_ordered, t_chaotic)
    return t_ordered, t_chaotic


def sheet_indices(size: int, n: int = SHEET_SIZE) -> np.ndarray:
    if size < n:
        raise ValueError(f"Lattice side {size} is smaller than the {n}x{n} sheet")
    return np.arange(n) * size // n


def downsample(lat, n: int = SHEET_SIZE) -> np.ndarray:
    spins = lat.spins if isinstance(lat, IsingLattice) else np.asarray(lat)
    index = sheet_indices(spins.shape[0], n)
    return spins[np.ix_(index, index)].copy()


def spins_to_spikes(sample: np.ndarray) -> np.ndarray:
    return np.asarray(sample).ravel() > 0


def run_drive(lat: IsingLattice, n_ticks: int, sweeps_per_tick: int = 1) -> Iterator[tuple[IsingLattice, np.ndarray]]:
    """Yield ``(lattice, spikes)`` once per tick after ``sweeps_per_tick`` sweeps."""
    for _ in range(n_ticks):
        for _ in range(sweeps_per_tick):
            lat = mcmc_sweep(lat)
        yield lat, spins_to_spikes(downsample(lat))


_DONE = object()


class IsingDriveThread(threading.Thread):
    """Runs :func:`run_drive` on a worker thread behind a bounded queue."""

    def __init__(self, lat: IsingLattice, n_ticks: int, sweeps_per_tick: int = 1, maxsize: int = 8) -> None:
        super().__init__(name="ising-drive", daemon=True)
        self._lattice = lat
        self._n_ticks = n_ticks
        self._sweeps = sweeps_per_tick
        self._queue: queue.Queue = queue.Queue(maxsize=maxsize)
        self._halt = threading.Event()
        self.final_lattice: Optional[IsingLattice] = None

    def run(self) -> None:
        try:
            for lat, spikes in run_drive(self._lattice, self._n_ticks, self._sweeps):
                if self._halt.is_set():
                    return
                self.final_lattice = lat
                self._queue.put(spikes)
            self._queue.put(_DONE)
        except Exception as exc:
            self._queue.put(exc)

    def frames(self) -> Iterator[np.ndarray]:
        if self.ident is None:
            self.start()
        while True:
            item = self._queue.get()
            if item is _DONE:
                return
            if isinstance(item, Exception):
                raise item
            yield item

    def stop(self) -> None:
        self._halt.set()
        while True:
            try:
                self._queue.get_nowait()
            except queue.Empty:
                return


def write_pgm(path: str, spins: np.ndarray) -> str:
    """Plain-text (P2) greyscale grid: 1 for +1 spins, 0 for -1."""
    grid = (np.asarray(spins) > 0).astype(int)
    height, width = grid.shape
    try:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, "w", encoding="ascii", newline="\n") as handle:
            handle.write(f"P2\n{width} {height}\n1\n")
            for row in grid:
                handle.write(" ".join(str(v) for v in row) + "\n")
    except OSError as exc:
        raise OSError(f"Failed to write {path}: {exc}") from exc
    return path


def write_drive_csv(path: str, frames: Sequence[tuple[int, np.ndarray]]) -> str:
    """Record ``(step, spikes)`` frames as spike events over input indices."""
    rows = ((step, int(unit)) for step, spikes in frames for unit in np.flatnonzero(spikes))
    return write_csv(path, SPIKES_HEADER, rows)


def read_drive_csv(path: str, n_inputs: int, tick_steps: int = TICK_STEPS) -> dict[int, np.ndarray]:
    """Replay a recorded drive as ``{tick_step: spikes}``; silent ticks are absent."""
    frames: dict[int, np.ndarray] = {}
    for row in iter_csv_dicts(path, SPIKES_HEADER):
        step, unit = int(row["step"]), int(row["unit_id"])
        if step % tick_steps:
            raise ValueError(f"Drive event at step {step} is off the {tick_steps}-step tick grid in {path}")
        if not 0 <= unit < n_inputs:
            raise ValueError(f"Drive event for input {unit} outside [0, {n_inputs}) in {path}")
        frames.setdefault(step, np.zeros(n_inputs, dtype=bool))[unit] = True
    return frames
