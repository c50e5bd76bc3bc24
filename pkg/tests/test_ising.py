from __future__ import annotations

import itertools
import os
import tempfile
import unittest

import numpy as np

from snan.config import load_experiment_config
from snan.errors import ClassificationError
from snan.ising import (
    CouplingSpec,
    IsingDriveThread,
    SusceptibilityEstimate,
    _metropolis_sweep,
    build_couplings,
    classify_estimates,
    classify_states,
    downsample,
    energy,
    init_lattice,
    mcmc_sweep,
    read_drive_csv,
    run_drive,
    sheet_indices,
    spins_to_spikes,
    susceptibility,
    susceptibility_sweep,
    write_drive_csv,
    write_pgm,
)

UNIFORM = dict(cluster_grid=(1, 1), intra_strength_range=(1.0, 1.0), inter_strength=0.0)


class TestCouplings(unittest.TestCase):
    def test_block_structure(self):
        spec = CouplingSpec(size=32, cluster_grid=(4, 4), seed=2)
        couplings = build_couplings(spec)
        blocks = spec.block_index()
        self.assertEqual(len(np.unique(blocks)), 16)
        same = blocks == np.roll(blocks, -1, axis=1)
        self.assertTrue(np.all(couplings.right[~same] == 0.01))
        self.assertTrue(np.all((couplings.right[same] >= 1.5) & (couplings.right[same] <= 2.5)))
        np.testing.assert_array_equal(couplings.down, build_couplings(spec).down)

    def test_invalid_specs(self):
        with self.assertRaises(ValueError):
            CouplingSpec(size=1)
        with self.assertRaises(ValueError):
            CouplingSpec(size=8, cluster_grid=(2, 2), intra_strength_range=(0.005, 0.01), inter_strength=0.01)
        with self.assertRaises(ValueError):
            CouplingSpec(size=8, cluster_grid=(16, 16))

    def test_couplings_read_only(self):
        couplings = build_couplings(CouplingSpec(size=8, cluster_grid=(2, 2)))
        with self.assertRaises(ValueError):
            couplings.right[0, 0] = 5.0


class TestSweep(unittest.TestCase):
    def test_reproducible(self):
        spec = CouplingSpec(size=16, cluster_grid=(2, 2))
        a = init_lattice(spec, 2.0, seed=11)
        b = init_lattice(spec, 2.0, seed=11)
        for _ in range(5):
            a = mcmc_sweep(a)
            b = mcmc_sweep(b)
        np.testing.assert_array_equal(a.spins, b.spins)

    def test_ordered_start(self):
        lat = init_lattice(CouplingSpec(size=8, cluster_grid=(2, 2)), 1.0, seed=3, ordered=True)
        self.assertTrue(np.all(lat.spins == 1))
        self.assertEqual(lat.magnetization(), 1.0)

    def test_sweep_does_not_mutate_input(self):
        lat = init_lattice(CouplingSpec(size=8, cluster_grid=(1, 1)), 2.0, seed=1)
        before = lat.spins.copy()
        mcmc_sweep(lat)
        np.testing.assert_array_equal(lat.spins, before)

    def test_low_temperature_lowers_energy(self):
        lat = init_lattice(CouplingSpec(size=16, **UNIFORM), 0.5, seed=4)
        start = energy(lat)
        for _ in range(20):
            lat = mcmc_sweep(lat)
        self.assertLess(energy(lat), start)

    def test_boltzmann_distribution_on_small_torus(self):
        spec = CouplingSpec(size=3, **UNIFORM)
        temperature = 3.0
        lat = init_lattice(spec, temperature, seed=0)
        states = list(itertools.product((-1, 1), repeat=9))
        weights = []
        for state in states:
            spins = np.array(state, dtype=np.int8).reshape(3, 3)
            candidate = type(lat)(spec, spins, lat.couplings, temperature, lat.rng_stream)
            weights.append(np.exp(-energy(candidate) / temperature))
        expected = np.array(weights) / np.sum(weights)

        powers = 1 << np.arange(9)
        counts = np.zeros(len(states))
        spins = lat.spins.copy()
        rng = np.random.default_rng(1)
        n_sweeps = 1_000_000
        chunk = 100_000
        for _ in range(n_sweeps // chunk):
            uniforms = rng.random((chunk, 9))
            for row in uniforms:
                _metropolis_sweep(spins, lat.couplings.right, lat.couplings.down, 1.0 / temperature, row)
                # itertools.product order: first site is the most significant bit
                counts[int(((spins.ravel()[::-1] > 0) * powers).sum())] += 1
        observed = counts / n_sweeps
        self.assertLess(0.5 * np.abs(observed - expected).sum(), 0.02)


class TestSusceptibility(unittest.TestCase):
    def test_formula(self):
        est = susceptibility([0.5, -0.5], 2.0, 4)
        self.assertEqual(est.chi, 0.5)
        self.assertEqual(est.n_samples, 2)

    def test_needs_samples(self):
        with self.assertRaises(ValueError):
            susceptibility([0.1], 2.0, 4)

    def test_classification(self):
        estimates = [
            SusceptibilityEstimate(chi, 300, t)
            for t, chi in [(1.0, 0.1), (2.0, 3.0), (2.3, 20.0), (2.6, 4.0), (3.0, 1.0)]
        ]
        self.assertEqual(classify_estimates(estimates), (1.0, 2.3))

    def test_unbracketed_peak(self):
        estimates = [SusceptibilityEstimate(chi, 300, t) for t, chi in [(1.0, 0.1), (2.0, 1.0), (3.0, 9.0)]]
        with self.assertRaises(ClassificationError):
            classify_estimates(estimates)

    def test_no_ordered_temperature(self):
        estimates = [SusceptibilityEstimate(chi, 300, t) for t, chi in [(1.0, 5.0), (2.0, 9.0), (3.0, 1.0)]]
        with self.assertRaises(ClassificationError):
            classify_estimates(estimates)

    def test_clustered_lattice_is_quiet_at_low_temperature(self):
        spec = CouplingSpec(size=32, cluster_grid=(2, 2))
        (estimate,) = susceptibility_sweep(spec, [1.0], seed=4, burn_in=50, n_samples=100)
        self.assertLess(estimate.chi, 0.01)

    def test_shipped_chaos_lattice_classifies(self):
        ising = load_experiment_config("chaos").ising
        grid = sorted(ising.t_grid)
        for seed in (0, 4):
            t_ordered, t_chaotic = classify_states(ising.coupling, ising.t_grid, seed, ising.burn_in, ising.n_samples)
            self.assertLess(t_ordered, t_chaotic)
            self.assertIn(t_chaotic, grid[1:-1])

    def test_peak_near_onsager_temperature(self):
        spec = CouplingSpec(size=64, **UNIFORM)
        t_grid = [1.5, 2.1, 2.2, 2.3, 2.4, 3.5]
        estimates = susceptibility_sweep(spec, t_grid, seed=3, burn_in=200, n_samples=300)
        peak = max(estimates, key=lambda e: e.chi).temperature
        self.assertLess(abs(peak - 2.269) / 2.269, 0.1)


class TestDrive(unittest.TestCase):
    def test_sheet(self):
        self.assertEqual(len(sheet_indices(256)), 42)
        self.assertEqual(int(sheet_indices(256)[-1]), 41 * 256 // 42)
        with self.assertRaises(ValueError):
            sheet_indices(40)

    def test_spins_to_spikes(self):
        sample = np.array([[1, -1], [-1, 1]], dtype=np.int8)
        self.assertEqual(spins_to_spikes(sample).tolist(), [True, False, False, True])

    def test_downsample_shape(self):
        lat = init_lattice(CouplingSpec(size=84, cluster_grid=(2, 2)), 2.0, seed=0)
        sample = downsample(lat)
        self.assertEqual(sample.shape, (42, 42))
        np.testing.assert_array_equal(sample, lat.spins[::2, ::2])

    def test_thread_matches_generator(self):
        spec = CouplingSpec(size=48, cluster_grid=(3, 3))
        expected = [spikes for _, spikes in run_drive(init_lattice(spec, 3.0, seed=5), 6)]
        worker = IsingDriveThread(init_lattice(spec, 3.0, seed=5), 6, maxsize=2)
        frames = list(worker.frames())
        worker.join()
        self.assertEqual(len(frames), 6)
        for got, want in zip(frames, expected):
            np.testing.assert_array_equal(got, want)
        self.assertIsNotNone(worker.final_lattice)

    def test_drive_csv(self):
        frames = [(0, np.array([True, False, True])), (5, np.array([False, False, False])), (10, np.array([False, True, False]))]
        with tempfile.TemporaryDirectory() as tmpdir:
            path = os.path.join(tmpdir, "drive.csv")
            write_drive_csv(path, frames)
            replay = read_drive_csv(path, n_inputs=3, tick_steps=5)
            self.assertEqual(sorted(replay), [0, 10])
            self.assertEqual(replay[0].tolist(), [True, False, True])
            with open(path, "a", encoding="utf-8") as handle:
                handle.write("7,1\n")
            with self.assertRaises(ValueError):
                read_drive_csv(path, n_inputs=3, tick_steps=5)

    def test_write_pgm(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = write_pgm(os.path.join(tmpdir, "spins.pgm"), np.array([[1, -1], [-1, -1]]))
            with open(path, encoding="ascii") as handle:
                self.assertEqual(handle.read(), "P2\n2 2\n1\n1 0\n0 0\n")


if __name__ == "__main__":
    unittest.main()
