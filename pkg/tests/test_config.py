from __future__ import annotations

import os
import tempfile
import unittest

import yaml

from snan.config import (
    EXPERIMENTS,
    PatternSet,
    load_experiment_config,
    parse_experiment_config,
    shipped_config_path,
)
from snan.errors import ConfigError

PATTERNS = ((0, 4, 8), (2, 4, 6), (0, 1, 2), (1, 4, 7), (0, 6, 7))


def sync_raw(**changes) -> dict:
    raw = {
        "experiment": "sync",
        "seed": 5,
        "duration_s": 1.0,
        "network": {
            "n_sources": 10,
            "source_rate_hz": 20.0,
            "n_post": 4,
            "connection_probability": 0.5,
            "weight": 2,
            "neuron": {"threshold": 8},
        },
        "astrocyte": {"prototypes": [{"ip3_sensitivity": 1}]},
    }
    raw.update(changes)
    return raw


class TestShippedConfigs(unittest.TestCase):
    def test_all_shipped_configs_parse(self):
        for name in EXPERIMENTS:
            cfg = load_experiment_config(name)
            self.assertEqual(cfg.experiment, name)
            self.assertTrue(os.path.exists(shipped_config_path(name)))

    def test_sync_config(self):
        cfg = load_experiment_config("sync")
        self.assertEqual(cfg.steps(cfg.duration_s), 8000)
        self.assertEqual(cfg.astrocyte.prototypes[0].sic_window, 400.0)
        self.assertEqual(cfg.sync.neuron.threshold, 64)
        self.assertEqual(cfg.astrocyte.sic_table.decays, (1, 2))

    def test_memory_patterns_share_centre(self):
        patterns = load_experiment_config("memory").memory.patterns
        sharing = [i for i, p in enumerate(patterns.patterns) if 4 in p]
        self.assertEqual(sharing, [0, 1, 3])
        self.assertEqual(patterns.rates(0).tolist(), [100.0, 5.0, 5.0, 5.0, 100.0, 5.0, 5.0, 5.0, 100.0])
        self.assertEqual(patterns.grids()[2], [[1, 1, 1], [0, 0, 0], [0, 0, 0]])

    def test_chaos_config(self):
        cfg = load_experiment_config("chaos")
        self.assertEqual(cfg.ising.coupling.size, 256)
        self.assertEqual(cfg.monitor.n_inputs, 1764)
        self.assertEqual(cfg.monitor.bhp.period, 16)


class TestPatternSet(unittest.TestCase):
    def test_valid(self):
        self.assertEqual(len(PatternSet(PATTERNS).patterns), 5)

    def test_wrong_count(self):
        with self.assertRaises(ConfigError):
            PatternSet(PATTERNS[:4])

    def test_wrong_size(self):
        with self.assertRaises(ConfigError):
            PatternSet(((0, 4),) + PATTERNS[1:])

    def test_overlap(self):
        with self.assertRaises(ConfigError):
            PatternSet(((0, 4, 8), (0, 4, 6)) + PATTERNS[2:])

    def test_outside_grid(self):
        with self.assertRaises(ConfigError):
            PatternSet(((0, 4, 9),) + PATTERNS[1:])


class TestConfigErrors(unittest.TestCase):
    def test_minimal_sync(self):
        cfg = parse_experiment_config(sync_raw())
        self.assertEqual(cfg.output_dir, os.path.join("out", "sync"))
        self.assertEqual(cfg.dt_ms, 1.0)

    def test_unknown_key(self):
        raw = sync_raw()
        raw["network"]["gain"] = 3
        with self.assertRaises(ConfigError) as ctx:
            parse_experiment_config(raw)
        self.assertIn("gain", str(ctx.exception))

    def test_missing_section(self):
        raw = sync_raw()
        del raw["network"]
        with self.assertRaises(ConfigError):
            parse_experiment_config(raw)

    def test_unknown_experiment(self):
        with self.assertRaises(ConfigError):
            parse_experiment_config(sync_raw(experiment="waves"))

    def test_bad_values(self):
        with self.assertRaises(ConfigError):
            parse_experiment_config(sync_raw(seed=-1))
        with self.assertRaises(ConfigError):
            parse_experiment_config(sync_raw(duration_s=0))
        raw = sync_raw()
        raw["network"]["connection_probability"] = 1.5
        with self.assertRaises(ConfigError):
            parse_experiment_config(raw)

    def test_invalid_prototype(self):
        raw = sync_raw(astrocyte={"prototypes": [{"sic_amplitude": 1.0, "sic_window": 10.0}]})
        with self.assertRaises(ConfigError):
            parse_experiment_config(raw)

    def test_not_a_mapping(self):
        with self.assertRaises(ConfigError):
            parse_experiment_config([1, 2])

    def test_invalid_yaml(self):
        with tempfile.TemporaryDirectory() as tmpdir:
            path = os.path.join(tmpdir, "bad.yaml")
            with open(path, "w", encoding="utf-8") as handle:
                handle.write("experiment: [sync\n")
            with self.assertRaises(ConfigError):
                load_experiment_config(path)

    def test_missing_file(self):
        with self.assertRaises(ConfigError):
            load_experiment_config("/nonexistent/config.yaml")

    def test_rate_window_must_be_positive(self):
        with open(shipped_config_path("chaos"), encoding="utf-8") as handle:
            raw = yaml.safe_load(handle)
        raw["monitor"]["rate_window_ms"] = 0.0
        with self.assertRaises(ConfigError):
            parse_experiment_config(raw)


class TestOverrides(unittest.TestCase):
    def test_overrides_change_hash(self):
        cfg = parse_experiment_config(sync_raw())
        seeded = cfg.with_overrides(seed=9)
        self.assertEqual(seeded.seed, 9)
        self.assertNotEqual(cfg.sha256(), seeded.sha256())
        self.assertEqual(cfg.sha256(), parse_experiment_config(sync_raw()).sha256())

    def test_ablation_override(self):
        cfg = parse_experiment_config(sync_raw()).with_overrides(ablate_astrocyte=True, output_dir="elsewhere")
        self.assertTrue(cfg.ablate_astrocyte)
        self.assertEqual(cfg.output_dir, "elsewhere")
        self.assertTrue(cfg.raw["ablate_astrocyte"])


if __name__ == "__main__":
    unittest.main()
