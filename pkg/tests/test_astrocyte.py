from __future__ import annotations

import unittest

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from snan.astrocyte import (
    DEFAULT_PROTOTYPE,
    AstrocyteGroup,
    AstrocytePrototype,
    ConnectionMask,
    astrocyte_step,
    connect_inputs,
    connect_outputs,
    create_astrocyte,
    resolve_instance,
)
from snan.errors import WiringError
from snan.network import Network
from snan.plasticity import CombinedRule, TraceParams
from snan.sic_table import build_sic_table
from snan.substrate import CompartmentConfig

PINNED = {"ip3_to_sic_weight": 320, "sic_current_decay": 1, "sg_threshold": 16}


def fast_ip3(**extra) -> AstrocytePrototype:
    return AstrocytePrototype(low_level_overrides=dict(PINNED, ip3={"threshold": 1}, **extra))


class TestPrototype(unittest.TestCase):
    def test_unrealisable_burst(self):
        with self.assertRaises(ValueError):
            AstrocytePrototype(sic_amplitude=1.0, sic_window=10.0)

    def test_unknown_override(self):
        with self.assertRaises(ValueError):
            AstrocytePrototype(low_level_overrides={"sic_gain": 3})

    def test_compartment_override_must_be_mapping(self):
        with self.assertRaises(ValueError):
            AstrocytePrototype(low_level_overrides={"ip3": 5})

    def test_pins(self):
        self.assertTrue(DEFAULT_PROTOTYPE.pins_sic_parameters)
        self.assertFalse(AstrocytePrototype().pins_sic_parameters)


class TestResolve(unittest.TestCase):
    def test_pinned_parameters(self):
        a = resolve_instance(DEFAULT_PROTOTYPE)
        self.assertEqual(a.ip3_to_sic_weight, 320)
        self.assertEqual(a.sic_config.current_decay, 1)
        self.assertEqual(a.sg_config.threshold, 16)
        self.assertEqual(a.sg_config.bias, -16)
        self.assertEqual(a.sg_config.v_min, 0)

    def test_table_lookup(self):
        table = build_sic_table([256, 320, 384, 448, 512], [1, 2], [16, 32], workers=1)
        a = resolve_instance(AstrocytePrototype(sic_amplitude=1000.0, sic_window=400.0), table)
        self.assertEqual((a.ip3_to_sic_weight, a.sic_config.current_decay, a.sg_config.threshold), (448, 1, 32))

    def test_flat_override_beats_table(self):
        table = build_sic_table([256, 320, 384, 448, 512], [1, 2], [16, 32], workers=1)
        proto = AstrocytePrototype(sic_window=400.0, low_level_overrides={"sg_threshold": 16})
        a = resolve_instance(proto, table)
        self.assertEqual(a.ip3_to_sic_weight, 448)
        self.assertEqual(a.sg_config.threshold, 16)

    def test_compartment_overrides(self):
        proto = AstrocytePrototype(low_level_overrides=dict(PINNED, ip3={"threshold": 5204, "voltage_decay": 0}))
        a = resolve_instance(proto)
        self.assertEqual(a.ip3_config.threshold, 5204)
        self.assertEqual(a.ip3_config.voltage_decay, 0)


class TestAstrocyteStep(unittest.TestCase):
    def test_single_ip3_event_reproduces_table_burst(self):
        a = create_astrocyte(proto=fast_ip3())
        sg_steps = []
        for step in range(400):
            a, sg_spiked, ip3_spiked = astrocyte_step(a, 1 if step == 0 else 0)
            if step == 0:
                self.assertTrue(ip3_spiked)
            if sg_spiked:
                sg_steps.append(step)
        self.assertEqual(sg_steps[0], 0)
        self.assertEqual(sg_steps[-1], 299)
        self.assertEqual(len(sg_steps), 294)

    def test_no_input_no_activity(self):
        a = create_astrocyte()
        for _ in range(100):
            a, sg_spiked, ip3_spiked = astrocyte_step(a, 0)
            self.assertFalse(sg_spiked or ip3_spiked)

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.integers(0, 3), min_size=1, max_size=300))
    def test_sg_fires_only_above_threshold(self, inputs):
        a = create_astrocyte(proto=AstrocytePrototype(low_level_overrides=dict(PINNED, ip3={"threshold": 8})))
        for value in inputs:
            a, sg_spiked, _ = astrocyte_step(a, value)
            if sg_spiked:
                self.assertGreater(a.sic.v, a.sg_config.threshold)


class TestInvariants(unittest.TestCase):
    def ip3_steps(self, period, n_steps=4000):
        proto = AstrocytePrototype(
            ip3_sensitivity=64, low_level_overrides=dict(PINNED, ip3={"threshold": 1024, "voltage_decay": 64})
        )
        a = create_astrocyte(proto=proto)
        steps = []
        for step in range(n_steps):
            a, _, ip3_spiked = astrocyte_step(a, 1 if step % period == 0 else 0)
            if ip3_spiked:
                steps.append(step)
        return steps

    def test_ip3_interval_shrinks_with_input_rate(self):
        intervals = []
        for period in (32, 16, 8, 4, 2, 1):
            steps = self.ip3_steps(period)
            intervals.append(float(np.mean(np.diff(steps))) if len(steps) > 1 else float("inf"))
        self.assertTrue(all(later <= earlier for earlier, later in zip(intervals, intervals[1:])), intervals)
        self.assertLess(intervals[-1], float("inf"))

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.integers(0, 2), min_size=1, max_size=600), st.sampled_from([1, 64, 512]))
    def test_sic_only_decays_between_ip3_spikes(self, inputs, sic_decay):
        overrides = dict(PINNED, sic_current_decay=sic_decay, ip3={"threshold": 4, "voltage_decay": 0})
        a = create_astrocyte(proto=AstrocytePrototype(low_level_overrides=overrides))
        previous = a.sic.v
        for value in inputs:
            a, _, ip3_spiked = astrocyte_step(a, value)
            if not ip3_spiked:
                self.assertLessEqual(a.sic.v, previous)
            previous = a.sic.v


class TestGroup(unittest.TestCase):
    def test_prototype_map(self):
        slow = AstrocytePrototype(ip3_sensitivity=2, low_level_overrides=PINNED)
        group = AstrocyteGroup((DEFAULT_PROTOTYPE, slow), 3, (0, 1, 1))
        instances = group.instantiate()
        self.assertEqual([a.ip3_sensitivity for a in instances], [1, 2, 2])
        self.assertIsNot(instances[1].input_synapses, instances[2].input_synapses)

    def test_bad_map(self):
        with self.assertRaises(ValueError):
            AstrocyteGroup((DEFAULT_PROTOTYPE,), 2, (0,))
        with self.assertRaises(ValueError):
            AstrocyteGroup((DEFAULT_PROTOTYPE,), 1, (3,))


class TestWiring(unittest.TestCase):
    def test_mask_from_groups(self):
        mask = ConnectionMask.from_groups(4, [(0, 1), (2, 3)], weight=5)
        self.assertEqual(mask.shape, (4, 2))
        self.assertEqual(mask.mask[:, 0].tolist(), [True, True, False, False])
        self.assertEqual(int(mask.weights[3, 1]), 5)

    def test_connect_inputs_and_outputs(self):
        net = Network(seed=1)
        neurons = net.add_neurons(3, CompartmentConfig(threshold=5))
        astros = AstrocyteGroup((DEFAULT_PROTOTYPE,), 2).instantiate(net)
        connect_inputs(astros, neurons, ConnectionMask.from_groups(3, [(0,), (1, 2)], weight=2))
        connect_outputs(astros, neurons, ConnectionMask.full(3, 2, 7))
        self.assertEqual([s.pre_id for s in astros[1].input_synapses], [int(neurons[1]), int(neurons[2])])
        self.assertEqual({s.post_id for s in astros[0].input_synapses}, {astros[0].unit_ids.sr})
        self.assertEqual(len(astros[0].output_targets), 3)
        self.assertTrue(all(s.weight == 7 for s in astros[1].output_targets))

    def test_mask_shape_mismatch(self):
        net = Network()
        neurons = net.add_neurons(3, CompartmentConfig())
        a = create_astrocyte(net)
        with self.assertRaises(WiringError):
            connect_inputs(a, neurons, ConnectionMask.full(2, 1))

    def test_unwired_astrocyte(self):
        with self.assertRaises(WiringError):
            connect_inputs(create_astrocyte(), [0], ConnectionMask.full(1, 1))

    def test_reward_outputs_to_projection(self):
        net = Network()
        inputs = net.add_inputs(2)
        neuron = net.add_neurons(1, CompartmentConfig())
        projection = net.connect(inputs, [neuron[0]] * 2, 4, rule=CombinedRule(), trace_params=TraceParams())
        a = create_astrocyte(net)
        connect_outputs(a, projection, ConnectionMask(np.array([[True], [False]]), 1))
        self.assertEqual(net.reward_channels[0].tagged, (0,))
        other = create_astrocyte(net)
        with self.assertRaises(WiringError):
            connect_outputs(other, projection, ConnectionMask.full(2, 1))


if __name__ == "__main__":
    unittest.main()
