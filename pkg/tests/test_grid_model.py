"""
Unit tests for the network data model, fixture IO and network operations.
"""

from dataclasses import FrozenInstanceError
import math
import unittest

import numpy as np
import numpy.testing as npt

from gridgenius.logic.grid.fixture_io import load_network, network_from_dict, save_network
from gridgenius.logic.grid.network_ops import (
    admittance_matrix, build_constraints, label_limits, scale_demand,
)
from gridgenius.logic.models.network_models import (
    BusKind, GeneratorKind, NetworkDataError, QuantityLabel,
)
from tests.test_base import GridGeniusTestBase, two_bus_document, two_bus_network


class TestQuantityLabel(unittest.TestCase):

    def test_parse_generator_power(self):
        label = QuantityLabel.parse('P_SG2')
        self.assertEqual(label.quantity, 'P')
        self.assertEqual(label.bus, 2)
        self.assertEqual(label.kind, GeneratorKind.SG)

    def test_parse_voltage(self):
        label = QuantityLabel.parse('V9')
        self.assertEqual(label.quantity, 'V')
        self.assertEqual(label.bus, 9)
        self.assertIsNone(label.kind)

    def test_parse_rejects_unknown_grammar(self):
        for text in ('P2', 'X_SG2', 'V', 'Q_BAT4'):
            with self.subTest(text=text):
                with self.assertRaises(NetworkDataError):
                    QuantityLabel.parse(text)


class TestFixture(GridGeniusTestBase):

    def test_fixture_topology(self):
        self.assertEqual(self.network.n_bus, 9)
        self.assertEqual(len(self.network.branches), 9)
        transformers = [b for b in self.network.branches if b.kind == 'transformer']
        self.assertEqual(len(transformers), 3)
        self.assertEqual(self.network.slack_bus.id, 1)
        self.assertEqual(
            [b.kind for b in self.network.buses[:3]], [BusKind.SLACK, BusKind.PV, BusKind.PV]
        )

    def test_fixture_generators(self):
        labels = [g.label for g in self.network.generators]
        self.assertEqual(labels, ['GFM1', 'SG2', 'GFL3'])
        self.assertAlmostEqual(self.network.machine_scale(self.network.generators[0]), 5.12)
        self.assertTrue(all(g.dynamic_params is not None for g in self.network.generators))

    def test_fixture_labels(self):
        self.assertEqual(self.network.controls, ('P_SG2', 'P_GFL3', 'V1', 'V2', 'V3'))
        self.assertEqual(len(self.network.outputs), 11)
        self.assertEqual(self.network.outputs[:2], ('P_GFM1', 'P_SG2'))

    def test_fixture_is_valid(self):
        result = self.network.validate()
        self.assertTrue(result.is_valid, result.errors)

    def test_save_then_load_preserves_network(self):
        path = save_network(self.network, self.temp_dir / 'net.yaml')
        self.assert_file_not_empty(path)
        reloaded = load_network(path)
        self.assertEqual(reloaded, self.network)

    def test_load_missing_file(self):
        with self.assertRaises(NetworkDataError):
            load_network(self.temp_dir / 'missing.yaml')

    def test_wrong_format_tag(self):
        document = two_bus_document()
        document['format'] = 'something-else'
        with self.assertRaises(NetworkDataError):
            network_from_dict(document)


class TestNetworkValidation(unittest.TestCase):

    def _expect_error(self, document, fragment):
        with self.assertRaises(NetworkDataError) as ctx:
            network_from_dict(document)
        self.assertIn(fragment, str(ctx.exception))

    def test_two_slack_buses(self):
        document = two_bus_document()
        document['buses'][1]['kind'] = 'Slack'
        document['controls'] = ['V1', 'V2']
        self._expect_error(document, 'exactly one slack')

    def test_participations_must_sum_to_one(self):
        document = two_bus_document()
        document['loads'] = [{'bus': 2, 'participation': 0.7, 'power_factor': 1.0}]
        self._expect_error(document, 'participations')

    def test_disconnected_network(self):
        document = two_bus_document()
        document['buses'].append(
            {'id': 3, 'kind': 'PQ', 'base_kv': 230.0, 'v_min': 0.9, 'v_max': 1.1}
        )
        self._expect_error(document, 'not connected')

    def test_reactive_power_cannot_be_control(self):
        document = two_bus_document()
        document['controls'] = ['V1', 'Q_INF1']
        self._expect_error(document, 'Reactive power')

    def test_slack_voltage_must_be_control(self):
        document = two_bus_document()
        document['controls'] = []
        self._expect_error(document, 'not a control')

    def test_zero_reactance_branch(self):
        document = two_bus_document()
        document['branches'][0]['x'] = 0.0
        self._expect_error(document, 'reactance')


class TestNetworkOps(GridGeniusTestBase):

    def test_scale_demand_participation(self):
        points = scale_demand(self.network, 215.4)
        self.assertEqual([p.bus for p in points], [5, 6, 8])
        self.assertAlmostEqual(points[0].p_mw, 86.16, places=9)
        self.assertAlmostEqual(sum(p.p_mw for p in points), 215.4, places=9)
        tan_phi = math.tan(math.acos(0.98))
        self.assertAlmostEqual(points[0].q_mvar, 86.16 * tan_phi, places=9)

    def test_scale_demand_rejects_negative(self):
        with self.assertRaises(NetworkDataError):
            scale_demand(self.network, -1.0)

    def test_scale_demand_warns_outside_range(self):
        with self.assertLogs('gridgenius.logic.grid.network_ops', level='WARNING'):
            scale_demand(self.network, 900.0)

    def test_two_bus_admittance(self):
        Y = admittance_matrix(two_bus_network(reactance=0.1))
        npt.assert_allclose(Y, np.array([[-10j, 10j], [10j, -10j]]), atol=1e-12)

    def test_admittance_is_symmetric(self):
        Y = admittance_matrix(self.network, 300.0)
        npt.assert_allclose(Y, Y.T, atol=1e-12)

    def test_loads_enter_as_shunts(self):
        base = admittance_matrix(self.network)
        loaded = admittance_matrix(self.network, 100.0)
        delta = np.diag(loaded - base)
        self.assertAlmostEqual(delta[self.network.bus_index(5)].real, 0.4, places=12)
        self.assertAlmostEqual(delta[self.network.bus_index(4)], 0.0)

    def test_label_limits(self):
        self.assertEqual(label_limits(self.network, QuantityLabel.parse('P_SG2')), (0.2, 0.95))
        self.assertEqual(label_limits(self.network, QuantityLabel.parse('V4')), (0.9, 1.1))
        lo, hi = label_limits(self.network, QuantityLabel.parse('Q_SG2'))
        self.assertEqual((lo, hi), (-math.inf, math.inf))

    def test_build_constraints(self):
        constraints = build_constraints(self.network)
        self.assertEqual(constraints.A.shape, (10, 5))
        self.assertEqual(constraints.C.shape, (22, 11))
        u = np.array([0.5, 0.5, 1.0, 1.0, 1.0])
        self.assertTrue(np.all(constraints.A @ u <= constraints.b))
        u_bad = u.copy()
        u_bad[2] = 1.2
        self.assertFalse(np.all(constraints.A @ u_bad <= constraints.b))

    def test_voltage_cap_tightens_bus_limit(self):
        constraints = build_constraints(self.network, voltage_caps={1: 1.0})
        self.assertEqual(constraints.u_bounds[1][2], 1.0)
        self.assertEqual(constraints.y_bounds[1][2], 1.0)
        self.assertEqual(constraints.y_bounds[1][3], 1.1)

    def test_network_is_immutable(self):
        with self.assertRaises(FrozenInstanceError):
            self.network.name = 'changed'


if __name__ == '__main__':
    unittest.main()
