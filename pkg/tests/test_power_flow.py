"""
Unit tests for the Newton power flow and the sensitivity matrix.
"""

import math
import unittest

import numpy as np
import numpy.testing as npt

from gridgenius.logic.power_flow.newton_solver import (
    PowerFlowError, SetpointVector, measure, nominal_demand_for, solve,
)
from gridgenius.logic.power_flow.sensitivity import sensitivity
from tests.test_base import GridGeniusTestBase, two_bus_network

U0 = np.array([0.5, 0.5, 1.0, 1.0, 1.0])


def two_bus_voltage(p: float, x: float) -> float:
    """Receiving-end voltage of a lossless line feeding a unity power factor load."""
    return math.sqrt((1.0 + math.sqrt(1.0 - 4.0 * p * p * x * x)) / 2.0)


class TestTwoBusPowerFlow(unittest.TestCase):

    def setUp(self):
        self.network = two_bus_network(reactance=0.1)

    def test_matches_closed_form(self):
        sol = solve(self.network, SetpointVector(u=[1.0], demand_mw=0.0), injections={2: -1.0})
        self.assertTrue(sol.converged)
        self.assertAlmostEqual(sol.vm[1], two_bus_voltage(1.0, 0.1), places=8)
        self.assertAlmostEqual(sol.vm[1], 0.99494, places=5)

    def test_lossless_line_balances_power(self):
        sol = solve(self.network, SetpointVector(u=[1.0], demand_mw=0.0), injections={2: -1.0})
        y = measure(self.network, sol)
        npt.assert_allclose(y[[0, 2]], [1.0, 1.0], atol=1e-8)
        self.assertAlmostEqual(sol.losses_mw, 0.0, places=6)
        v2 = two_bus_voltage(1.0, 0.1)
        self.assertAlmostEqual(sol.q_gen[0], (1.0 - v2 * v2) / 0.1, places=6)

    def test_no_load_flat_profile(self):
        sol = solve(self.network, SetpointVector(u=[1.02], demand_mw=0.0))
        self.assertTrue(sol.converged)
        npt.assert_allclose(sol.vm, [1.02, 1.02], atol=1e-10)
        npt.assert_allclose(sol.va, [0.0, 0.0], atol=1e-10)

    def test_beyond_loadability_is_reported(self):
        # maximum transfer is 1 / (2 x) = 5 p.u.
        try:
            sol = solve(self.network, SetpointVector(u=[1.0], demand_mw=0.0), injections={2: -6.0})
        except PowerFlowError:
            return
        self.assertFalse(sol.converged)
        with self.assertRaises(PowerFlowError):
            measure(self.network, sol)

    def test_control_vector_length_checked(self):
        with self.assertRaises(PowerFlowError):
            solve(self.network, SetpointVector(u=[1.0, 1.0], demand_mw=0.0))


class TestNinebusPowerFlow(GridGeniusTestBase):

    def setUp(self):
        super().setUp()
        self.setpoints = SetpointVector(u=U0, demand_mw=300.0)
        self.sol = solve(self.network, self.setpoints)

    def test_converges(self):
        self.assertTrue(self.sol.converged)
        self.assertLess(self.sol.mismatch, 1e-8)

    def test_setpoints_are_honoured(self):
        y = measure(self.network, self.sol)
        outputs = list(self.network.outputs)
        self.assertAlmostEqual(y[outputs.index('P_SG2')], 0.5, places=8)
        for bus in (1, 2, 3):
            self.assertAlmostEqual(y[outputs.index(f'V{bus}')], 1.0, places=10)

    def test_power_balance(self):
        generation = self.sol.generation_mw(self.network).sum()
        self.assertAlmostEqual(
            generation, self.sol.realized_demand_mw + self.sol.losses_mw, places=5
        )
        self.assertGreater(self.sol.losses_mw, 0.0)

    def test_realized_demand_follows_voltage(self):
        # constant-impedance loads draw |V|^2 times their nominal power
        nominal = self.sol.p_load / self.sol.vm ** 2
        self.assertAlmostEqual(nominal.sum() * 100.0, 300.0, places=6)

    def test_measure_unconverged_raises(self):
        sol = solve(self.network, self.setpoints, max_iter=0)
        self.assertFalse(sol.converged)
        with self.assertRaises(PowerFlowError):
            measure(self.network, sol)

    def test_nominal_demand_search(self):
        nominal = nominal_demand_for(self.network, U0, 318.55)
        sol = solve(self.network, SetpointVector(u=U0, demand_mw=nominal))
        self.assertAlmostEqual(sol.realized_demand_mw, 318.55, delta=1e-5)


class TestSensitivity(GridGeniusTestBase):

    def _measure(self, u, demand):
        sol = solve(self.network, SetpointVector(u=u, demand_mw=demand), tolerance=1e-12)
        return measure(self.network, sol)

    def test_matches_finite_differences(self):
        demand = 318.0
        sens = sensitivity(self.network, SetpointVector(u=U0, demand_mw=demand))
        h = 1e-5
        numeric = np.zeros_like(sens.grad)
        for j in range(len(U0)):
            step = np.zeros(len(U0))
            step[j] = h
            numeric[:, j] = (self._measure(U0 + step, demand) - self._measure(U0 - step, demand)) / (2 * h)
        npt.assert_allclose(sens.grad, numeric, atol=1e-5)

    def test_stacked_identity(self):
        sens = sensitivity(self.network, SetpointVector(u=U0, demand_mw=300.0))
        m = len(self.network.controls)
        self.assertEqual(sens.F.shape, (m + len(self.network.outputs), m))
        npt.assert_array_equal(sens.F[:m], np.eye(m))

    def test_controlled_outputs_have_unit_rows(self):
        sens = sensitivity(self.network, SetpointVector(u=U0, demand_mw=300.0))
        npt.assert_array_equal(sens.output_row('V1'), [0, 0, 1, 0, 0])
        npt.assert_array_equal(sens.output_row('P_SG2'), [1, 0, 0, 0, 0])

    def test_slack_power_decreases_with_dispatch(self):
        sens = sensitivity(self.network, SetpointVector(u=U0, demand_mw=300.0))
        row = sens.output_row('P_GFM1')
        # 270 MVA of SG output displaces roughly 270 / 512 of GFM output
        self.assertAlmostEqual(row[0], -270.0 / 512.0, delta=0.05)
        self.assertLess(row[1], 0.0)


if __name__ == '__main__':
    unittest.main()
