"""
Unit tests for the dispatch objective and the feedback optimization controller.
"""

import math
import unittest

import numpy as np
import numpy.testing as npt

from gridgenius.logic.grid.network_ops import ConstraintSet, build_constraints
from gridgenius.logic.optimization.objective import QuadraticObjective, dispatch_objective
from gridgenius.logic.optimization.ofo_controller import (
    DEFAULT_THETA, ControllerError, OfoConfig, OfoController, SurrogateInputs,
    augment, direction, kkt_residual, observable_features,
)
from gridgenius.logic.power_flow.newton_solver import SetpointVector, measure, solve
from gridgenius.logic.power_flow.sensitivity import sensitivity
from gridgenius.logic.regression.mars_model import MarsModelError, reference_model
from tests.test_base import GridGeniusTestBase

RATINGS = {'P_GFM1': 512.0, 'P_SG2': 270.0, 'P_GFL3': 125.0}
U0 = np.array([0.5, 0.5, 1.0, 1.0, 1.0])


def box(lower, upper, n_outputs=0):
    """Input box constraint set with no output rows."""
    n = len(lower)
    A = np.vstack([np.eye(n), -np.eye(n)])
    b = np.concatenate([upper, -np.asarray(lower)])
    return ConstraintSet(
        A=A, b=b, C=np.zeros((0, n_outputs)), d=np.zeros(0),
        u_bounds=(np.asarray(lower), np.asarray(upper)),
        y_bounds=(np.zeros(n_outputs), np.zeros(n_outputs)),
    )


class TestObjective(GridGeniusTestBase):

    def test_dispatch_objective_low_demand(self):
        powers = {'P_GFM1': 128.37, 'P_SG2': 54.0, 'P_GFL3': 25.0}
        self.assertAlmostEqual(dispatch_objective(powers, RATINGS), 0.5029, places=4)

    def test_dispatch_objective_medium_demand(self):
        powers = {'P_GFM1': 240.29, 'P_SG2': 54.0, 'P_GFL3': 25.0}
        self.assertAlmostEqual(dispatch_objective(powers, RATINGS), 0.6603, places=4)

    def test_terms_resolve_to_outputs_first(self):
        objective = QuadraticObjective(self.network)
        sources = {term.label: term.source for term in objective.terms}
        self.assertEqual(sources, {'P_GFM1': 'y', 'P_SG2': 'y', 'P_GFL3': 'u'})

    def test_value_and_gradient(self):
        objective = QuadraticObjective(self.network)
        u = np.array([0.3, 0.4, 1.0, 1.0, 1.0])
        y = np.zeros(11)
        y[0], y[1] = 0.5, 0.3
        self.assertAlmostEqual(objective.value(u, y), 0.25 + 10 * 0.09 + 0.16)
        grad_u, grad_y = objective.gradient(u, y)
        npt.assert_allclose(grad_u, [0.0, 0.8, 0.0, 0.0, 0.0])
        npt.assert_allclose(grad_y[:2], [1.0, 6.0])

    def test_unknown_quantity(self):
        with self.assertRaises(ValueError):
            QuadraticObjective(self.network, {'P_SG7': 1.0})


class TestConfig(unittest.TestCase):

    def test_defaults_are_valid(self):
        config = OfoConfig()
        self.assertTrue(config.validate().is_valid)
        npt.assert_allclose(np.diag(config.G), [1.0, 1.0, 0.1, 0.1, 0.1])
        self.assertAlmostEqual(config.theta, 1.0 - 1e-5)

    def test_invalid_values(self):
        config = OfoConfig(alpha=0.0, gamma=-1.0, metric=(1.0, 0.0), theta=1.5, max_iter=0)
        self.assertEqual(len(config.validate().errors), 5)


class TestProjection(unittest.TestCase):

    def setUp(self):
        self.config = OfoConfig(alpha=1.0, gamma=1.0, metric=(1.0,))
        self.constraints = box([0.0], [1.0])
        self.F = np.eye(1)

    def test_step_is_cut_at_upper_bound(self):
        result = direction(np.array([0.9]), np.zeros(0), self.F, np.array([-0.5]),
                           self.config, self.constraints)
        npt.assert_allclose(result.delta0, [0.5])
        npt.assert_allclose(result.delta, [0.1], atol=1e-12)
        self.assertFalse(result.fallback)

    def test_kkt_residual_vanishes_at_bound(self):
        result = direction(np.array([1.0]), np.zeros(0), self.F, np.array([-0.5]),
                           self.config, self.constraints)
        npt.assert_allclose(result.delta, [0.0], atol=1e-12)
        self.assertLess(kkt_residual(self.config, self.F, result), 1e-10)

    def test_kkt_residual_away_from_optimum(self):
        result = direction(np.array([0.9]), np.zeros(0), self.F, np.array([-0.5]),
                           self.config, self.constraints)
        self.assertAlmostEqual(kkt_residual(self.config, self.F, result), 0.1, places=10)

    def test_infeasible_output_rows_fall_back_to_slack(self):
        constraints = ConstraintSet(
            A=np.zeros((0, 1)), b=np.zeros(0), C=np.array([[1.0]]), d=np.array([1.0]),
            u_bounds=(np.array([-np.inf]), np.array([np.inf])),
            y_bounds=(np.array([-np.inf]), np.array([1.0])),
        )
        F = np.array([[1.0], [0.0]])
        result = direction(np.array([0.0]), np.array([1.5]), F, np.array([-0.5, 0.0]),
                           self.config, constraints)
        self.assertTrue(result.fallback)
        self.assertAlmostEqual(result.slack, 0.5, places=8)
        npt.assert_allclose(result.delta, [0.5], atol=1e-8)

    def test_infeasible_input_box(self):
        constraints = box([1.0], [0.0])
        with self.assertRaises(ControllerError):
            direction(np.array([0.5]), np.zeros(0), self.F, np.array([-0.5]),
                      self.config, constraints)

    def test_dimension_check(self):
        with self.assertRaises(ControllerError):
            direction(np.array([0.5]), np.zeros(1), self.F, np.array([-0.5]),
                      self.config, self.constraints)


class TestSurrogateInputs(GridGeniusTestBase):

    def test_mapping(self):
        inputs = SurrogateInputs(self.network, ['V1', 'V6', 'Pg2', 'Pl5'])
        u = U0.copy()
        y = np.arange(11, dtype=float)
        values = inputs.values(u, y, {'Pl5': 1.2})
        npt.assert_allclose(values, [2.0, 7.0, 1.0 * 2.7, 1.2])
        with self.assertRaises(ControllerError):
            inputs.values(u, y)

    def test_jacobian(self):
        inputs = SurrogateInputs(self.network, ['V1', 'V6', 'Pl5'])
        grad = np.arange(55, dtype=float).reshape(11, 5)
        J = inputs.jacobian(grad)
        npt.assert_allclose(J[0], grad[2])
        npt.assert_allclose(J[1], grad[7])
        npt.assert_allclose(J[2], 0.0)

    def test_unmappable_feature(self):
        with self.assertRaises(MarsModelError):
            SurrogateInputs(self.network, ['theta4'])

    def test_observable_features(self):
        names = ['V1', 'theta1', 'Pg2', 'Qg2', 'Pl5', 'V6']
        self.assertEqual(observable_features(self.network, names), ['V1', 'Pg2', 'V6'])

    def test_stability_row(self):
        config = OfoConfig(alpha=0.01)
        model = reference_model()
        inputs = SurrogateInputs(self.network, model.feature_names)
        y = np.ones(11)
        y[2], y[7] = 0.98, 0.95
        grad = np.zeros((11, 5))
        grad[2, 2] = 1.0
        grad[7, 2] = 0.5
        row = augment(config, model, inputs, U0, y, grad)
        g = model.predict([0.98, 0.95])
        self.assertAlmostEqual(row.g_value, g)
        self.assertAlmostEqual(row.rhs, DEFAULT_THETA - 1e-6 - g)
        expected = 0.01 * np.array([0.0, 0.0, 0.0290 - 0.5 * 0.0071, 0.0, 0.0])
        npt.assert_allclose(row.coefficients, expected, atol=1e-12)
        self.assertFalse(row.extrapolating)


class TestClosedLoop(GridGeniusTestBase):

    demand = 318.0

    def _run(self, controller, iterations):
        state = controller.initial_state(U0)
        for _ in range(iterations):
            sol = solve(self.network, SetpointVector(u=state.u, demand_mw=self.demand))
            y = measure(self.network, sol)
            F = sensitivity(self.network, sol.setpoints, sol).F
            state = controller.step(state, y, F)
        return state, F

    def test_state_before_first_step(self):
        controller = OfoController(self.network, QuadraticObjective(self.network), OfoConfig())
        state = controller.initial_state(U0)
        self.assertFalse(controller.has_converged(state))
        self.assertEqual(state.trajectory, ())
        with self.assertRaises(ControllerError):
            controller.kkt_residual(state, np.eye(16, 5))
        self.assertTrue(math.isnan(controller.predicted_di(U0, np.ones(11))))

    def test_metric_length_checked(self):
        with self.assertRaises(ControllerError):
            OfoController(self.network, QuadraticObjective(self.network), OfoConfig(metric=(1.0, 1.0)))

    def test_plain_loop_reduces_objective_within_limits(self):
        config = OfoConfig(alpha=4e-4, gamma=100.0, metric=(1.0, 1.0, 0.2, 0.2, 0.2))
        controller = OfoController(self.network, QuadraticObjective(self.network), config)
        state, F = self._run(controller, 40)
        self.assertEqual(state.iteration, 40)
        self.assertEqual(len(state.trajectory), 40)
        self.assertLess(state.trajectory[-1].phi, state.trajectory[0].phi)

        lower, upper = build_constraints(self.network).u_bounds
        for entry in state.trajectory:
            u = np.array(entry.u)
            self.assertTrue(np.all(u >= lower - 1e-9) and np.all(u <= upper + 1e-9))
            self.assertTrue(math.isnan(entry.g_hat))
        self.assertTrue(np.isfinite(controller.kkt_residual(state, F)))

    def test_stability_constrained_loop_keeps_prediction_below_threshold(self):
        config = OfoConfig(alpha=4e-4, gamma=100.0, metric=(1.0, 1.0, 0.2, 0.2, 0.2))
        controller = OfoController(
            self.network, QuadraticObjective(self.network), config, stability_model=reference_model()
        )
        state, _ = self._run(controller, 40)
        for entry in state.trajectory:
            self.assertTrue(np.isfinite(entry.g_hat))
            self.assertLessEqual(entry.g_hat, config.theta + 1e-4)


if __name__ == '__main__':
    unittest.main()
