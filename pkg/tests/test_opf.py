"""
Unit tests for the SQP solver and the offline OPF baselines.
"""

import math
import unittest

import numpy as np
import numpy.testing as npt

from gridgenius.logic.optimization.objective import QuadraticObjective
from gridgenius.logic.optimization.opf_problem import (
    OpfMode, OpfProblem, exact_di, report, report_row, solve_opf,
)
from gridgenius.logic.optimization.sqp_solver import (
    ModelEvaluation, ModelEvaluationError, OptimizationError, SqpSettings,
    damped_bfgs, kkt_residuals, solve_sqp,
)
from gridgenius.logic.power_flow.newton_solver import SetpointVector, measure, solve
from gridgenius.logic.regression.mars_model import reference_model
from tests.test_base import GridGeniusTestBase

U0 = np.array([0.5, 0.5, 1.0, 1.0, 1.0])


def linear_constrained_quadratic(x):
    """(x0 - 1)^2 + (x1 - 2)^2 subject to x0 + x1 <= 2."""
    return ModelEvaluation(
        objective=float((x[0] - 1.0) ** 2 + (x[1] - 2.0) ** 2),
        gradient=np.array([2.0 * (x[0] - 1.0), 2.0 * (x[1] - 2.0)]),
        constraints=np.array([x[0] + x[1] - 2.0]),
        jacobian=np.array([[1.0, 1.0]]),
    )


def disc_constrained_linear(x):
    """x0 + x1 subject to x0^2 + x1^2 <= 2."""
    return ModelEvaluation(
        objective=float(x[0] + x[1]),
        gradient=np.array([1.0, 1.0]),
        constraints=np.array([x[0] ** 2 + x[1] ** 2 - 2.0]),
        jacobian=np.array([[2.0 * x[0], 2.0 * x[1]]]),
    )


class TestSqp(unittest.TestCase):

    def test_linear_constraint(self):
        result = solve_sqp(linear_constrained_quadratic, np.zeros(2))
        self.assertTrue(result.converged)
        npt.assert_allclose(result.x, [0.5, 1.5], atol=1e-5)
        npt.assert_allclose(result.multipliers, [1.0], atol=1e-5)
        self.assertLessEqual(result.kkt.max, 1e-6)

    def test_nonlinear_constraint(self):
        result = solve_sqp(disc_constrained_linear, np.array([0.5, 0.2]))
        self.assertTrue(result.converged)
        npt.assert_allclose(result.x, [-1.0, -1.0], atol=1e-5)
        npt.assert_allclose(result.multipliers, [0.5], atol=1e-5)

    def test_iteration_limit_is_reported(self):
        result = solve_sqp(disc_constrained_linear, np.array([0.5, 0.2]), SqpSettings(max_iter=1))
        self.assertFalse(result.converged)
        self.assertEqual(result.iterations, 1)
        self.assertEqual(result.message, 'iteration limit reached')

    def test_infeasible_subproblem(self):
        def model(x):
            return ModelEvaluation(
                objective=float(x @ x), gradient=2.0 * x,
                constraints=np.array([x[0] - 1.0, 2.0 - x[0]]),
                jacobian=np.array([[1.0], [-1.0]]),
            )
        with self.assertRaises(OptimizationError):
            solve_sqp(model, np.zeros(1))

    def test_failure_at_start_propagates(self):
        def model(x):
            raise ModelEvaluationError('no solution')
        with self.assertRaises(OptimizationError):
            solve_sqp(model, np.zeros(2))

    def test_kkt_residuals(self):
        evaluation = linear_constrained_quadratic(np.array([0.5, 1.5]))
        kkt = kkt_residuals(evaluation, np.array([1.0]))
        self.assertAlmostEqual(kkt.max, 0.0, places=12)
        kkt = kkt_residuals(linear_constrained_quadratic(np.array([2.0, 2.0])), np.zeros(1))
        self.assertAlmostEqual(kkt.feasibility, 2.0)

    def test_bfgs_secant_condition(self):
        B = np.eye(2)
        s = np.array([1.0, 0.5])
        y = np.array([2.0, 1.5])
        B_next = damped_bfgs(B, s, y)
        npt.assert_allclose(B_next @ s, y, atol=1e-12)
        npt.assert_allclose(B_next, B_next.T)

    def test_bfgs_damping_keeps_positive_definite(self):
        B = np.eye(2)
        s = np.array([1.0, 0.0])
        y = np.array([-1.0, 0.0])
        B_next = damped_bfgs(B, s, y)
        self.assertTrue(np.all(np.linalg.eigvalsh(B_next) > 0.0))


class TestOpf(GridGeniusTestBase):

    demand = 318.0

    def setUp(self):
        super().setUp()
        self.objective = QuadraticObjective(self.network)

    def _phi_at(self, u):
        sol = solve(self.network, SetpointVector(u=u, demand_mw=self.demand))
        return self.objective.value(u, measure(self.network, sol))

    def _assert_within_limits(self, solution, tol=1e-3):
        problem = OpfProblem(self.network, self.demand, self.objective)
        cs = problem.constraints
        self.assertTrue(np.all(cs.A @ solution.u - cs.b <= tol))
        self.assertTrue(np.all(cs.C @ solution.y - cs.d <= tol))

    def test_mars_mode_requires_model(self):
        with self.assertRaises(OptimizationError):
            OpfProblem(self.network, self.demand, self.objective, mode=OpfMode.MARS)

    def test_voltage_cap_constraints(self):
        problem = OpfProblem(self.network, self.demand, self.objective, mode='v1cap')
        self.assertEqual(problem.mode, OpfMode.V1CAP)
        self.assertEqual(problem.constraints.u_bounds[1][2], 1.0)

    def test_evaluation_derivatives(self):
        problem = OpfProblem(self.network, self.demand, self.objective, gamma=10.0)
        evaluation = problem.evaluate(U0)
        self.assertAlmostEqual(evaluation.objective, 10.0 * self._phi_at(U0), places=6)
        h = 1e-5
        numeric = np.zeros(len(U0))
        for j in range(len(U0)):
            step = np.zeros(len(U0))
            step[j] = h
            numeric[j] = (problem.evaluate(U0 + step).objective - problem.evaluate(U0 - step).objective) / (2 * h)
        npt.assert_allclose(evaluation.gradient, numeric, rtol=1e-4, atol=1e-3)
        npt.assert_allclose(evaluation.hessian, evaluation.hessian.T)

    def test_plain_opf_improves_dispatch(self):
        problem = OpfProblem(self.network, self.demand, self.objective, gamma=100.0)
        solution = solve_opf(problem, U0)
        self.assertLess(solution.objective, self._phi_at(U0))
        self._assert_within_limits(solution)
        self.assertTrue(math.isnan(solution.di_predicted))
        self.assertTrue(np.isfinite(solution.kkt_residual))

    def test_surrogate_constrained_opf(self):
        model = reference_model()
        problem = OpfProblem(
            self.network, self.demand, self.objective, mode=OpfMode.MARS, gamma=10.0,
            stability_model=model,
        )
        solution = solve_opf(problem, U0)
        self._assert_within_limits(solution)
        self.assertLessEqual(solution.di_predicted, problem.theta - problem.epsilon_margin + 1e-4)

    def test_voltage_capped_opf(self):
        problem = OpfProblem(self.network, self.demand, self.objective, mode=OpfMode.V1CAP)
        solution = solve_opf(problem, U0)
        self.assertLessEqual(solution.u[2], 1.0 + 1e-6)
        self.assertLessEqual(solution.y[2], 1.0 + 1e-6)

    def test_report_rows(self):
        sol = solve(self.network, SetpointVector(u=U0, demand_mw=self.demand))
        di = exact_di(self.network, sol)
        row = report_row(self.network, 'medium', 'OPF', sol, 0.6, math.nan, di, 12, True)
        self.assertEqual(list(row)[:4], ['case', 'method', 'P_GFM1_MW', 'Q_GFM1_Mvar'])
        self.assertEqual(row['verdict'], 'stable' if di < 1.0 else 'unstable')
        self.assertAlmostEqual(row['realized_demand_MW'], sol.realized_demand_mw)
        self.assertEqual(report([row, row]), [row, row])
        unknown = report_row(self.network, 'medium', 'OPF', sol, 0.6, math.nan, math.nan, 1, False)
        self.assertEqual(unknown['verdict'], 'unknown')

    def test_report_requires_rows(self):
        with self.assertRaises(OptimizationError):
            report([])
        with self.assertRaises(OptimizationError):
            report([{'a': 1}, {'b': 2}])


if __name__ == '__main__':
    unittest.main()
