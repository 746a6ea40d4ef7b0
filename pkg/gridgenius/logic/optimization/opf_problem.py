"""
Offline optimal power flow baselines.

This module provides the reduced-space OPF: decision variables are the
controls u, the outputs are eliminated through the power flow at every
evaluation, and derivatives come from the same sensitivity the online
controller uses. Three modes share the objective:

    plain   input and output limits only
    mars    plus the stability surrogate  g(u) <= theta - margin
    v1cap   plain limits with the bus-1 voltage capped at 1.0 p.u.
"""

from dataclasses import dataclass, field
from enum import Enum
import logging
import math
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from ..grid.network_ops import ConstraintSet, build_constraints
from ..models.network_models import NetworkModel
from ..power_flow.newton_solver import PowerFlowError, PowerFlowSolution, SetpointVector, measure, solve
from ..power_flow.sensitivity import sensitivity
from ..regression.mars_model import MarsModel
from ..small_signal.device_models import LinearizationError
from ..small_signal.modal_analysis import CriticalFilter, ModalAnalysisError, evaluate_stability
from .objective import QuadraticObjective
from .ofo_controller import DEFAULT_EPSILON_MARGIN, DEFAULT_THETA, SurrogateInputs
from .sqp_solver import (
    ModelEvaluation, ModelEvaluationError, OptimizationError, SqpSettings, solve_sqp,
)

logger = logging.getLogger(__name__)

PLANT_TOLERANCE = 1e-11


class OpfMode(str, Enum):
    """Constraint set of an OPF baseline."""
    PLAIN = 'plain'
    MARS = 'mars'
    V1CAP = 'v1cap'


@dataclass
class OpfProblem:
    """
    One OPF instance at a fixed nominal demand.

    ``stability_model`` is required in ``mars`` mode; in the other modes it
    is only used to report the predicted damping index.
    """

    network: NetworkModel
    demand_mw: float
    objective: QuadraticObjective
    mode: OpfMode = OpfMode.PLAIN
    gamma: float = 100.0
    stability_model: Optional[MarsModel] = None
    theta: float = DEFAULT_THETA
    epsilon_margin: float = DEFAULT_EPSILON_MARGIN
    voltage_cap_bus: int = 1
    voltage_cap: float = 1.0
    constraints: Optional[ConstraintSet] = None
    _inputs: Optional[SurrogateInputs] = field(default=None, init=False, repr=False)

    def __post_init__(self) -> None:
        self.mode = OpfMode(self.mode)
        if self.constraints is None:
            caps = {self.voltage_cap_bus: self.voltage_cap} if self.mode == OpfMode.V1CAP else None
            self.constraints = build_constraints(self.network, voltage_caps=caps)
        if self.mode == OpfMode.MARS and self.stability_model is None:
            raise OptimizationError("The mars mode requires a stability model")
        if self.stability_model is not None:
            self._inputs = SurrogateInputs(self.network, self.stability_model.feature_names)

    @property
    def constrained_by_surrogate(self) -> bool:
        return self.mode == OpfMode.MARS

    def plant(self, u: np.ndarray) -> PowerFlowSolution:
        sol = solve(self.network, SetpointVector(u=u, demand_mw=self.demand_mw), tolerance=PLANT_TOLERANCE)
        if not sol.converged:
            raise ModelEvaluationError(f"Power flow did not converge at u = {np.round(u, 6).tolist()}")
        return sol

    def predicted_di(self, u: np.ndarray, y: np.ndarray) -> float:
        if self.stability_model is None:
            return math.nan
        return float(self.stability_model.predict(self._inputs.values(u, y)))

    def evaluate(self, u: np.ndarray) -> ModelEvaluation:
        """
        Scaled objective gamma*phi, constraints c(u) <= 0 and derivatives.

        The Hessian guess is the Gauss-Newton matrix of the quadratic objective.
        """
        try:
            sol = self.plant(u)
            y = measure(self.network, sol)
            sens = sensitivity(self.network, sol.setpoints, sol)
        except PowerFlowError as e:
            raise ModelEvaluationError(str(e)) from e
        F = sens.F
        cs = self.constraints

        objective = self.gamma * self.objective.value(u, y)
        gradient = self.gamma * self.objective.reduced_gradient(u, y, F)

        values = [cs.A @ u - cs.b, cs.C @ y - cs.d]
        jac = [cs.A, cs.C @ sens.grad]
        if self.constrained_by_surrogate:
            x = self._inputs.values(u, y)
            g = float(self.stability_model.predict(x))
            values.append(np.array([g - (self.theta - self.epsilon_margin)]))
            jac.append((self.stability_model.gradient(x) @ self._inputs.jacobian(sens.grad)).reshape(1, -1))

        hessian = np.zeros((len(u), len(u)))
        n_u = len(u)
        for term in self.objective.terms:
            row = F[term.index] if term.source == 'u' else F[n_u + term.index]
            hessian += 2.0 * self.gamma * term.weight * np.outer(row, row)

        return ModelEvaluation(
            objective=float(objective),
            gradient=gradient,
            constraints=np.concatenate(values),
            jacobian=np.vstack(jac),
            hessian=hessian,
        )


@dataclass
class OpfSolution:
    """Optimum of an OPF instance with stability verdicts."""

    mode: OpfMode
    demand_mw: float
    u: np.ndarray
    y: np.ndarray
    objective: float
    multipliers: np.ndarray
    iterations: int
    kkt_residual: float
    converged: bool
    di_predicted: float
    di_exact: float
    solution: Optional[PowerFlowSolution] = None
    message: str = ''

    @property
    def stable(self) -> bool:
        return self.di_exact < 1.0


def exact_di(
    network: NetworkModel,
    sol: PowerFlowSolution,
    critical_filter: Optional[CriticalFilter] = None,
) -> float:
    """Eigenvalue damping index at a solved point (NaN when the model cannot be built)."""
    try:
        return evaluate_stability(network, sol.setpoints, critical_filter, sol=sol).di
    except (PowerFlowError, LinearizationError, ModalAnalysisError) as e:
        logger.warning(f"Exact damping index unavailable: {e}")
        return math.nan


def solve_opf(
    problem: OpfProblem,
    u0: Sequence[float],
    settings: Optional[SqpSettings] = None,
    critical_filter: Optional[CriticalFilter] = None,
) -> OpfSolution:
    """
    Solve an OPF instance by SQP from ``u0``.

    Raises:
        OptimizationError: Infeasible subproblem or unsolvable starting point
    """
    u0 = np.asarray(u0, dtype=float)
    try:
        result = solve_sqp(problem.evaluate, u0, settings)
    except ModelEvaluationError as e:
        raise OptimizationError(f"OPF starting point cannot be evaluated: {e}") from e

    u = result.x
    sol = problem.plant(u)
    y = measure(problem.network, sol)
    di_exact = exact_di(problem.network, sol, critical_filter)
    solution = OpfSolution(
        mode=problem.mode,
        demand_mw=problem.demand_mw,
        u=u,
        y=y,
        objective=problem.objective.value(u, y),
        multipliers=result.multipliers,
        iterations=result.iterations,
        kkt_residual=result.kkt.max,
        converged=result.converged,
        di_predicted=problem.predicted_di(u, y),
        di_exact=di_exact,
        solution=sol,
        message=result.message,
    )
    logger.info(
        f"OPF ({problem.mode.value}) at {problem.demand_mw:.2f} MW: phi = {solution.objective:.6f}, "
        f"{result.iterations} iterations, converged = {result.converged}, DI = {di_exact:.6f}"
    )
    return solution


def report_row(
    network: NetworkModel,
    case: str,
    method: str,
    sol: PowerFlowSolution,
    phi: float,
    di_predicted: float,
    di_exact: float,
    iterations: int,
    converged: bool,
) -> Dict[str, Any]:
    """
    One row of the comparison table.

    Columns: case, method, P/Q per generator (MW/Mvar), phi, DI by the
    surrogate, exact DI, verdict and iteration count.
    """
    row: Dict[str, Any] = {'case': case, 'method': method}
    base = network.system_mva_base
    for gen in network.generators:
        k = network.bus_index(gen.bus)
        row[f"P_{gen.label}_MW"] = float(sol.p_gen[k] * base)
        row[f"Q_{gen.label}_Mvar"] = float(sol.q_gen[k] * base)
    row['realized_demand_MW'] = float(sol.realized_demand_mw)
    row['phi'] = float(phi)
    row['DI_mars'] = float(di_predicted)
    row['DI_exact'] = float(di_exact)
    if math.isnan(di_exact):
        row['verdict'] = 'unknown'
    else:
        row['verdict'] = 'stable' if di_exact < 1.0 else 'unstable'
    row['iterations'] = int(iterations)
    row['converged'] = bool(converged)
    return row


def report(rows: Sequence[Dict[str, Any]]) -> List[Dict[str, Any]]:
    """Validate comparison rows share one column set; order is preserved."""
    if not rows:
        raise OptimizationError("No solutions to report")
    columns = list(rows[0].keys())
    for row in rows[1:]:
        if list(row.keys()) != columns:
            raise OptimizationError("Comparison rows have differing columns")
    return list(rows)
