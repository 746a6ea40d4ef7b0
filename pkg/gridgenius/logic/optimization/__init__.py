"""
Optimization package.

Dense active-set QP, the dispatch objective, the online feedback
controller and the SQP-based OPF baselines.
"""

from .qp_active_set import QPError, QPInfeasibleError, QPResult, solve_qp
from .objective import QuadraticObjective, dispatch_objective
from .ofo_controller import (
    ControllerError,
    ControllerState,
    OfoConfig,
    OfoController,
    SurrogateInputs,
    TrajectoryEntry,
    observable_features,
)
from .sqp_solver import OptimizationError, SqpResult, SqpSettings, solve_sqp
from .opf_problem import OpfMode, OpfProblem, OpfSolution, report, report_row, solve_opf

__all__ = [
    "QPError",
    "QPInfeasibleError",
    "QPResult",
    "solve_qp",
    "QuadraticObjective",
    "dispatch_objective",
    "ControllerError",
    "ControllerState",
    "OfoConfig",
    "OfoController",
    "SurrogateInputs",
    "TrajectoryEntry",
    "observable_features",
    "OptimizationError",
    "SqpResult",
    "SqpSettings",
    "solve_sqp",
    "OpfMode",
    "OpfProblem",
    "OpfSolution",
    "report",
    "report_row",
    "solve_opf",
]
