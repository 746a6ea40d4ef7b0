"""
Power-flow package: Newton-Raphson solver, measurement of the controller
outputs and the input-output sensitivity.
"""

from .newton_solver import (
    PowerFlowError,
    PowerFlowSolution,
    SetpointVector,
    SingularJacobianError,
    measure,
    nominal_demand_for,
    quantity,
    solve,
)
from .sensitivity import SensitivityMatrix, sensitivity

__all__ = [
    "PowerFlowError",
    "PowerFlowSolution",
    "SetpointVector",
    "SingularJacobianError",
    "measure",
    "nominal_demand_for",
    "quantity",
    "solve",
    "SensitivityMatrix",
    "sensitivity",
]
