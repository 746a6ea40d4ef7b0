"""
Steady-state input-output sensitivities.

This module provides dy/du at a converged power-flow solution through the
implicit-function theorem: one LU factorization of the final Jacobian is
reused for every control column.
"""

from dataclasses import dataclass
import logging
from typing import List, Optional, Tuple

import numpy as np
from scipy.linalg import lu_solve

from ..grid.network_ops import admittance_matrix
from ..models.network_models import NetworkModel
from .newton_solver import (
    PowerFlowError, PowerFlowSolution, SetpointVector,
    bus_partition, dsbus_dv, factorize, jacobian, solve,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SensitivityMatrix:
    """
    Stacked sensitivity [I; dy/du].

    ``grad`` holds dy/du alone (outputs x controls); ``F`` stacks the
    identity over it as used by the projected-gradient controller.
    """

    F: np.ndarray
    grad: np.ndarray
    control_labels: Tuple[str, ...]
    output_labels: Tuple[str, ...]

    def output_row(self, label: str) -> np.ndarray:
        return self.grad[self.output_labels.index(label)]


def bus_sensitivities(
    network: NetworkModel,
    sol: PowerFlowSolution,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Bus-level derivatives w.r.t. the controls at a converged solution.

    Returns:
        (dVm/du, dVa/du, dS/du) with one row per bus, one column per control;
        dS is the complex generation derivative in system p.u.
    """
    if not sol.converged:
        raise PowerFlowError("Sensitivities require a converged base point")

    Y = admittance_matrix(network, sol.setpoints.demand_mw)
    V = sol.voltage
    _, pvpq, pq = bus_partition(network)
    npvpq = len(pvpq)
    ds_dvm, ds_dva = dsbus_dv(Y, V)
    factors = factorize(jacobian(ds_dvm, ds_dva, pvpq, pq))

    labels = network.control_labels()
    n, m = network.n_bus, len(labels)
    pvpq_pos = {bus: k for k, bus in enumerate(pvpq)}

    F_u = np.zeros((npvpq + len(pq), m))
    dvm_direct = np.zeros((n, m))
    for j, label in enumerate(labels):
        idx = network.bus_index(label.bus)
        if label.quantity == 'P':
            gen = network.generator_by_label(label)
            F_u[pvpq_pos[idx], j] = -network.machine_scale(gen)
        else:
            F_u[:npvpq, j] = ds_dvm[pvpq, idx].real
            F_u[npvpq:, j] = ds_dvm[pq, idx].imag
            dvm_direct[idx, j] = 1.0

    dx = -lu_solve(factors, F_u) if factors is not None else np.zeros_like(F_u)

    dva = np.zeros((n, m))
    dva[pvpq] = dx[:npvpq]
    dvm = dvm_direct.copy()
    dvm[pq] += dx[npvpq:]

    ds = ds_dva @ dva + ds_dvm @ dvm
    return dvm, dva, ds


def output_gradient(network: NetworkModel, sol: PowerFlowSolution) -> np.ndarray:
    """dy/du in output label order (machine base for powers)."""
    dvm, _, ds = bus_sensitivities(network, sol)
    control_labels = list(network.controls)
    rows: List[np.ndarray] = []
    for name, label in zip(network.outputs, network.output_labels()):
        if name in control_labels:
            row = np.zeros(len(control_labels))
            row[control_labels.index(name)] = 1.0
            rows.append(row)
            continue
        idx = network.bus_index(label.bus)
        if label.quantity == 'V':
            rows.append(dvm[idx].copy())
        else:
            scale = network.machine_scale(network.generator_by_label(label))
            part = ds[idx].real if label.quantity == 'P' else ds[idx].imag
            rows.append(part / scale)
    return np.array(rows).reshape(len(rows), len(control_labels))


def sensitivity(
    network: NetworkModel,
    setpoints: SetpointVector,
    sol: Optional[PowerFlowSolution] = None,
) -> SensitivityMatrix:
    """
    Sensitivity matrix at an operating point.

    Args:
        network: Network model
        setpoints: Controls and demand of the base point
        sol: Already converged solution at ``setpoints`` (solved when omitted)

    Returns:
        SensitivityMatrix with F = [I; dy/du]
    """
    if sol is None:
        sol = solve(network, setpoints)
    if not sol.converged:
        raise PowerFlowError("Sensitivity base point did not converge")

    grad = output_gradient(network, sol)
    F = np.vstack([np.eye(len(network.controls)), grad])
    return SensitivityMatrix(
        F=F,
        grad=grad,
        control_labels=tuple(network.controls),
        output_labels=tuple(network.outputs),
    )
