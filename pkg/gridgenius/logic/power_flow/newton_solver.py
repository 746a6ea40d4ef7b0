"""
Newton-Raphson AC power flow.

This module provides the steady-state plant: given the control setpoints
u and the total nominal demand, it solves the polar power-flow equations
with constant-impedance loads embedded in the admittance matrix and
reports voltages, generation, realized load and losses.
"""

from dataclasses import dataclass, field
import logging
import warnings
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve

from ..grid.network_ops import admittance_matrix, load_admittances
from ..models.network_models import BusKind, NetworkModel, QuantityLabel

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-8
DEFAULT_MAX_ITER = 50


class PowerFlowError(Exception):
    """Exception raised for power-flow failures that cannot be reported as a flag."""
    pass


class SingularJacobianError(PowerFlowError):
    """Exception raised when the power-flow Jacobian cannot be factorized."""
    pass


@dataclass(frozen=True)
class SetpointVector:
    """
    Control inputs plus the exogenous demand.

    ``u`` follows the network's control label order (powers on machine
    base, voltages in p.u.); ``demand_mw`` is the total nominal demand.
    """

    u: np.ndarray
    demand_mw: float

    def __post_init__(self) -> None:
        object.__setattr__(self, 'u', np.asarray(self.u, dtype=float).copy())

    def with_u(self, u: Sequence[float]) -> 'SetpointVector':
        return SetpointVector(u=np.asarray(u, dtype=float), demand_mw=self.demand_mw)


@dataclass
class PowerFlowSolution:
    """Solved operating point; all arrays indexed in network bus order."""

    vm: np.ndarray
    va: np.ndarray
    p_gen: np.ndarray
    q_gen: np.ndarray
    p_load: np.ndarray
    q_load: np.ndarray
    p_inj: np.ndarray
    q_inj: np.ndarray
    realized_demand_mw: float
    losses_mw: float
    converged: bool
    iterations: int
    mismatch: float
    setpoints: SetpointVector
    injections: Dict[int, complex] = field(default_factory=dict)

    @property
    def voltage(self) -> np.ndarray:
        return self.vm * np.exp(1j * self.va)

    def generation_mw(self, network: NetworkModel) -> np.ndarray:
        return self.p_gen * network.system_mva_base


def dsbus_dv(Y: np.ndarray, V: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Partial derivatives of bus injections w.r.t. voltage magnitude and angle.

    Returns:
        (dS/dVm, dS/dVa) as dense complex matrices
    """
    I = Y @ V
    v_norm = V / np.abs(V)
    ds_dvm = V[:, None] * np.conj(Y * v_norm[None, :]) + np.diag(np.conj(I) * v_norm)
    ds_dva = 1j * V[:, None] * np.conj(np.diag(I) - Y * V[None, :])
    return ds_dvm, ds_dva


def bus_partition(network: NetworkModel) -> Tuple[int, np.ndarray, np.ndarray]:
    """Slack index, PV+PQ indices and PQ indices (network order)."""
    slack = network.bus_index(network.slack_bus.id)
    pv = [i for i, b in enumerate(network.buses) if b.kind == BusKind.PV]
    pq = [i for i, b in enumerate(network.buses) if b.kind == BusKind.PQ]
    pvpq = np.array(sorted(pv + pq), dtype=int)
    return slack, pvpq, np.array(pq, dtype=int)


def jacobian(ds_dvm: np.ndarray, ds_dva: np.ndarray, pvpq: np.ndarray, pq: np.ndarray) -> np.ndarray:
    """Assemble the reduced polar Jacobian [dP/dVa dP/dVm; dQ/dVa dQ/dVm]."""
    j11 = ds_dva[np.ix_(pvpq, pvpq)].real
    j12 = ds_dvm[np.ix_(pvpq, pq)].real
    j21 = ds_dva[np.ix_(pq, pvpq)].imag
    j22 = ds_dvm[np.ix_(pq, pq)].imag
    return np.block([[j11, j12], [j21, j22]])


def factorize(J: np.ndarray):
    """LU-factorize a Jacobian, raising on (numerical) singularity."""
    if J.size == 0:
        return None
    with warnings.catch_warnings():
        warnings.simplefilter('error', LinAlgWarning)
        try:
            lu, piv = lu_factor(J)
        except (LinAlgWarning, ValueError, np.linalg.LinAlgError) as e:
            raise SingularJacobianError(f"Power-flow Jacobian is singular: {e}") from e
    pivots = np.abs(np.diag(lu))
    if not np.all(np.isfinite(lu)) or pivots.min() <= 1e-14 * max(pivots.max(), 1.0):
        raise SingularJacobianError("Power-flow Jacobian is singular")
    return lu, piv


def control_injections(
    network: NetworkModel,
    setpoints: SetpointVector,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Map the control vector onto specified bus powers and voltage magnitudes.

    Returns:
        (specified active generation per bus in system p.u., voltage setpoints;
         NaN where a bus voltage is free)
    """
    labels = network.control_labels()
    u = setpoints.u
    if len(u) != len(labels):
        raise PowerFlowError(f"Control vector has {len(u)} entries, expected {len(labels)}")

    p_spec = np.zeros(network.n_bus)
    v_set = np.full(network.n_bus, np.nan)
    for value, label in zip(u, labels):
        idx = network.bus_index(label.bus)
        if label.quantity == 'P':
            gen = network.generator_by_label(label)
            p_spec[idx] += value * network.machine_scale(gen)
        elif label.quantity == 'V':
            v_set[idx] = value
    return p_spec, v_set


def solve(
    network: NetworkModel,
    setpoints: SetpointVector,
    injections: Optional[Dict[int, complex]] = None,
    tolerance: float = DEFAULT_TOLERANCE,
    max_iter: int = DEFAULT_MAX_ITER,
) -> PowerFlowSolution:
    """
    Solve the AC power flow from a flat start.

    Args:
        network: Network model
        setpoints: Control vector and total nominal demand
        injections: Extra constant-power injections per bus id (system p.u.,
            positive = generation)
        tolerance: Mismatch infinity-norm tolerance in p.u.
        max_iter: Maximum Newton iterations

    Returns:
        PowerFlowSolution; ``converged`` is False when the tolerance was not met
    """
    injections = dict(injections or {})
    Y = admittance_matrix(network, setpoints.demand_mw)
    slack, pvpq, pq = bus_partition(network)
    npvpq = len(pvpq)

    p_spec, v_set = control_injections(network, setpoints)
    s_spec = p_spec.astype(complex)
    for bus_id, s in injections.items():
        s_spec[network.bus_index(bus_id)] += s

    vm = np.where(np.isnan(v_set), 1.0, v_set)
    va = np.zeros(network.n_bus)
    V = vm * np.exp(1j * va)

    def mismatch_vector(V: np.ndarray) -> np.ndarray:
        mis = V * np.conj(Y @ V) - s_spec
        return np.concatenate([mis[pvpq].real, mis[pq].imag])

    F = mismatch_vector(V)
    norm = np.max(np.abs(F)) if F.size else 0.0
    converged = norm < tolerance
    iterations = 0

    while not converged and iterations < max_iter:
        iterations += 1
        ds_dvm, ds_dva = dsbus_dv(Y, V)
        J = jacobian(ds_dvm, ds_dva, pvpq, pq)
        dx = -lu_solve(factorize(J), F)

        va[pvpq] += dx[:npvpq]
        vm[pq] += dx[npvpq:]
        V = vm * np.exp(1j * va)

        F = mismatch_vector(V)
        norm = np.max(np.abs(F))
        if not np.isfinite(norm):
            logger.warning("Power flow diverged (non-finite mismatch)")
            break
        converged = norm < tolerance
        logger.debug(f"Newton iteration {iterations}: mismatch {norm:.3e}")

    if not converged:
        logger.warning(
            f"Power flow did not converge in {iterations} iterations (mismatch {norm:.3e})"
        )

    return _build_solution(network, Y, V, s_spec, injections, setpoints, converged, iterations, norm)


def _build_solution(
    network: NetworkModel,
    Y: np.ndarray,
    V: np.ndarray,
    s_spec: np.ndarray,
    injections: Dict[int, complex],
    setpoints: SetpointVector,
    converged: bool,
    iterations: int,
    mismatch: float,
) -> PowerFlowSolution:
    base = network.system_mva_base
    vm = np.abs(V)
    va = np.angle(V)

    s_fixed = np.zeros(network.n_bus, dtype=complex)
    for bus_id, s in injections.items():
        s_fixed[network.bus_index(bus_id)] += s

    s_calc = V * np.conj(Y @ V)
    s_gen = s_calc - s_fixed
    # only generator buses produce; PQ buses carry numerical residue
    has_gen = np.array([network.generator_at(b.id) is not None for b in network.buses])
    s_gen = np.where(has_gen, s_gen, 0.0)

    y_load = load_admittances(network, setpoints.demand_mw)
    s_load = vm ** 2 * np.conj(y_load)
    s_inj = s_gen + s_fixed - s_load

    losses = 0.0
    for branch in network.branches:
        f = network.bus_index(branch.from_bus)
        t = network.bus_index(branch.to_bus)
        y = 1.0 / complex(branch.r, branch.x)
        half = 0.5j * branch.b_shunt
        i_f = ((y + half) / branch.tap ** 2) * V[f] - (y / branch.tap) * V[t]
        i_t = (y + half) * V[t] - (y / branch.tap) * V[f]
        losses += (V[f] * np.conj(i_f) + V[t] * np.conj(i_t)).real

    return PowerFlowSolution(
        vm=vm,
        va=va,
        p_gen=s_gen.real,
        q_gen=s_gen.imag,
        p_load=s_load.real,
        q_load=s_load.imag,
        p_inj=s_inj.real,
        q_inj=s_inj.imag,
        realized_demand_mw=float(s_load.real.sum() * base),
        losses_mw=float(losses * base),
        converged=bool(converged),
        iterations=iterations,
        mismatch=float(mismatch),
        setpoints=setpoints,
        injections=dict(injections),
    )


def quantity(network: NetworkModel, sol: PowerFlowSolution, label: QuantityLabel) -> float:
    """Value of a labelled quantity at a solution (machine base for powers)."""
    idx = network.bus_index(label.bus)
    if label.quantity == 'V':
        return float(sol.vm[idx])
    gen = network.generator_by_label(label)
    source = sol.p_gen if label.quantity == 'P' else sol.q_gen
    return float(source[idx] / network.machine_scale(gen))


def measure(network: NetworkModel, sol: PowerFlowSolution) -> np.ndarray:
    """
    Output vector y in the network's output label order.

    Raises:
        PowerFlowError: If the solution did not converge
    """
    if not sol.converged:
        raise PowerFlowError("Cannot measure an unconverged power-flow solution")
    return np.array([quantity(network, sol, label) for label in network.output_labels()])


def nominal_demand_for(
    network: NetworkModel,
    u: Sequence[float],
    realized_mw: float,
    tolerance: float = 1e-6,
    max_iter: int = 30,
) -> float:
    """
    Find the nominal demand whose realized demand matches a target.

    Constant-impedance loads draw |V|^2 times nominal power, so the mapping
    is smooth and monotone; a secant iteration suffices.

    Args:
        network: Network model
        u: Control vector held fixed during the search
        realized_mw: Target realized demand in MW
        tolerance: Absolute tolerance on realized demand in MW
        max_iter: Maximum secant steps

    Returns:
        Nominal total demand in MW
    """
    def residual(demand: float) -> float:
        sol = solve(network, SetpointVector(u=np.asarray(u, dtype=float), demand_mw=demand))
        if not sol.converged:
            raise PowerFlowError(f"Power flow failed at nominal demand {demand:.3f} MW")
        return sol.realized_demand_mw - realized_mw

    d0, d1 = realized_mw, realized_mw * 1.05 + 1e-3
    r0, r1 = residual(d0), residual(d1)
    for _ in range(max_iter):
        if abs(r1) < tolerance:
            return d1
        if r1 == r0:
            break
        d0, d1 = d1, d1 - r1 * (d1 - d0) / (r1 - r0)
        r0, r1 = r1, residual(d1)
    if abs(r1) < tolerance:
        return d1
    raise PowerFlowError(f"Nominal demand search did not reach {realized_mw:.3f} MW")
