"""
DAE assembly and linearization.

This module provides the differential-algebraic model of a network with
its generator controls, initialized from a converged power flow, and the
reduced state matrix obtained by eliminating the algebraic network
voltages from the linearized equations.
"""

from dataclasses import dataclass, field
import logging
import math
import warnings
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve

from ..grid.network_ops import admittance_matrix
from ..models.dynamic_params import DynamicComponentParams
from ..models.network_models import NetworkModel
from ..power_flow.newton_solver import PowerFlowSolution
from .device_models import ConstantPowerInjection, DeviceModel, LinearizationError, build_device
from .dual_numbers import Dual, gradient_of, value_of

logger = logging.getLogger(__name__)


@dataclass
class StateSpaceModel:
    """Linearized dynamics dx/dt = A x around an operating point."""

    A: np.ndarray
    state_labels: List[str]
    operating_point: Optional[PowerFlowSolution] = None
    x0: np.ndarray = field(default_factory=lambda: np.zeros(0))
    z0: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def n_states(self) -> int:
        return self.A.shape[0]


class DynamicSystem:
    """
    Network DAE:  dx/dt = f(x, z),  0 = g(x, z).

    ``x`` stacks device states in generator order; ``z`` holds the bus
    voltages in the rotating reference frame as [vr_1..vr_n, vi_1..vi_n];
    ``g`` is the current balance Y V - I_devices.
    """

    def __init__(
        self,
        network: NetworkModel,
        sol: PowerFlowSolution,
        params: Optional[Dict[int, DynamicComponentParams]] = None,
    ):
        if not sol.converged:
            raise LinearizationError("Linearization requires a converged power flow")

        self.network = network
        self.n_bus = network.n_bus
        self.omega_base = 2.0 * math.pi * network.frequency_hz
        overrides = params or {}

        Y = admittance_matrix(network, sol.setpoints.demand_mw)
        self.Y_real = np.block([[Y.real, -Y.imag], [Y.imag, Y.real]])

        self.devices: List[DeviceModel] = []
        for gen in network.generators:
            gen_params = overrides.get(gen.bus, gen.dynamic_params)
            if gen_params is None:
                raise LinearizationError(f"Generator {gen.label} has no dynamic parameters")
            self.devices.append(build_device(
                gen.label, network.bus_index(gen.bus), network.machine_scale(gen),
                self.omega_base, gen_params,
            ))
        for bus_id, power in sorted(sol.injections.items()):
            self.devices.append(ConstantPowerInjection(
                f"S{bus_id}", network.bus_index(bus_id), complex(power), self.omega_base,
            ))

        slack_index = network.bus_index(network.slack_bus.id)
        references = [d for d in self.devices if d.bus_index == slack_index and d.is_reference]
        if len(references) != 1:
            raise LinearizationError(
                "The slack bus must host exactly one grid-forming or infinite source"
            )
        self.reference = references[0]

        self.slices: List[slice] = []
        offset = 0
        for device in self.devices:
            self.slices.append(slice(offset, offset + device.n_states))
            offset += device.n_states
        self.n_states = offset

        self.x0, self.z0 = self._initialize(network, sol)

    @property
    def state_labels(self) -> List[str]:
        labels: List[str] = []
        for device in self.devices:
            labels.extend(device.state_labels)
        return labels

    def _device_current(self, sol: PowerFlowSolution, device: DeviceModel, V: np.ndarray) -> complex:
        """Machine-base current injected by a device at the operating point."""
        k = device.bus_index
        if isinstance(device, ConstantPowerInjection):
            return (device.power / V[k]).conjugate()
        s_gen = complex(sol.p_gen[k], sol.q_gen[k])
        return (s_gen / V[k]).conjugate() / device.scale

    def _initialize(self, network: NetworkModel, sol: PowerFlowSolution) -> Tuple[np.ndarray, np.ndarray]:
        V = sol.voltage
        ref = self.reference
        rotation = np.exp(-1j * ref.reference_angle(V[ref.bus_index], self._device_current(sol, ref, V)))
        V_rot = V * rotation

        x0 = np.zeros(self.n_states)
        for device, sl in zip(self.devices, self.slices):
            current = self._device_current(sol, device, V) * rotation
            x0[sl] = device.initialize(complex(V_rot[device.bus_index]), complex(current))

        z0 = np.concatenate([V_rot.real, V_rot.imag])
        return x0, z0

    def _device_terms(self, x, z):
        """Derivatives and bus current injections for generic numbers."""
        n = self.n_bus
        omega_ref = self.reference.frame_frequency(x[self.slices[self.devices.index(self.reference)]])
        f: List = []
        i_real: List = [0.0] * n
        i_imag: List = [0.0] * n
        for device, sl in zip(self.devices, self.slices):
            k = device.bus_index
            derivs, ir, ii = device.equations(x[sl], z[k], z[n + k], omega_ref)
            f.extend(derivs)
            i_real[k] = i_real[k] + device.scale * ir
            i_imag[k] = i_imag[k] + device.scale * ii
        return f, i_real + i_imag

    def residual(self, x: np.ndarray, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Evaluate f(x, z) and g(x, z) on plain floats."""
        f, currents = self._device_terms(list(x), list(z))
        f_val = np.array([value_of(v) for v in f])
        g_val = self.Y_real @ np.asarray(z) - np.array([value_of(c) for c in currents])
        return f_val, g_val

    def jacobians(
        self,
        x: Optional[np.ndarray] = None,
        z: Optional[np.ndarray] = None,
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Exact (f_x, f_z, g_x, g_z) at (x, z); defaults to the equilibrium."""
        x = self.x0 if x is None else x
        z = self.z0 if z is None else z
        nx, nz = self.n_states, len(z)
        seeds = Dual.variables(np.concatenate([x, z]))
        f, currents = self._device_terms(seeds[:nx], seeds[nx:])

        size = nx + nz
        df = np.array([gradient_of(v, size) for v in f]).reshape(nx, size)
        di = np.array([gradient_of(c, size) for c in currents]).reshape(nz, size)
        g_x = -di[:, :nx]
        g_z = self.Y_real - di[:, nx:]
        return df[:, :nx], df[:, nx:], g_x, g_z


def kron_reduce(f_x: np.ndarray, f_z: np.ndarray, g_x: np.ndarray, g_z: np.ndarray) -> np.ndarray:
    """Eliminate algebraic variables: A = f_x - f_z g_z^-1 g_x."""
    with warnings.catch_warnings():
        warnings.simplefilter('error', LinAlgWarning)
        try:
            factors = lu_factor(g_z)
        except (LinAlgWarning, ValueError, np.linalg.LinAlgError) as e:
            raise LinearizationError(f"Singular algebraic block: {e}") from e
    pivots = np.abs(np.diag(factors[0]))
    if pivots.min() <= 1e-13 * pivots.max():
        raise LinearizationError("Singular algebraic block (degenerate operating point)")
    return f_x - f_z @ lu_solve(factors, g_x)


def linearize(
    network: NetworkModel,
    sol: PowerFlowSolution,
    params: Optional[Dict[int, DynamicComponentParams]] = None,
) -> StateSpaceModel:
    """
    Linearize the network dynamics at a power-flow solution.

    Args:
        network: Network model (generator dynamic parameters attached)
        sol: Converged power-flow solution
        params: Optional parameter overrides keyed by generator bus id

    Returns:
        StateSpaceModel with the reduced state matrix
    """
    system = DynamicSystem(network, sol, params)
    f_x, f_z, g_x, g_z = system.jacobians()
    A = kron_reduce(f_x, f_z, g_x, g_z)
    if not np.all(np.isfinite(A)):
        raise LinearizationError("State matrix contains non-finite entries")
    logger.debug(f"Linearized {system.n_states} states at demand {sol.setpoints.demand_mw:.2f} MW")
    return StateSpaceModel(
        A=A, state_labels=system.state_labels, operating_point=sol, x0=system.x0, z0=system.z0,
    )
