"""
Network operations: demand scaling, admittance matrix and operating limits.

This module provides the numeric views of a NetworkModel used by the
power-flow solver, the linearizer and the controllers.
"""

from dataclasses import dataclass
import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..models.network_models import NetworkDataError, NetworkModel, QuantityLabel

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LoadPoint:
    """Nominal power drawn at one load bus (before impedance conversion)."""

    bus: int
    p_mw: float
    q_mvar: float


@dataclass(frozen=True)
class ConstraintSet:
    """Box limits in the linear form A u <= b and C y <= d."""

    A: np.ndarray
    b: np.ndarray
    C: np.ndarray
    d: np.ndarray
    u_bounds: Tuple[np.ndarray, np.ndarray]
    y_bounds: Tuple[np.ndarray, np.ndarray]


def scale_demand(network: NetworkModel, total_mw: float) -> List[LoadPoint]:
    """
    Split a total nominal demand across the loads.

    Args:
        network: Network model
        total_mw: Total nominal active demand in MW

    Returns:
        One LoadPoint per load, in fixture order
    """
    if total_mw < 0:
        raise NetworkDataError(f"Total demand cannot be negative: {total_mw}")

    lo, hi = network.demand_range
    if hi > 0 and not lo <= total_mw <= hi:
        logger.warning(f"Demand {total_mw:.2f} MW outside nominal range [{lo}, {hi}] MW")

    points = []
    for load in network.loads:
        p = load.participation * total_mw
        q = p * math.tan(math.acos(load.power_factor))
        points.append(LoadPoint(bus=load.bus, p_mw=p, q_mvar=q))
    return points


def load_admittances(network: NetworkModel, total_mw: float) -> np.ndarray:
    """
    Constant-impedance load shunts, one entry per bus (system-base p.u.).

    Nominal powers are converted at 1.0 p.u. voltage: y = (P - jQ) / S_base.
    """
    y_load = np.zeros(network.n_bus, dtype=complex)
    for point in scale_demand(network, total_mw):
        idx = network.bus_index(point.bus)
        y_load[idx] += (point.p_mw - 1j * point.q_mvar) / network.system_mva_base
    return y_load


def admittance_matrix(network: NetworkModel, demand_mw: Optional[float] = None) -> np.ndarray:
    """
    Build the bus admittance matrix from pi-model branches.

    Args:
        network: Network model
        demand_mw: When given, loads enter as constant-impedance shunts

    Returns:
        Dense complex n x n matrix
    """
    n = network.n_bus
    Y = np.zeros((n, n), dtype=complex)

    for branch in network.branches:
        z = complex(branch.r, branch.x)
        if z == 0:
            raise NetworkDataError(
                f"Zero-impedance branch {branch.from_bus}-{branch.to_bus}"
            )
        f = network.bus_index(branch.from_bus)
        t = network.bus_index(branch.to_bus)
        y_series = 1.0 / z
        y_half = 0.5j * branch.b_shunt
        tap = branch.tap

        Y[f, f] += (y_series + y_half) / tap ** 2
        Y[t, t] += y_series + y_half
        Y[f, t] -= y_series / tap
        Y[t, f] -= y_series / tap

    if demand_mw is not None:
        Y[np.diag_indices(n)] += load_admittances(network, demand_mw)

    return Y


def label_limits(network: NetworkModel, label: QuantityLabel) -> Tuple[float, float]:
    """Engineering limits of a labelled quantity (machine base for powers)."""
    if label.quantity == 'V':
        bus = network.buses[network.bus_index(label.bus)]
        return bus.v_min, bus.v_max
    if label.quantity == 'P':
        gen = network.generator_by_label(label)
        return gen.p_min_frac, gen.p_max_frac
    return -math.inf, math.inf


def _box(lower: np.ndarray, upper: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Stack finite box limits as M x <= r."""
    n = len(lower)
    eye = np.eye(n)
    rows = []
    rhs = []
    for i in range(n):
        if np.isfinite(upper[i]):
            rows.append(eye[i])
            rhs.append(upper[i])
    for i in range(n):
        if np.isfinite(lower[i]):
            rows.append(-eye[i])
            rhs.append(-lower[i])
    if not rows:
        return np.zeros((0, n)), np.zeros(0)
    return np.array(rows), np.array(rhs)


def build_constraints(
    network: NetworkModel,
    voltage_caps: Optional[Dict[int, float]] = None,
) -> ConstraintSet:
    """
    Build input and output box constraints from operating limits.

    Args:
        network: Network model with control and output labels
        voltage_caps: Optional tighter upper voltage limits per bus id

    Returns:
        ConstraintSet with (A, b) on u and (C, d) on y
    """
    caps = voltage_caps or {}

    def bounds(labels: Sequence[QuantityLabel]) -> Tuple[np.ndarray, np.ndarray]:
        lower = np.empty(len(labels))
        upper = np.empty(len(labels))
        for i, label in enumerate(labels):
            lo, hi = label_limits(network, label)
            if label.quantity == 'V' and label.bus in caps:
                hi = min(hi, caps[label.bus])
            lower[i], upper[i] = lo, hi
        return lower, upper

    u_lo, u_hi = bounds(network.control_labels())
    y_lo, y_hi = bounds(network.output_labels())
    A, b = _box(u_lo, u_hi)
    C, d = _box(y_lo, y_hi)
    return ConstraintSet(A=A, b=b, C=C, d=d, u_bounds=(u_lo, u_hi), y_bounds=(y_lo, y_hi))
