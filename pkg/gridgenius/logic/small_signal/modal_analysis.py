"""
Modal analysis and the damping index.

This module provides eigenvalue analysis of a state matrix, the
critical-eigenvalue filter and the damping index DI = 1 - min(xi) over the
critical set, plus the composed operating-point evaluation used to label
datasets and validate controller results.
"""

from dataclasses import dataclass, field
import logging
import math
from typing import Dict, List, Optional, Tuple, Union

import numpy as np
from scipy.linalg import eigvals

from ..models.base_models import ValidationResult
from ..models.dynamic_params import DynamicComponentParams
from ..models.network_models import NetworkModel
from ..power_flow.newton_solver import PowerFlowError, PowerFlowSolution, SetpointVector, solve
from .linearizer import StateSpaceModel, linearize

logger = logging.getLogger(__name__)


class ModalAnalysisError(Exception):
    """Exception raised for invalid state matrices or filter settings."""
    pass


@dataclass(frozen=True)
class CriticalFilter:
    """
    Selection rule for critical eigenvalues.

    Eigenvalues with real part below ``re_min`` are considered well damped
    fast modes; real eigenvalues are excluded when ``require_complex``.
    """

    re_min: float = -50.0
    require_complex: bool = True
    freq_band_hz: Optional[Tuple[float, float]] = None
    imag_tol: float = 1e-9

    def validate(self) -> ValidationResult:
        result = ValidationResult(is_valid=True)
        if self.re_min >= 0:
            result.add_error(f"re_min must be negative, got {self.re_min}")
        if self.freq_band_hz is not None:
            lo, hi = self.freq_band_hz
            if not 0 <= lo < hi:
                result.add_error(f"Invalid frequency band: {self.freq_band_hz}")
        return result

    def select(self, eigenvalues: np.ndarray) -> np.ndarray:
        mask = eigenvalues.real >= self.re_min
        if self.require_complex:
            mask &= np.abs(eigenvalues.imag) > self.imag_tol
        if self.freq_band_hz is not None:
            lo, hi = self.freq_band_hz
            freq = np.abs(eigenvalues.imag) / (2.0 * math.pi)
            mask &= (freq >= lo) & (freq <= hi)
        return np.flatnonzero(mask)


@dataclass
class ModalResult:
    """Eigenvalues, damping ratios and the damping index."""

    eigenvalues: np.ndarray
    damping_ratios: np.ndarray
    critical_set: np.ndarray
    di: float
    empty_critical_set: bool = False
    warnings: List[str] = field(default_factory=list)

    @property
    def stable(self) -> bool:
        return self.di < 1.0

    @property
    def critical_eigenvalues(self) -> np.ndarray:
        return self.eigenvalues[self.critical_set]

    @property
    def frequencies_hz(self) -> np.ndarray:
        return np.abs(self.eigenvalues.imag) / (2.0 * math.pi)

    def is_critical(self) -> np.ndarray:
        flags = np.zeros(len(self.eigenvalues), dtype=bool)
        flags[self.critical_set] = True
        return flags


def damping_ratios(eigenvalues: np.ndarray) -> np.ndarray:
    """xi = -Re(lambda) / |lambda| (0 for a zero eigenvalue)."""
    magnitude = np.abs(eigenvalues)
    return np.divide(
        -eigenvalues.real, magnitude, out=np.zeros(len(eigenvalues)), where=magnitude > 0
    )


def modal(
    model: Union[StateSpaceModel, np.ndarray],
    critical_filter: Optional[CriticalFilter] = None,
) -> ModalResult:
    """
    Eigen-analysis of a state matrix.

    Args:
        model: StateSpaceModel or a square real matrix
        critical_filter: Critical-eigenvalue rule (defaults apply when omitted)

    Returns:
        ModalResult; an empty critical set yields DI = 0 with a warning flag
    """
    critical_filter = critical_filter or CriticalFilter()
    A = model.A if isinstance(model, StateSpaceModel) else np.asarray(model, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ModalAnalysisError(f"State matrix must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ModalAnalysisError("State matrix contains non-finite entries")

    eigenvalues = eigvals(A) if A.size else np.zeros(0, dtype=complex)
    xi = damping_ratios(eigenvalues)
    critical = critical_filter.select(eigenvalues)

    if critical.size == 0:
        message = "Empty critical set; damping index set to 0"
        logger.warning(message)
        return ModalResult(
            eigenvalues=eigenvalues, damping_ratios=xi, critical_set=critical,
            di=0.0, empty_critical_set=True, warnings=[message],
        )

    di = 1.0 - float(np.min(xi[critical]))
    return ModalResult(eigenvalues=eigenvalues, damping_ratios=xi, critical_set=critical, di=di)


@dataclass
class StabilityEvaluation:
    """Power flow, linear model and modal result of one operating point."""

    solution: PowerFlowSolution
    model: StateSpaceModel
    result: ModalResult

    @property
    def di(self) -> float:
        return self.result.di


def evaluate_stability(
    network: NetworkModel,
    setpoints: SetpointVector,
    critical_filter: Optional[CriticalFilter] = None,
    params: Optional[Dict[int, DynamicComponentParams]] = None,
    sol: Optional[PowerFlowSolution] = None,
) -> StabilityEvaluation:
    """
    Solve, linearize and analyse one operating point.

    Raises:
        PowerFlowError: If the power flow does not converge
    """
    if sol is None:
        sol = solve(network, setpoints)
    if not sol.converged:
        raise PowerFlowError(
            f"Power flow did not converge at demand {setpoints.demand_mw:.2f} MW"
        )
    model = linearize(network, sol, params)
    return StabilityEvaluation(solution=sol, model=model, result=modal(model, critical_filter))


def damping_index(
    network: NetworkModel,
    setpoints: SetpointVector,
    critical_filter: Optional[CriticalFilter] = None,
    params: Optional[Dict[int, DynamicComponentParams]] = None,
) -> float:
    """Damping index of an operating point (solve -> linearize -> modal)."""
    return evaluate_stability(network, setpoints, critical_filter, params).di
