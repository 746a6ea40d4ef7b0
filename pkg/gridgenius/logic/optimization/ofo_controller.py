"""
Online feedback optimization controller.

This module provides the fixed-step projected-gradient controller
u+ = u + alpha * d, where d is the projection of the scaled steepest
descent direction -gamma G^-1 F' grad(phi) onto the linearized feasible
set, computed by a small active-set QP in the metric G. An optional
stability surrogate adds one linearized row keeping the predicted
damping index below the threshold.
"""

from dataclasses import dataclass, field, replace
import logging
import math
from typing import List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..grid.network_ops import ConstraintSet, build_constraints
from ..models.base_models import BaseModel, ValidationResult
from ..models.network_models import NetworkModel
from ..regression.mars_model import MarsModel, MarsModelError
from .objective import QuadraticObjective
from .qp_active_set import QPError, QPInfeasibleError, QPResult, solve_qp

logger = logging.getLogger(__name__)

DEFAULT_THETA = 1.0 - 1e-5
DEFAULT_EPSILON_MARGIN = 1e-6
SLACK_PENALTY = 1e6


class ControllerError(Exception):
    """Exception raised for controller configuration or projection failures."""
    pass


@dataclass
class OfoConfig(BaseModel):
    """Step size, scaling, metric and stopping rule of the controller."""

    alpha: float = 0.05
    gamma: float = 100.0
    metric: Tuple[float, ...] = (1.0, 1.0, 0.1, 0.1, 0.1)
    theta: float = DEFAULT_THETA
    epsilon_margin: float = DEFAULT_EPSILON_MARGIN
    convergence_tol: float = 1e-5
    max_iter: int = 1000
    slack_penalty: float = SLACK_PENALTY

    def validate(self) -> ValidationResult:
        result = ValidationResult(is_valid=True)
        if not self.alpha > 0:
            result.add_error(f"alpha must be positive, got {self.alpha}")
        if not self.gamma > 0:
            result.add_error(f"gamma must be positive, got {self.gamma}")
        if not self.metric or any(not g > 0 for g in self.metric):
            result.add_error("metric (diagonal of G) entries must be positive")
        if self.theta > 1:
            result.add_error(f"theta cannot exceed 1, got {self.theta}")
        if self.epsilon_margin < 0:
            result.add_error("epsilon_margin cannot be negative")
        if not self.convergence_tol > 0:
            result.add_error("convergence_tol must be positive")
        if self.max_iter < 1:
            result.add_error("max_iter must be at least 1")
        return result

    @property
    def G(self) -> np.ndarray:
        return np.diag(np.asarray(self.metric, dtype=float))


class SurrogateInputs:
    """
    Maps surrogate feature names onto controller quantities.

    ``V<b>`` and ``Pg<b>``/``Qg<b>`` resolve to an output or control (powers
    converted to system base); ``Pl<b>``/``Ql<b>`` are exogenous and are
    read from the disturbance mapping ``w`` with zero sensitivity.
    """

    def __init__(self, network: NetworkModel, feature_names: Sequence[str]):
        self.feature_names = tuple(feature_names)
        self.n_u = len(network.controls)
        self._sources: List[Tuple[str, int, float]] = []
        for name in self.feature_names:
            self._sources.append(_feature_source(network, name))

    def values(self, u: np.ndarray, y: np.ndarray, w: Optional[Mapping[str, float]] = None) -> np.ndarray:
        out = np.empty(len(self._sources))
        for k, (source, index, scale) in enumerate(self._sources):
            if source == 'u':
                out[k] = u[index] * scale
            elif source == 'y':
                out[k] = y[index] * scale
            else:
                name = self.feature_names[k]
                if w is None or name not in w:
                    raise ControllerError(f"Surrogate input {name} needs a disturbance value")
                out[k] = w[name]
        return out

    def jacobian(self, grad: np.ndarray) -> np.ndarray:
        """d(features)/du given dy/du."""
        J = np.zeros((len(self._sources), self.n_u))
        for k, (source, index, scale) in enumerate(self._sources):
            if source == 'u':
                J[k, index] = scale
            elif source == 'y':
                J[k] = grad[index] * scale
        return J


def _feature_source(network: NetworkModel, name: str) -> Tuple[str, int, float]:
    outputs, controls = list(network.outputs), list(network.controls)

    def locate(label: str, scale: float) -> Tuple[str, int, float]:
        if label in outputs:
            return 'y', outputs.index(label), scale
        if label in controls:
            return 'u', controls.index(label), scale
        raise MarsModelError(f"Surrogate feature {name} ({label}) is neither measured nor controlled")

    if name.startswith('V') and name[1:].isdigit():
        return locate(name, 1.0)
    if name[:2] in ('Pg', 'Qg') and name[2:].isdigit():
        gen = network.generator_at(int(name[2:]))
        if gen is None:
            raise MarsModelError(f"Surrogate feature {name} refers to a bus without a generator")
        return locate(f"{name[0]}_{gen.label}", network.machine_scale(gen))
    if name[:2] in ('Pl', 'Ql') and name[2:].isdigit():
        return 'w', -1, 0.0
    raise MarsModelError(f"Surrogate feature {name} cannot be mapped to a controller quantity")


def observable_features(network: NetworkModel, names: Sequence[str]) -> List[str]:
    """Subset of dataset feature names the controller can evaluate without disturbances."""
    kept = []
    for name in names:
        try:
            source = _feature_source(network, name)[0]
        except MarsModelError:
            continue
        if source != 'w':
            kept.append(name)
    return kept


@dataclass
class StabilityRow:
    """Linearized surrogate constraint  a' delta <= rhs."""

    coefficients: np.ndarray
    rhs: float
    g_value: float
    gradient_u: np.ndarray
    extrapolating: bool = False


def augment(
    config: OfoConfig,
    model: MarsModel,
    inputs: SurrogateInputs,
    u: np.ndarray,
    y: np.ndarray,
    grad: np.ndarray,
    w: Optional[Mapping[str, float]] = None,
) -> StabilityRow:
    """
    Linearize theta - eps - g(u, y, w) - alpha (dg/du + dg/dy dy/du) delta >= 0.

    Args:
        config: Controller settings (alpha, theta, margin)
        model: Stability surrogate
        inputs: Feature mapping of the surrogate
        u, y: Current controls and measured outputs
        grad: dy/du at the current point
        w: Disturbance values for exogenous surrogate inputs

    Returns:
        StabilityRow in the form a' delta <= rhs
    """
    x = inputs.values(u, y, w)
    g_value, extrapolating = model.predict_with_flag(x)
    gradient_u = model.gradient(x) @ inputs.jacobian(grad)
    return StabilityRow(
        coefficients=config.alpha * gradient_u,
        rhs=(config.theta - config.epsilon_margin) - g_value,
        g_value=g_value,
        gradient_u=gradient_u,
        extrapolating=extrapolating,
    )


@dataclass
class DirectionResult:
    """Projected direction with the QP bookkeeping needed for KKT checks."""

    delta: np.ndarray
    delta0: np.ndarray
    rows: np.ndarray
    rhs: np.ndarray
    row_labels: List[str]
    multipliers: np.ndarray
    active: List[int]
    fallback: bool = False
    slack: float = 0.0
    qp: Optional[QPResult] = None
    grad_phi: Optional[np.ndarray] = None


def constraint_rows(
    config: OfoConfig,
    u: np.ndarray,
    y: np.ndarray,
    grad: np.ndarray,
    constraints: ConstraintSet,
    stability: Optional[StabilityRow] = None,
) -> Tuple[np.ndarray, np.ndarray, List[str], int]:
    """
    Stack the linearized constraint rows M delta <= r.

    Returns:
        (M, r, row labels, number of input rows)
    """
    a = config.alpha
    M_u = a * constraints.A
    r_u = constraints.b - constraints.A @ u
    M_y = a * constraints.C @ grad
    r_y = constraints.d - constraints.C @ y
    labels = [f"input[{i}]" for i in range(len(r_u))] + [f"output[{i}]" for i in range(len(r_y))]
    rows = [M_u, M_y]
    rhs = [r_u, r_y]
    if stability is not None:
        rows.append(stability.coefficients.reshape(1, -1))
        rhs.append(np.array([stability.rhs]))
        labels.append('stability')
    return np.vstack(rows), np.concatenate(rhs), labels, len(r_u)


def direction(
    u: np.ndarray,
    y: np.ndarray,
    F: np.ndarray,
    grad_phi: np.ndarray,
    config: OfoConfig,
    constraints: ConstraintSet,
    stability: Optional[StabilityRow] = None,
) -> DirectionResult:
    """
    Projected descent direction.

    Args:
        u: Current controls
        y: Measured outputs
        F: Stacked sensitivity [I; dy/du]
        grad_phi: Objective gradient in [u; y] order
        config: Controller settings
        constraints: Box constraints on u and y
        stability: Optional linearized surrogate row

    Returns:
        DirectionResult; ``fallback`` marks a slack-relaxed projection

    Raises:
        ControllerError: Inconsistent dimensions, non-PD metric or infeasible input box
    """
    n_u = len(u)
    if F.shape != (n_u + len(y), n_u) or len(grad_phi) != F.shape[0]:
        raise ControllerError(f"Sensitivity shape {F.shape} inconsistent with {n_u} controls, {len(y)} outputs")
    if len(config.metric) != n_u:
        raise ControllerError(f"Metric has {len(config.metric)} entries for {n_u} controls")
    grad = F[n_u:]
    G = config.G
    delta0 = -config.gamma * (F.T @ grad_phi) / np.asarray(config.metric, dtype=float)
    M, r, labels, n_input = constraint_rows(config, u, y, grad, constraints, stability)

    try:
        qp = solve_qp(G, -G @ delta0, M, r, x0=np.zeros(n_u))
        return DirectionResult(
            delta=qp.x, delta0=delta0, rows=M, rhs=r, row_labels=labels,
            multipliers=qp.multipliers, active=qp.active, qp=qp, grad_phi=grad_phi,
        )
    except QPInfeasibleError as e:
        violated = [labels[i] for i in e.violated_rows if i < len(labels)]
        logger.warning(f"Projection infeasible (rows {violated}); relaxing output rows with a slack")
    except QPError as e:
        raise ControllerError(f"Projection failed: {e}") from e

    result = _slack_direction(G, delta0, M, r, labels, n_input, config.slack_penalty)
    result.grad_phi = grad_phi
    return result


def _slack_direction(
    G: np.ndarray,
    delta0: np.ndarray,
    M: np.ndarray,
    r: np.ndarray,
    labels: List[str],
    n_input: int,
    penalty: float,
) -> DirectionResult:
    n_u = len(delta0)
    H = np.zeros((n_u + 1, n_u + 1))
    H[:n_u, :n_u] = G
    H[n_u, n_u] = 1.0
    c = np.concatenate([-G @ delta0, [penalty]])
    soft = np.zeros((len(r), 1))
    soft[n_input:] = -1.0
    M_s = np.vstack([np.hstack([M, soft]), np.concatenate([np.zeros(n_u), [-1.0]])])
    r_s = np.concatenate([r, [0.0]])
    try:
        qp = solve_qp(H, c, M_s, r_s)
    except QPInfeasibleError as e:
        violated = [labels[i] for i in e.violated_rows if i < len(labels)]
        raise ControllerError(f"Input constraints cannot be met; violated rows {violated}") from e
    except QPError as e:
        raise ControllerError(f"Relaxed projection failed: {e}") from e

    slack = float(qp.x[n_u])
    logger.warning(f"Slack fallback used (slack {slack:.3e})")
    return DirectionResult(
        delta=qp.x[:n_u], delta0=delta0, rows=M, rhs=r, row_labels=labels,
        multipliers=qp.multipliers[:len(r)], active=[i for i in qp.active if i < len(r)],
        fallback=True, slack=slack, qp=qp,
    )


def kkt_residual(config: OfoConfig, F: np.ndarray, result: DirectionResult) -> float:
    """
    First-order optimality residual of the steady-state problem.

    Uses the QP multipliers scaled by alpha as multiplier estimates and
    returns the largest of the stationarity, primal infeasibility and
    complementarity residuals.
    """
    mu = config.alpha * result.multipliers
    # problem rows in u-space are the QP rows divided by alpha
    rows_u = result.rows / config.alpha
    stationarity = config.gamma * (F.T @ result.grad_phi) + rows_u.T @ mu
    infeasibility = np.maximum(-result.rhs, 0.0)
    complementarity = mu * np.maximum(result.rhs, 0.0)
    values = [np.max(np.abs(stationarity))]
    if len(result.rhs):
        values += [float(np.max(infeasibility)), float(np.max(np.abs(complementarity)))]
    return float(max(values))


@dataclass(frozen=True)
class TrajectoryEntry:
    """Controller log entry for one iteration (values before the step)."""

    iteration: int
    u: Tuple[float, ...]
    y: Tuple[float, ...]
    phi: float
    g_hat: float
    direction_norm: float
    fallback: bool


@dataclass
class ControllerState:
    """Current controls plus the append-only trajectory."""

    u: np.ndarray
    iteration: int = 0
    last_direction_norm: float = math.inf
    last_result: Optional[DirectionResult] = None
    trajectory: Tuple[TrajectoryEntry, ...] = field(default_factory=tuple)


class OfoController:
    """
    Projected-gradient controller bound to one network and objective.

    The caller closes the loop: solve the plant at ``state.u``, measure y,
    compute the sensitivity, then call ``step``.
    """

    def __init__(
        self,
        network: NetworkModel,
        objective: QuadraticObjective,
        config: OfoConfig,
        constraints: Optional[ConstraintSet] = None,
        stability_model: Optional[MarsModel] = None,
    ):
        validation = config.validate()
        if not validation.is_valid:
            raise ControllerError("; ".join(validation.errors))
        if len(config.metric) != len(network.controls):
            raise ControllerError(
                f"Metric has {len(config.metric)} entries for {len(network.controls)} controls"
            )
        self.network = network
        self.objective = objective
        self.config = config
        self.constraints = constraints or build_constraints(network)
        self.stability_model = stability_model
        self.inputs = (SurrogateInputs(network, stability_model.feature_names)
                       if stability_model is not None else None)

    def initial_state(self, u0: Sequence[float]) -> ControllerState:
        return ControllerState(u=np.asarray(u0, dtype=float).copy())

    def predicted_di(self, u: np.ndarray, y: np.ndarray, w: Optional[Mapping[str, float]] = None) -> float:
        if self.stability_model is None:
            return math.nan
        return float(self.stability_model.predict(self.inputs.values(u, y, w)))

    def compute_direction(
        self,
        u: np.ndarray,
        y: np.ndarray,
        F: np.ndarray,
        w: Optional[Mapping[str, float]] = None,
    ) -> DirectionResult:
        grad_phi = self.objective.stacked_gradient(u, y)
        stability = None
        if self.stability_model is not None:
            stability = augment(self.config, self.stability_model, self.inputs, u, y,
                                F[len(u):], w)
            if stability.extrapolating:
                logger.debug("Stability surrogate evaluated outside its training ranges")
        return direction(u, y, F, grad_phi, self.config, self.constraints, stability)

    def step(
        self,
        state: ControllerState,
        y: np.ndarray,
        F: np.ndarray,
        w: Optional[Mapping[str, float]] = None,
    ) -> ControllerState:
        """
        One controller update u+ = u + alpha * delta.

        Returns:
            New state with the iteration counter advanced and the trajectory extended
        """
        u = state.u
        result = self.compute_direction(u, y, F, w)
        norm = float(math.sqrt(result.delta @ self.config.G @ result.delta))
        entry = TrajectoryEntry(
            iteration=state.iteration,
            u=tuple(float(v) for v in u),
            y=tuple(float(v) for v in y),
            phi=self.objective.value(u, y),
            g_hat=self.predicted_di(u, y, w),
            direction_norm=norm,
            fallback=result.fallback,
        )
        logger.debug(f"OFO iteration {state.iteration}: |d|_G = {norm:.3e}, phi = {entry.phi:.6f}")
        return replace(
            state,
            u=u + self.config.alpha * result.delta,
            iteration=state.iteration + 1,
            last_direction_norm=norm,
            last_result=result,
            trajectory=state.trajectory + (entry,),
        )

    def has_converged(self, state: ControllerState) -> bool:
        """True once a step has been taken and |delta|_G is within tolerance."""
        return state.iteration >= 1 and state.last_direction_norm <= self.config.convergence_tol

    def kkt_residual(self, state: ControllerState, F: np.ndarray) -> float:
        """KKT residual at the last projected point; F must be the sensitivity used there."""
        if state.last_result is None:
            raise ControllerError("No projection computed yet")
        return kkt_residual(self.config, F, state.last_result)
