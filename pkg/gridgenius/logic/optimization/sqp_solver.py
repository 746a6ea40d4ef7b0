"""
Sequential quadratic programming for inequality-constrained problems.

    minimize f(x)  subject to  c(x) <= 0

The problem is supplied as a callback returning the objective, its
gradient, the constraint values and Jacobian, and optionally a Hessian
guess (e.g. Gauss-Newton) used to seed the damped BFGS approximation.
Steps are globalized with an l1 merit function and Armijo backtracking.
"""

from dataclasses import dataclass, field
import logging
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_factor

from .qp_active_set import QPError, QPInfeasibleError, solve_qp

logger = logging.getLogger(__name__)


class OptimizationError(Exception):
    """Exception raised when an optimization problem cannot be solved."""
    pass


class ModelEvaluationError(OptimizationError):
    """Exception raised by a model callback that cannot evaluate a point."""
    pass


@dataclass
class ModelEvaluation:
    """Values of a smooth model at one point."""

    objective: float
    gradient: np.ndarray
    constraints: np.ndarray
    jacobian: np.ndarray
    hessian: Optional[np.ndarray] = None


ModelCallback = Callable[[np.ndarray], ModelEvaluation]


@dataclass
class SqpSettings:
    max_iter: int = 200
    kkt_tol: float = 1e-6
    armijo: float = 1e-4
    max_backtracks: int = 40
    curvature_damping: float = 0.2
    refresh_hessian: bool = False


@dataclass(frozen=True)
class KktResiduals:
    stationarity: float
    feasibility: float
    complementarity: float

    @property
    def max(self) -> float:
        return max(self.stationarity, self.feasibility, self.complementarity)


@dataclass
class SqpResult:
    """Final point, multipliers and convergence record."""

    x: np.ndarray
    evaluation: ModelEvaluation
    multipliers: np.ndarray
    iterations: int
    converged: bool
    kkt: KktResiduals
    message: str = ''
    history: List[Tuple[int, float, float, float]] = field(default_factory=list)


def kkt_residuals(evaluation: ModelEvaluation, multipliers: np.ndarray) -> KktResiduals:
    """Stationarity, primal feasibility and complementarity residuals (inf-norms)."""
    c = evaluation.constraints
    stationarity = evaluation.gradient + evaluation.jacobian.T @ multipliers
    return KktResiduals(
        stationarity=float(np.max(np.abs(stationarity))) if stationarity.size else 0.0,
        feasibility=float(np.max(np.maximum(c, 0.0))) if c.size else 0.0,
        complementarity=float(np.max(np.abs(multipliers * c))) if c.size else 0.0,
    )


def damped_bfgs(B: np.ndarray, s: np.ndarray, y: np.ndarray, damping: float = 0.2) -> np.ndarray:
    """Powell-damped BFGS update of a Hessian approximation."""
    Bs = B @ s
    sBs = float(s @ Bs)
    sy = float(s @ y)
    if sBs <= 1e-14 or np.linalg.norm(s) <= 1e-14:
        return B
    theta = 1.0 if sy >= damping * sBs else (1.0 - damping) * sBs / (sBs - sy)
    r = theta * y + (1.0 - theta) * Bs
    sr = float(s @ r)
    if sr <= 1e-14:
        return B
    B_next = B - np.outer(Bs, Bs) / sBs + np.outer(r, r) / sr
    return 0.5 * (B_next + B_next.T)


def _positive_definite(B: np.ndarray) -> np.ndarray:
    B = 0.5 * (B + B.T)
    shift = 0.0
    scale = max(1e-8, float(np.max(np.abs(np.diag(B)))) * 1e-8) if B.size else 1e-8
    for _ in range(30):
        try:
            cho_factor(B + shift * np.eye(len(B)))
            return B + shift * np.eye(len(B))
        except LinAlgError:
            shift = scale if shift == 0.0 else shift * 10.0
    raise OptimizationError("Could not regularize the Hessian approximation")


def _merit(evaluation: ModelEvaluation, penalty: float) -> float:
    return evaluation.objective + penalty * float(np.sum(np.maximum(evaluation.constraints, 0.0)))


def solve_sqp(
    model: ModelCallback,
    x0: np.ndarray,
    settings: Optional[SqpSettings] = None,
) -> SqpResult:
    """
    Minimize a smooth model from a starting point.

    Args:
        model: Callback evaluating objective, gradient and constraints
        x0: Starting point
        settings: Iteration limits and tolerances

    Returns:
        SqpResult; ``converged`` is True only when every KKT residual is
        within ``kkt_tol``

    Raises:
        OptimizationError: Infeasible subproblem or model failure at x0
    """
    settings = settings or SqpSettings()
    x = np.asarray(x0, dtype=float).copy()
    evaluation = model(x)
    B = _positive_definite(evaluation.hessian if evaluation.hessian is not None else np.eye(len(x)))
    multipliers = np.zeros(len(evaluation.constraints))
    penalty = 0.0
    history: List[Tuple[int, float, float, float]] = []

    for iteration in range(1, settings.max_iter + 1):
        c, J, g = evaluation.constraints, evaluation.jacobian, evaluation.gradient
        try:
            qp = solve_qp(B, g, J, -c, x0=np.zeros(len(x)))
        except QPInfeasibleError as e:
            raise OptimizationError(
                f"Infeasible QP subproblem at iteration {iteration} (rows {e.violated_rows})"
            ) from e
        except QPError as e:
            raise OptimizationError(f"QP subproblem failed at iteration {iteration}: {e}") from e

        p = qp.x
        multipliers = qp.multipliers
        kkt = kkt_residuals(evaluation, multipliers)
        violation = float(np.sum(np.maximum(c, 0.0)))
        history.append((iteration, evaluation.objective, violation, float(np.linalg.norm(p, np.inf))))
        logger.debug(
            f"SQP iteration {iteration}: f = {evaluation.objective:.8g}, "
            f"violation = {violation:.2e}, KKT = {kkt.max:.2e}"
        )
        if kkt.max <= settings.kkt_tol:
            return SqpResult(
                x=x, evaluation=evaluation, multipliers=multipliers, iterations=iteration,
                converged=True, kkt=kkt, message='KKT tolerance reached', history=history,
            )

        if multipliers.size:
            needed = float(np.max(multipliers))
            if penalty < needed * 1.1:
                penalty = needed * 2.0 + 1e-6

        merit0 = _merit(evaluation, penalty)
        slope = float(g @ p) - penalty * violation
        step = 1.0
        accepted = None
        for _ in range(settings.max_backtracks):
            trial = x + step * p
            try:
                trial_eval = model(trial)
            except ModelEvaluationError as e:
                logger.debug(f"Trial point rejected: {e}")
                step *= 0.5
                continue
            if _merit(trial_eval, penalty) <= merit0 + settings.armijo * step * min(slope, 0.0):
                accepted = (trial, trial_eval)
                break
            step *= 0.5

        if accepted is None:
            logger.warning(f"SQP line search failed at iteration {iteration}")
            return SqpResult(
                x=x, evaluation=evaluation, multipliers=multipliers, iterations=iteration,
                converged=False, kkt=kkt, message='line search failed', history=history,
            )

        x_new, eval_new = accepted
        grad_lag_old = g + J.T @ multipliers
        grad_lag_new = eval_new.gradient + eval_new.jacobian.T @ multipliers
        B = damped_bfgs(B, x_new - x, grad_lag_new - grad_lag_old, settings.curvature_damping)
        if settings.refresh_hessian and eval_new.hessian is not None:
            B = _positive_definite(eval_new.hessian)
        x, evaluation = x_new, eval_new

    kkt = kkt_residuals(evaluation, multipliers)
    logger.warning(f"SQP did not converge in {settings.max_iter} iterations (KKT {kkt.max:.2e})")
    return SqpResult(
        x=x, evaluation=evaluation, multipliers=multipliers, iterations=settings.max_iter,
        converged=False, kkt=kkt, message='iteration limit reached', history=history,
    )
