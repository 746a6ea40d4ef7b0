"""
Dense primal active-set solver for small convex quadratic programs.

    minimize    1/2 x' H x + c' x
    subject to  M x <= r

H must be symmetric positive definite. Each working-set subproblem is
solved through the Schur complement of a Cholesky factorization of H.
When no feasible starting point is supplied, one is found with a
phase-one linear program.
"""

from dataclasses import dataclass, field
import logging
from typing import List, Optional, Set

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.optimize import linprog

logger = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-9
DEFAULT_MAX_ITER = 200


class QPError(Exception):
    """Exception raised for ill-posed quadratic programs (e.g. non-PD Hessian)."""
    pass


class QPInfeasibleError(QPError):
    """Exception raised when the constraint set is empty."""

    def __init__(self, message: str, violated_rows: Optional[List[int]] = None):
        super().__init__(message)
        self.violated_rows = violated_rows or []


@dataclass
class QPResult:
    """Minimizer, final working set and constraint multipliers."""

    x: np.ndarray
    active: List[int]
    multipliers: np.ndarray
    iterations: int
    objective: float
    warnings: List[str] = field(default_factory=list)


def qp_objective(H: np.ndarray, c: np.ndarray, x: np.ndarray) -> float:
    return float(0.5 * x @ H @ x + c @ x)


def phase_one(M: np.ndarray, r: np.ndarray, tol: float = FEASIBILITY_TOL) -> np.ndarray:
    """
    Find a point with M x <= r.

    Solves min s subject to M x - s <= r, s >= 0.

    Raises:
        QPInfeasibleError: If no such point exists (violated rows attached)
    """
    m, n = M.shape
    cost = np.zeros(n + 1)
    cost[-1] = 1.0
    A_ub = np.hstack([M, -np.ones((m, 1))])
    bounds = [(None, None)] * n + [(0.0, None)]
    lp = linprog(cost, A_ub=A_ub, b_ub=r, bounds=bounds, method='highs')
    if lp.status not in (0,):
        raise QPError(f"Phase-one program failed: {lp.message}")
    x = lp.x[:n]
    scale = 1.0 + np.abs(r)
    violated = np.flatnonzero(M @ x - r > tol * scale)
    if lp.x[-1] > tol * scale.max() or violated.size:
        raise QPInfeasibleError(
            f"Constraints are infeasible (max violation {lp.x[-1]:.3e})",
            violated_rows=[int(i) for i in violated],
        )
    return x


def solve_qp(
    H: np.ndarray,
    c: np.ndarray,
    M: Optional[np.ndarray] = None,
    r: Optional[np.ndarray] = None,
    x0: Optional[np.ndarray] = None,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = FEASIBILITY_TOL,
) -> QPResult:
    """
    Solve a convex inequality-constrained QP.

    Args:
        H: Symmetric positive-definite Hessian (n x n)
        c: Linear term (n)
        M: Constraint matrix (m x n); None for an unconstrained problem
        r: Constraint right-hand side (m)
        x0: Feasible starting point; computed by phase one when omitted or infeasible
        max_iter: Working-set iteration limit
        tol: Feasibility and multiplier-sign tolerance

    Returns:
        QPResult with multipliers of every row (zero for inactive rows)

    Raises:
        QPError: Non-PD Hessian, inconsistent shapes or iteration limit
        QPInfeasibleError: Empty feasible set
    """
    H = np.asarray(H, dtype=float)
    c = np.asarray(c, dtype=float)
    n = len(c)
    if H.shape != (n, n):
        raise QPError(f"Hessian shape {H.shape} does not match {n} variables")
    if not np.allclose(H, H.T, rtol=1e-10, atol=1e-12):
        raise QPError("Hessian is not symmetric")
    try:
        factor = cho_factor(H)
    except LinAlgError as e:
        raise QPError(f"Hessian is not positive definite: {e}") from e

    M = np.zeros((0, n)) if M is None else np.asarray(M, dtype=float).reshape(-1, n)
    r = np.zeros(0) if r is None else np.asarray(r, dtype=float).ravel()
    if len(r) != M.shape[0]:
        raise QPError(f"{M.shape[0]} constraint rows but {len(r)} right-hand sides")
    m = M.shape[0]
    scale = 1.0 + np.abs(r)

    if x0 is not None:
        x = np.asarray(x0, dtype=float).copy()
        if m and np.any(M @ x - r > tol * scale):
            logger.debug("Starting point infeasible; running phase one")
            x = phase_one(M, r, tol)
    else:
        x = phase_one(M, r, tol) if m else np.zeros(n)

    working: List[int] = []
    skipped: Set[int] = set()
    lam = np.zeros(0)
    for iteration in range(1, max_iter + 1):
        g = H @ x + c
        p, lam = _equality_step(factor, M[working], g)

        if np.linalg.norm(p, np.inf) <= tol * (1.0 + np.linalg.norm(x, np.inf)):
            if lam.size == 0 or lam.min() >= -tol:
                multipliers = np.zeros(m)
                multipliers[working] = np.maximum(lam, 0.0)
                return QPResult(
                    x=x, active=sorted(working), multipliers=multipliers,
                    iterations=iteration, objective=qp_objective(H, c, x),
                )
            # lowest-index row with a negative multiplier leaves first
            negative = [row for row, value in zip(working, lam) if value < -tol]
            working.remove(min(negative))
            skipped.clear()
            continue

        step = 1.0
        blocking = None
        for i in range(m):
            if i in working or i in skipped:
                continue
            mp = M[i] @ p
            if mp <= tol * (1.0 + np.linalg.norm(M[i], np.inf)):
                continue
            ratio = max(r[i] - M[i] @ x, 0.0) / mp
            # ties go to the lowest row index
            if ratio < step - tol:
                step, blocking = ratio, i
        x = x + step * p
        if blocking is None:
            continue
        if _is_dependent(M[working], M[blocking], tol):
            logger.debug(f"Row {blocking} is dependent on the working set; skipped")
            skipped.add(blocking)
        else:
            working.append(blocking)
            skipped.clear()

    raise QPError(f"Active-set iteration limit ({max_iter}) reached")


def _is_dependent(M_w: np.ndarray, row: np.ndarray, tol: float) -> bool:
    """True when ``row`` lies in the span of the working-set normals."""
    if M_w.shape[0] == 0:
        return False
    coef = np.linalg.lstsq(M_w.T, row, rcond=None)[0]
    residual = np.linalg.norm(M_w.T @ coef - row)
    return residual <= np.sqrt(tol) * max(1.0, np.linalg.norm(row))


def _equality_step(factor, M_w: np.ndarray, g: np.ndarray):
    """Step p and multipliers of min 1/2 p'Hp + g'p subject to M_w p = 0."""
    h_inv_g = cho_solve(factor, g)
    if M_w.shape[0] == 0:
        return -h_inv_g, np.zeros(0)
    h_inv_mt = cho_solve(factor, M_w.T)
    schur = M_w @ h_inv_mt
    lam = np.linalg.lstsq(schur, -(M_w @ h_inv_g), rcond=None)[0]
    p = -(h_inv_g + h_inv_mt @ lam)
    return p, lam
