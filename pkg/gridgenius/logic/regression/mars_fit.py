"""
Forward/backward fitting of the additive hinge model.

The forward pass greedily adds mirrored hinge pairs max(0, x - t),
max(0, t - x) at candidate knots, scoring every candidate of a feature at
once against the residual orthogonalized to the current basis. The
backward pass removes one term at a time (least RSS increase) and keeps
the model with the lowest generalized cross-validation score.
"""

from dataclasses import dataclass, field
import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..data_sources.data_loader_base import Dataset
from ..models.base_models import BaseModel, ValidationResult
from .feature_selection import select_features
from .mars_model import HingeDirection, HingeTerm, MarsModel, MarsModelError, model_r2

logger = logging.getLogger(__name__)

_DEGENERATE = 1e-10


@dataclass
class FitConfig(BaseModel):
    """Forward-pass size, pruning penalty and knot thinning."""

    max_terms: int = 21
    gcv_penalty: float = 3.0
    min_span: int = 1
    max_knots: int = 200
    forward_improvement_tol: float = 1e-9
    correlation_drop_threshold: float = 0.95

    def validate(self) -> ValidationResult:
        result = ValidationResult(is_valid=True)
        if self.max_terms < 1:
            result.add_error(f"max_terms must be at least 1, got {self.max_terms}")
        if self.gcv_penalty <= 0:
            result.add_error(f"gcv_penalty must be positive, got {self.gcv_penalty}")
        if self.min_span < 1 or self.max_knots < 1:
            result.add_error("min_span and max_knots must be at least 1")
        if self.forward_improvement_tol < 0:
            result.add_error("forward_improvement_tol cannot be negative")
        if not 0 < self.correlation_drop_threshold <= 1:
            result.add_error("correlation_drop_threshold must lie in (0, 1]")
        return result


@dataclass
class FitReport:
    """Fitted model plus the forward/backward pass record."""

    model: MarsModel
    rss: float
    gcv: float
    forward_terms: int
    forward_gcv: float
    pruning_path: List[Tuple[int, float, float]] = field(default_factory=list)


def candidate_knots(column: np.ndarray, min_span: int = 1, max_knots: int = 200) -> np.ndarray:
    """Distinct training values of a feature, thinned to every k-th value."""
    values = np.unique(column)
    stride = max(min_span, math.ceil(len(values) / max_knots))
    return values[::stride]


def gcv_score(rss: float, n_rows: int, n_terms: int, penalty: float) -> float:
    """RSS/n / (1 - C/n)^2 with effective parameters C = (M + 1) + d*M/2."""
    c = (n_terms + 1) + penalty * n_terms / 2.0
    if c >= n_rows:
        return math.inf
    return (rss / n_rows) / (1.0 - c / n_rows) ** 2


def _best_candidate(
    column: np.ndarray,
    knots: np.ndarray,
    Q: np.ndarray,
    resid: np.ndarray,
) -> Tuple[float, int, str]:
    """Largest RSS reduction over (knot, {pair, plus, minus}) for one feature."""
    P = np.maximum(0.0, column[:, None] - knots[None, :])
    M = np.maximum(0.0, knots[None, :] - column[:, None])
    Pp = P - Q @ (Q.T @ P)
    Mp = M - Q @ (Q.T @ M)

    pp = np.einsum('ij,ij->j', Pp, Pp)
    mm = np.einsum('ij,ij->j', Mp, Mp)
    pm = np.einsum('ij,ij->j', Pp, Mp)
    pr = Pp.T @ resid
    mr = Mp.T @ resid

    p_ok = pp > _DEGENERATE * np.maximum(np.einsum('ij,ij->j', P, P), 1e-300)
    m_ok = mm > _DEGENERATE * np.maximum(np.einsum('ij,ij->j', M, M), 1e-300)
    det = pp * mm - pm ** 2
    pair_ok = p_ok & m_ok & (det > _DEGENERATE * pp * mm)

    with np.errstate(divide='ignore', invalid='ignore'):
        red_plus = np.where(p_ok, pr ** 2 / np.where(p_ok, pp, 1.0), 0.0)
        red_minus = np.where(m_ok, mr ** 2 / np.where(m_ok, mm, 1.0), 0.0)
        red_pair = np.where(
            pair_ok,
            (mm * pr ** 2 - 2.0 * pm * pr * mr + pp * mr ** 2) / np.where(pair_ok, det, 1.0),
            0.0,
        )

    scores = np.vstack([red_pair, red_plus, red_minus])
    flat = int(np.argmax(scores))
    kind, k = divmod(flat, len(knots))
    return float(scores[kind, k]), k, ('pair', 'plus', 'minus')[kind]


def _orthonormal_append(Q: np.ndarray, column: np.ndarray) -> Optional[np.ndarray]:
    v = column.copy()
    for _ in range(2):
        v -= Q @ (Q.T @ v)
    norm = np.linalg.norm(v)
    if norm <= math.sqrt(_DEGENERATE) * max(np.linalg.norm(column), 1e-300):
        return None
    return np.column_stack([Q, v / norm])


def _forward_pass(X: np.ndarray, y: np.ndarray, config: FitConfig) -> List[Tuple[int, float, HingeDirection]]:
    n, p = X.shape
    Q = np.full((n, 1), 1.0 / math.sqrt(n))
    resid = y - y.mean()
    tss = float(resid @ resid)
    knots = [candidate_knots(X[:, j], config.min_span, config.max_knots) for j in range(p)]
    basis: List[Tuple[int, float, HingeDirection]] = []

    while len(basis) < config.max_terms and tss > 0:
        best = (0.0, -1, 0, '')
        for j in range(p):
            if knots[j].size == 0:
                continue
            reduction, k, kind = _best_candidate(X[:, j], knots[j], Q, resid)
            if reduction > best[0]:
                best = (reduction, j, k, kind)

        reduction, j, k, kind = best
        if j < 0 or reduction < config.forward_improvement_tol * tss:
            break

        t = float(knots[j][k])
        if kind == 'pair' and len(basis) + 2 > config.max_terms:
            plus = np.maximum(0.0, X[:, j] - t)
            minus = np.maximum(0.0, t - X[:, j])
            kind = 'plus' if abs(plus @ resid) >= abs(minus @ resid) else 'minus'
        directions = {
            'pair': (HingeDirection.PLUS, HingeDirection.MINUS),
            'plus': (HingeDirection.PLUS,),
            'minus': (HingeDirection.MINUS,),
        }[kind]

        added = 0
        for direction in directions:
            column = (np.maximum(0.0, X[:, j] - t) if direction == HingeDirection.PLUS
                      else np.maximum(0.0, t - X[:, j]))
            extended = _orthonormal_append(Q, column)
            if extended is None:
                continue
            Q = extended
            q = Q[:, -1]
            resid = resid - q * (q @ resid)
            basis.append((j, t, direction))
            added += 1
        if added == 0:
            logger.debug(f"Skipping rank-deficient candidate at feature {j}, knot {t}")
            break
        logger.debug(f"Forward pass: {len(basis)} terms, RSS {float(resid @ resid):.6e}")

    return basis


def _design(X: np.ndarray, basis: Sequence[Tuple[int, float, HingeDirection]], selected: Sequence[int]) -> np.ndarray:
    columns = [np.ones(X.shape[0])]
    for i in selected:
        j, t, direction = basis[i]
        columns.append(np.maximum(0.0, X[:, j] - t) if direction == HingeDirection.PLUS
                       else np.maximum(0.0, t - X[:, j]))
    return np.column_stack(columns)


def _least_squares(B: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, float]:
    coef = np.linalg.lstsq(B, y, rcond=None)[0]
    r = y - B @ coef
    return coef, float(r @ r)


def fit_report(
    X: np.ndarray,
    y: Sequence[float],
    feature_names: Sequence[str],
    config: Optional[FitConfig] = None,
) -> FitReport:
    """
    Fit a model and return it with the pass record.

    Args:
        X: Training matrix, one column per feature name
        y: Training targets
        feature_names: Feature names of the columns of X
        config: Fit settings (defaults when omitted)

    Returns:
        FitReport whose model has the minimum GCV over the pruning sequence

    Raises:
        MarsModelError: Invalid config, fewer than 10 rows or no features
    """
    config = config or FitConfig()
    validation = config.validate()
    if not validation.is_valid:
        raise MarsModelError("; ".join(validation.errors))
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[1] != len(feature_names) or X.shape[1] < 1:
        raise MarsModelError(f"Training matrix shape {X.shape} does not match {len(feature_names)} features")
    n = X.shape[0]
    if n < 10 or y.shape != (n,):
        raise MarsModelError(f"Fitting needs at least 10 rows with one target each, got {n}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise MarsModelError("Training data contains non-finite values")

    basis = _forward_pass(X, y, config)
    selected = list(range(len(basis)))
    _, rss = _least_squares(_design(X, basis, selected), y)
    forward_gcv = gcv_score(rss, n, len(selected), config.gcv_penalty)
    path = [(len(selected), rss, forward_gcv)]
    best_selection, best_gcv = list(selected), forward_gcv

    while selected:
        trial = None
        for i in selected:
            remaining = [s for s in selected if s != i]
            _, trial_rss = _least_squares(_design(X, basis, remaining), y)
            if trial is None or trial_rss < trial[1]:
                trial = (remaining, trial_rss)
        selected, rss = trial
        score = gcv_score(rss, n, len(selected), config.gcv_penalty)
        path.append((len(selected), rss, score))
        if score <= best_gcv:
            best_selection, best_gcv = list(selected), score

    coef, rss = _least_squares(_design(X, basis, best_selection), y)
    terms = tuple(
        HingeTerm(feature=basis[i][0], knot=basis[i][1], direction=basis[i][2], coefficient=float(c))
        for i, c in zip(best_selection, coef[1:])
    )
    model = MarsModel(
        intercept=float(coef[0]),
        terms=terms,
        feature_names=tuple(feature_names),
        training_ranges=tuple((float(lo), float(hi)) for lo, hi in zip(X.min(axis=0), X.max(axis=0))),
    )
    logger.info(
        f"Fitted surrogate: {len(basis)} forward terms, {len(terms)} after pruning, GCV {best_gcv:.3e}"
    )
    return FitReport(
        model=model, rss=rss, gcv=best_gcv, forward_terms=len(basis),
        forward_gcv=forward_gcv, pruning_path=path,
    )


def fit(
    X: np.ndarray,
    y: Sequence[float],
    feature_names: Sequence[str],
    config: Optional[FitConfig] = None,
) -> MarsModel:
    """Fit the additive hinge model (see fit_report)."""
    return fit_report(X, y, feature_names, config).model


def train_test_split(n_rows: int, test_fraction: float = 0.2, seed: int = 0) -> Tuple[np.ndarray, np.ndarray]:
    """Deterministic shuffled split of row indices into (train, test)."""
    if not 0 < test_fraction < 1:
        raise MarsModelError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    order = np.random.default_rng(seed).permutation(n_rows)
    n_test = int(round(test_fraction * n_rows))
    return np.sort(order[n_test:]), np.sort(order[:n_test])


@dataclass
class SurrogateFit:
    """Result of fitting on a dataset with a held-out split."""

    model: MarsModel
    report: FitReport
    features: List[str]
    train_r2: float
    test_r2: float
    n_train: int
    n_test: int


def fit_dataset(
    dataset: Dataset,
    config: Optional[FitConfig] = None,
    candidates: Optional[Sequence[str]] = None,
    test_fraction: float = 0.2,
    seed: int = 0,
) -> SurrogateFit:
    """
    Select features on the training split, fit, and score on the held-out split.

    Args:
        dataset: Labelled dataset (feasible rows are used)
        config: Fit settings
        candidates: Feature names eligible for selection (all when omitted)
        test_fraction: Held-out share of rows
        seed: Split seed

    Returns:
        SurrogateFit with train and held-out R^2
    """
    config = config or FitConfig()
    names = list(candidates) if candidates is not None else list(dataset.feature_names)
    unknown = [name for name in names if name not in dataset.feature_names]
    if unknown:
        raise MarsModelError(f"Unknown candidate features: {unknown}")

    X_all = dataset.matrix(names)
    y_all = dataset.target()
    train, test = train_test_split(len(y_all), test_fraction, seed)
    selected = select_features(X_all[train], names, config.correlation_drop_threshold)
    columns = [names.index(name) for name in selected]

    report = fit_report(X_all[np.ix_(train, columns)], y_all[train], selected, config)
    model = report.model
    train_r2 = model_r2(model, X_all[np.ix_(train, columns)], y_all[train])
    test_r2 = model_r2(model, X_all[np.ix_(test, columns)], y_all[test])
    logger.info(f"Surrogate R^2: train {train_r2:.5f}, held-out {test_r2:.5f}")
    return SurrogateFit(
        model=model, report=report, features=selected, train_r2=train_r2, test_r2=test_r2,
        n_train=len(train), n_test=len(test),
    )
