"""
Additive hinge-function regression model.

This module provides the fitted stability surrogate
g(x) = b0 + sum_m b_m h_m(x), where each h_m is a hinge max(0, x_j - t)
or max(0, t - x_j), together with its gradient, accuracy metric and the
YAML model file format.

Model file fields:
    format           literal "gridgenius-mars"
    version          integer file version (1)
    intercept        b0
    features         ordered feature names, e.g. [V1, V6]
    training_ranges  [lo, hi] per feature
    terms            list of {feature, knot, direction: plus|minus, coefficient}
"""

from dataclasses import dataclass
from enum import Enum
import logging
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple, Union

import numpy as np
import yaml

from ..models.base_models import BaseModel, ValidationResult

logger = logging.getLogger(__name__)

FORMAT_TAG = 'gridgenius-mars'
FORMAT_VERSION = 1
REFERENCE_MODEL_PATH = Path(__file__).resolve().parents[2] / 'assets' / 'mars_reference_model.yaml'


class MarsModelError(Exception):
    """Exception raised for invalid models, model files or evaluation inputs."""
    pass


class HingeDirection(str, Enum):
    """Side of the knot on which a hinge is non-zero."""
    PLUS = 'plus'      # max(0, x - t)
    MINUS = 'minus'    # max(0, t - x)


@dataclass(frozen=True)
class HingeTerm:
    """One degree-1 basis function scaled by its coefficient."""

    feature: int
    knot: float
    direction: HingeDirection
    coefficient: float

    def basis(self, column: np.ndarray) -> np.ndarray:
        if self.direction == HingeDirection.PLUS:
            return np.maximum(0.0, column - self.knot)
        return np.maximum(0.0, self.knot - column)

    def slope(self, column: np.ndarray) -> np.ndarray:
        """Derivative of the basis; at the knot the right derivative is used."""
        if self.direction == HingeDirection.PLUS:
            return np.where(column >= self.knot, 1.0, 0.0)
        return np.where(column < self.knot, -1.0, 0.0)


@dataclass(frozen=True)
class MarsModel(BaseModel):
    """Immutable fitted surrogate over named features."""

    intercept: float
    terms: Tuple[HingeTerm, ...]
    feature_names: Tuple[str, ...]
    training_ranges: Tuple[Tuple[float, float], ...]

    def validate(self) -> ValidationResult:
        result = ValidationResult(is_valid=True)
        n = len(self.feature_names)
        if len(set(self.feature_names)) != n:
            result.add_error("Duplicate feature names")
        if len(self.training_ranges) != n:
            result.add_error(f"{len(self.training_ranges)} training ranges for {n} features")
            return result
        for name, (lo, hi) in zip(self.feature_names, self.training_ranges):
            if lo > hi:
                result.add_error(f"Training range of {name} is inverted: ({lo}, {hi})")
        for term in self.terms:
            if not 0 <= term.feature < n:
                result.add_error(f"Term references feature index {term.feature}")
                continue
            lo, hi = self.training_ranges[term.feature]
            if not lo <= term.knot <= hi:
                result.add_error(
                    f"Knot {term.knot} of {self.feature_names[term.feature]} lies outside its training range"
                )
        if not np.isfinite(self.intercept) or not all(np.isfinite(t.coefficient) for t in self.terms):
            result.add_error("Non-finite coefficient")
        return result

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def lipschitz_constant(self) -> float:
        return float(sum(abs(t.coefficient) for t in self.terms))

    def _as_matrix(self, x: Union[Sequence[float], np.ndarray]) -> Tuple[np.ndarray, bool]:
        arr = np.asarray(x, dtype=float)
        single = arr.ndim == 1
        X = arr.reshape(1, -1) if single else arr
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise MarsModelError(
                f"Expected {self.n_features} features {list(self.feature_names)}, got shape {arr.shape}"
            )
        return X, single

    def predict(self, x: Union[Sequence[float], np.ndarray]) -> Union[float, np.ndarray]:
        """
        Evaluate g at one point (1-D input) or at each row of a matrix.

        Raises:
            MarsModelError: On a feature dimension mismatch
        """
        X, single = self._as_matrix(x)
        out = np.full(X.shape[0], self.intercept)
        for term in self.terms:
            out = out + term.coefficient * term.basis(X[:, term.feature])
        return float(out[0]) if single else out

    def extrapolating(self, x: Union[Sequence[float], np.ndarray]) -> Union[bool, np.ndarray]:
        X, single = self._as_matrix(x)
        lo = np.array([r[0] for r in self.training_ranges])
        hi = np.array([r[1] for r in self.training_ranges])
        flags = np.any((X < lo) | (X > hi), axis=1)
        return bool(flags[0]) if single else flags

    def predict_with_flag(self, x: Sequence[float]) -> Tuple[float, bool]:
        """Prediction at one point and whether it lies outside the training ranges."""
        value = self.predict(x)
        flag = self.extrapolating(x)
        if flag:
            logger.debug(f"Surrogate evaluated outside its training ranges at {list(x)}")
        return value, flag

    def gradient(self, x: Sequence[float]) -> np.ndarray:
        """dg/dx at one point, right derivative at knots."""
        X, single = self._as_matrix(x)
        if not single:
            raise MarsModelError("gradient() takes a single point")
        grad = np.zeros(self.n_features)
        for term in self.terms:
            grad[term.feature] += term.coefficient * float(term.slope(X[:, term.feature])[0])
        return grad

    def describe(self) -> str:
        """Human-readable closed form, e.g. '0.9991 + 0.0290*max(0, V1 - 0.9757)'."""
        parts = [f"{self.intercept:.6g}"]
        for term in self.terms:
            name = self.feature_names[term.feature]
            hinge = (f"max(0, {name} - {term.knot:.6g})" if term.direction == HingeDirection.PLUS
                     else f"max(0, {term.knot:.6g} - {name})")
            sign = '-' if term.coefficient < 0 else '+'
            parts.append(f"{sign} {abs(term.coefficient):.6g}*{hinge}")
        return ' '.join(parts)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'format': FORMAT_TAG,
            'version': FORMAT_VERSION,
            'intercept': float(self.intercept),
            'features': list(self.feature_names),
            'training_ranges': [[float(lo), float(hi)] for lo, hi in self.training_ranges],
            'terms': [
                {
                    'feature': self.feature_names[t.feature],
                    'knot': float(t.knot),
                    'direction': t.direction.value,
                    'coefficient': float(t.coefficient),
                }
                for t in self.terms
            ],
        }


def r2(targets: Sequence[float], predictions: Sequence[float]) -> float:
    """
    Coefficient of determination.

    Raises:
        MarsModelError: Fewer than two targets or a zero-variance target
    """
    y = np.asarray(targets, dtype=float)
    p = np.asarray(predictions, dtype=float)
    if y.shape != p.shape or y.size < 2:
        raise MarsModelError("r2 needs at least two target/prediction pairs of equal length")
    tss = float(np.sum((y - y.mean()) ** 2))
    if tss == 0.0:
        raise MarsModelError("Target has zero variance")
    return 1.0 - float(np.sum((y - p) ** 2)) / tss


def model_r2(model: MarsModel, X: np.ndarray, y: Sequence[float]) -> float:
    return r2(y, model.predict(np.asarray(X, dtype=float).reshape(-1, model.n_features)))


def model_from_dict(data: Dict[str, Any]) -> MarsModel:
    """
    Build a model from its file representation.

    Raises:
        MarsModelError: On a wrong format tag, unknown token or invalid model
    """
    if not isinstance(data, dict) or data.get('format') != FORMAT_TAG:
        raise MarsModelError(f"Not a {FORMAT_TAG} model file")
    if data.get('version') != FORMAT_VERSION:
        raise MarsModelError(f"Unsupported model file version: {data.get('version')}")
    try:
        names = tuple(str(n) for n in data['features'])
        ranges = tuple((float(lo), float(hi)) for lo, hi in data['training_ranges'])
        terms: List[HingeTerm] = []
        for entry in data.get('terms') or []:
            if entry['feature'] not in names:
                raise MarsModelError(f"Term uses unknown feature {entry['feature']}")
            try:
                direction = HingeDirection(entry['direction'])
            except ValueError:
                raise MarsModelError(f"Unknown hinge direction: {entry['direction']!r}") from None
            terms.append(HingeTerm(
                feature=names.index(entry['feature']),
                knot=float(entry['knot']),
                direction=direction,
                coefficient=float(entry['coefficient']),
            ))
        model = MarsModel(
            intercept=float(data['intercept']),
            terms=tuple(terms),
            feature_names=names,
            training_ranges=ranges,
        )
    except (KeyError, TypeError, ValueError) as e:
        raise MarsModelError(f"Malformed model file: {e}") from e

    validation = model.validate()
    if not validation.is_valid:
        raise MarsModelError("; ".join(validation.errors))
    return model


def save_model(model: MarsModel, path: Union[str, Path]) -> Path:
    """Write a model file (YAML)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        yaml.safe_dump(model.to_dict(), f, sort_keys=False, default_flow_style=None, width=120)
    logger.info(f"Saved surrogate with {len(model.terms)} terms to {path}")
    return path


def load_model(path: Union[str, Path]) -> MarsModel:
    """
    Read a model file.

    Raises:
        MarsModelError: Missing or malformed file
    """
    path = Path(path)
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = yaml.safe_load(f)
    except FileNotFoundError:
        raise MarsModelError(f"Model file not found: {path}") from None
    except yaml.YAMLError as e:
        raise MarsModelError(f"Invalid YAML in {path}: {e}") from e
    return model_from_dict(data)


def reference_model() -> MarsModel:
    """The bundled two-feature reference surrogate over V1 and V6."""
    return load_model(REFERENCE_MODEL_PATH)
