"""
Weighted quadratic dispatch objective.

phi(u, y) = sum_k w_k * q_k^2 over labelled quantities q_k, each taken
from the outputs y when measured there, otherwise from the controls u.
The default weights penalize the synchronous machine ten times more than
the converters (machine-base per unit).
"""

from dataclasses import dataclass
import logging
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from ..models.network_models import NetworkModel, QuantityLabel

logger = logging.getLogger(__name__)

DEFAULT_WEIGHTS: Dict[str, float] = {'P_GFM1': 1.0, 'P_SG2': 10.0, 'P_GFL3': 1.0}


@dataclass(frozen=True)
class ObjectiveTerm:
    label: str
    weight: float
    source: str       # 'y' or 'u'
    index: int


class QuadraticObjective:
    """Objective with analytic gradients w.r.t. u and y."""

    def __init__(self, network: NetworkModel, weights: Optional[Mapping[str, float]] = None):
        weights = dict(DEFAULT_WEIGHTS if weights is None else weights)
        outputs = list(network.outputs)
        controls = list(network.controls)
        self.n_u = len(controls)
        self.n_y = len(outputs)
        terms = []
        for label, weight in weights.items():
            QuantityLabel.parse(label)
            if label in outputs:
                terms.append(ObjectiveTerm(label, float(weight), 'y', outputs.index(label)))
            elif label in controls:
                terms.append(ObjectiveTerm(label, float(weight), 'u', controls.index(label)))
            else:
                raise ValueError(f"Objective quantity {label} is neither an output nor a control")
        self.terms: Tuple[ObjectiveTerm, ...] = tuple(terms)

    def value(self, u: np.ndarray, y: np.ndarray) -> float:
        total = 0.0
        for term in self.terms:
            q = (y if term.source == 'y' else u)[term.index]
            total += term.weight * q * q
        return float(total)

    def gradient(self, u: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """(d phi / d u, d phi / d y) as independent partial derivatives."""
        grad_u = np.zeros(self.n_u)
        grad_y = np.zeros(self.n_y)
        for term in self.terms:
            if term.source == 'y':
                grad_y[term.index] += 2.0 * term.weight * y[term.index]
            else:
                grad_u[term.index] += 2.0 * term.weight * u[term.index]
        return grad_u, grad_y

    def stacked_gradient(self, u: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Gradient in the [u; y] order of the sensitivity rows."""
        grad_u, grad_y = self.gradient(u, y)
        return np.concatenate([grad_u, grad_y])

    def reduced_gradient(self, u: np.ndarray, y: np.ndarray, F: np.ndarray) -> np.ndarray:
        """Total derivative along the plant: F' [d phi/du; d phi/dy]."""
        return F.T @ self.stacked_gradient(u, y)


def dispatch_objective(
    powers_mw: Mapping[str, float],
    ratings_mva: Mapping[str, float],
    weights: Optional[Mapping[str, float]] = None,
) -> float:
    """Objective of a dispatch given in MW, converted to machine base."""
    weights = DEFAULT_WEIGHTS if weights is None else weights
    return float(sum(w * (powers_mw[label] / ratings_mva[label]) ** 2 for label, w in weights.items()))
