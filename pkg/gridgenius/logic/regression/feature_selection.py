"""
Correlation-based input selection for the stability surrogate.
"""

import logging
from typing import List, Sequence

import numpy as np

from .mars_model import MarsModelError

logger = logging.getLogger(__name__)

DEFAULT_CORRELATION_THRESHOLD = 0.95


def select_features(
    X: np.ndarray,
    names: Sequence[str],
    threshold: float = DEFAULT_CORRELATION_THRESHOLD,
) -> List[str]:
    """
    Keep only mutually uncorrelated, non-constant features.

    Features are visited in the given order; one is kept unless its
    absolute Pearson correlation with an already kept feature exceeds
    ``threshold``.

    Args:
        X: Data matrix, one column per name
        names: Feature names in documented order
        threshold: Absolute correlation above which a feature is dropped

    Returns:
        Retained feature names in their original order

    Raises:
        MarsModelError: Fewer than two rows, or every feature dropped
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != len(names):
        raise MarsModelError(f"Data has shape {X.shape} for {len(names)} feature names")
    if X.shape[0] < 2:
        raise MarsModelError("Feature selection needs at least two rows")

    spread = np.ptp(X, axis=0)
    varying = [j for j in range(X.shape[1]) if spread[j] > 0]
    for j in range(X.shape[1]):
        if spread[j] == 0:
            logger.debug(f"Dropping constant feature {names[j]}")

    kept: List[int] = []
    if varying:
        rho = np.atleast_2d(np.corrcoef(X[:, varying], rowvar=False))
        position = {j: p for p, j in enumerate(varying)}
        for j in varying:
            clash = next((k for k in kept if abs(rho[position[j], position[k]]) > threshold), None)
            if clash is None:
                kept.append(j)
            else:
                logger.debug(f"Dropping {names[j]}: |rho| with {names[clash]} above {threshold}")

    if not kept:
        raise MarsModelError("All features were dropped by the selection")
    logger.info(f"Selected {len(kept)} of {len(names)} features")
    return [names[j] for j in kept]
