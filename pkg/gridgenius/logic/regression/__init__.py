"""
Regression package: MARS surrogate of the damping index.
"""

from .mars_model import (
    HingeDirection,
    HingeTerm,
    MarsModel,
    MarsModelError,
    load_model,
    model_r2,
    r2,
    reference_model,
    save_model,
)
from .mars_fit import FitConfig, FitReport, SurrogateFit, fit, fit_dataset, train_test_split
from .feature_selection import select_features

__all__ = [
    "HingeDirection",
    "HingeTerm",
    "MarsModel",
    "MarsModelError",
    "load_model",
    "model_r2",
    "r2",
    "reference_model",
    "save_model",
    "FitConfig",
    "FitReport",
    "SurrogateFit",
    "fit",
    "fit_dataset",
    "train_test_split",
    "select_features",
]
