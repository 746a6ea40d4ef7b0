"""
Small-signal package.

Device models, the linearized network state-space model and modal
analysis with the damping index.
"""

from .device_models import LinearizationError, build_device
from .linearizer import DynamicSystem, StateSpaceModel, linearize
from .modal_analysis import (
    CriticalFilter,
    ModalAnalysisError,
    ModalResult,
    StabilityEvaluation,
    damping_index,
    evaluate_stability,
    modal,
)

__all__ = [
    "LinearizationError",
    "build_device",
    "DynamicSystem",
    "StateSpaceModel",
    "linearize",
    "CriticalFilter",
    "ModalAnalysisError",
    "ModalResult",
    "StabilityEvaluation",
    "damping_index",
    "evaluate_stability",
    "modal",
]
