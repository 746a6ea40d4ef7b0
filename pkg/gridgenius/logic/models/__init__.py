"""
Models package initialization for GridGenius.

This package contains the validated domain records: the network
description, dynamic component parameters and the model base class.
"""

# Base models and validation
from .base_models import BaseModel, ValidationResult

# Network description
from .network_models import (
    Branch,
    Bus,
    BusKind,
    GeneratorKind,
    GeneratorSpec,
    LoadSpec,
    NetworkDataError,
    NetworkModel,
    QuantityLabel,
)

# Dynamic parameters
from .dynamic_params import (
    DynamicComponentParams,
    GFLParams,
    GFMParams,
    InfiniteSourceParams,
    SGParams,
    params_from_dict,
)

__all__ = [
    "BaseModel",
    "ValidationResult",

    "Branch",
    "Bus",
    "BusKind",
    "GeneratorKind",
    "GeneratorSpec",
    "LoadSpec",
    "NetworkDataError",
    "NetworkModel",
    "QuantityLabel",

    "DynamicComponentParams",
    "GFLParams",
    "GFMParams",
    "InfiniteSourceParams",
    "SGParams",
    "params_from_dict",
]
