"""
Grid package: fixture files, demand scaling, admittance matrix and
operating-limit constraints.
"""

from .fixture_io import (
    FIXTURE_PATH,
    ieee9_fixture,
    load_network,
    network_from_dict,
    network_to_dict,
    save_network,
)
from .network_ops import (
    ConstraintSet,
    LoadPoint,
    admittance_matrix,
    build_constraints,
    label_limits,
    load_admittances,
    scale_demand,
)

__all__ = [
    "FIXTURE_PATH",
    "ieee9_fixture",
    "load_network",
    "network_from_dict",
    "network_to_dict",
    "save_network",
    "ConstraintSet",
    "LoadPoint",
    "admittance_matrix",
    "build_constraints",
    "label_limits",
    "load_admittances",
    "scale_demand",
]
