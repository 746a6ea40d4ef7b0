"""
Dataset records and loading result containers.

This module defines the labelled operating-point record shared by the
sampler, the labeler and the CSV reader/writer, plus the result object
returned by dataset loading.
"""

from dataclasses import dataclass, field
from datetime import datetime
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..models.network_models import NetworkModel


class DataSourceError(Exception):
    """Exception raised for dataset related errors."""
    pass


class DatasetFormatError(DataSourceError):
    """Exception raised for malformed dataset files or header mismatches."""
    pass


META_COLUMNS = ('index', 'demand_mw', 'sg_share', 'gfm_share')
TARGET_COLUMNS = ('DI', 'stable', 'feasible')


def feature_names(network: NetworkModel) -> List[str]:
    """
    Documented feature order of a dataset row.

    V<bus>, theta<bus> for every bus; Pg<bus>, Qg<bus> per generator;
    Pl<bus>, Ql<bus> per load. Powers are system-base per unit.
    """
    names = [f"V{b}" for b in network.bus_ids]
    names += [f"theta{b}" for b in network.bus_ids]
    for gen in network.generators:
        names += [f"Pg{gen.bus}", f"Qg{gen.bus}"]
    for load in network.loads:
        names += [f"Pl{load.bus}", f"Ql{load.bus}"]
    return names


def control_columns(network: NetworkModel) -> List[str]:
    return [f"u_{label}" for label in network.controls]


def dataset_header(network: NetworkModel) -> List[str]:
    """Exact CSV header for a network's dataset."""
    return [*META_COLUMNS, *control_columns(network), *feature_names(network), *TARGET_COLUMNS]


@dataclass
class DatasetRow:
    """One labelled operating point; ``features`` follows feature_names()."""

    index: int
    demand_mw: float
    sg_share: float
    gfm_share: float
    u: np.ndarray
    features: np.ndarray
    di: float
    stable: bool
    feasible: bool


@dataclass
class Dataset:
    """Rows plus their column vocabulary."""

    feature_names: List[str]
    control_labels: List[str]
    rows: List[DatasetRow] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rows)

    def feasible_rows(self) -> List[DatasetRow]:
        return [row for row in self.rows if row.feasible]

    def matrix(self, names: Optional[Sequence[str]] = None) -> np.ndarray:
        """Feature matrix of the feasible rows, optionally restricted to ``names``."""
        rows = self.feasible_rows()
        X = np.array([row.features for row in rows]).reshape(len(rows), len(self.feature_names))
        if names is None:
            return X
        columns = [self.feature_names.index(name) for name in names]
        return X[:, columns]

    def target(self) -> np.ndarray:
        return np.array([row.di for row in self.feasible_rows()])

    def class_balance(self) -> Tuple[int, int]:
        rows = self.feasible_rows()
        stable = sum(1 for row in rows if row.stable)
        return stable, len(rows) - stable


@dataclass
class LoadResult:
    """
    Result container for dataset loading operations.

    Contains the loaded dataset, metadata, and any errors or warnings
    from the loading process.
    """

    success: bool
    dataset: Optional[Dataset] = None
    load_duration: Optional[float] = None
    records_loaded: int = 0
    error_message: Optional[str] = None
    warnings: List[str] = field(default_factory=list)
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        """Initialize metadata with defaults."""
        if 'load_timestamp' not in self.metadata:
            self.metadata['load_timestamp'] = datetime.now().isoformat()

    @classmethod
    def success_result(
        cls,
        dataset: Dataset,
        load_duration: Optional[float] = None,
        metadata: Optional[Dict[str, Any]] = None
    ) -> 'LoadResult':
        """Create a successful load result."""
        return cls(
            success=True,
            dataset=dataset,
            load_duration=load_duration,
            records_loaded=len(dataset),
            metadata=metadata or {}
        )

    @classmethod
    def failure_result(
        cls,
        error_message: str,
        metadata: Optional[Dict[str, Any]] = None
    ) -> 'LoadResult':
        """Create a failed load result."""
        return cls(
            success=False,
            error_message=error_message,
            metadata=metadata or {}
        )

    def add_warning(self, warning: str) -> None:
        """Add a warning message to the result."""
        self.warnings.append(warning)
