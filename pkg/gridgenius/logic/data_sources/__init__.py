"""
Data sources package initialization for GridGenius.

Sampling plans, labelling of operating points by eigenvalue analysis,
and the dataset CSV writer and loader.
"""

# Base structures
from .data_loader_base import (
    DataSourceError,
    Dataset,
    DatasetFormatError,
    DatasetRow,
    LoadResult,
    dataset_header,
    feature_names,
)

# CSV files
from .data_loader_csv import DatasetCSVLoader, export_dataset, import_dataset

# Generation
from .sample_generator import OperatingPoint, SamplingPlan, SamplingPlanError, sample
from .point_labeler import GenerationResult, generate_dataset, label_points

__all__ = [
    "DataSourceError",
    "Dataset",
    "DatasetFormatError",
    "DatasetRow",
    "LoadResult",
    "dataset_header",
    "feature_names",
    "DatasetCSVLoader",
    "export_dataset",
    "import_dataset",
    "OperatingPoint",
    "SamplingPlan",
    "SamplingPlanError",
    "sample",
    "GenerationResult",
    "generate_dataset",
    "label_points",
]
