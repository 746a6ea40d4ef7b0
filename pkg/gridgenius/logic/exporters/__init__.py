"""
Exporters package initialization for GridGenius.

This package writes result tables (CSV, markdown reports) and renders
figures from them.
"""

# Base exporter classes
from .export_handler_base import (
    BaseExporter,
    ExportContext,
    ExportError,
    ExportResult,
    ResultTable,
)

# Format-specific exporters
from .export_handler_csv import (
    CSVExporter,
    export_tables,
    modal_table,
    read_table,
    records_table,
    trajectory_table,
    voltage_table,
)
from .export_handler_markdown import MarkdownExportError, MarkdownExporter, pivot_table

# Figures
from .plot_renderer import PlotRenderer

__all__ = [
    "BaseExporter",
    "ExportContext",
    "ExportError",
    "ExportResult",
    "ResultTable",

    "CSVExporter",
    "export_tables",
    "modal_table",
    "read_table",
    "records_table",
    "trajectory_table",
    "voltage_table",
    "MarkdownExportError",
    "MarkdownExporter",
    "pivot_table",

    "PlotRenderer",
]
