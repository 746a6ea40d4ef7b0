"""
Abstract base exporter class and common interfaces.

This module defines the tabular result container shared by every report
artifact and the base exporter interface that the format-specific
exporters implement.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from datetime import datetime
import logging
import math
from pathlib import Path
import re
import time
from typing import Any, Dict, List, Mapping, Optional, Sequence

from ..models.base_models import ValidationResult


class ExportError(Exception):
    """Exception raised for malformed result tables."""
    pass


@dataclass
class ExportResult:
    """
    Result container for export operations.

    Contains the result status, file path, metadata, and any
    errors or warnings from the export process.
    """

    success: bool
    output_path: Optional[Path] = None
    file_size: Optional[int] = None
    export_duration: Optional[float] = None
    error_message: Optional[str] = None
    warnings: List[str] = field(default_factory=list)
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if 'export_timestamp' not in self.metadata:
            self.metadata['export_timestamp'] = datetime.now().isoformat()

    @classmethod
    def success_result(
        cls,
        output_path: Path,
        export_duration: Optional[float] = None,
        metadata: Optional[Dict[str, Any]] = None
    ) -> 'ExportResult':
        """Create a successful export result."""
        file_size = output_path.stat().st_size if output_path.exists() else None
        return cls(
            success=True,
            output_path=output_path,
            file_size=file_size,
            export_duration=export_duration,
            metadata=metadata or {}
        )

    @classmethod
    def failure_result(
        cls,
        error_message: str,
        metadata: Optional[Dict[str, Any]] = None
    ) -> 'ExportResult':
        """Create a failed export result."""
        return cls(success=False, error_message=error_message, metadata=metadata or {})

    def add_warning(self, warning: str) -> None:
        self.warnings.append(warning)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'success': self.success,
            'output_path': str(self.output_path) if self.output_path else None,
            'file_size': self.file_size,
            'export_duration': self.export_duration,
            'error_message': self.error_message,
            'warnings': self.warnings,
            'metadata': self.metadata
        }


@dataclass
class ResultTable:
    """
    Named table of report values.

    ``name`` becomes the file stem; ``metadata`` is written where the
    format supports it (markdown front matter).
    """

    name: str
    columns: List[str]
    rows: List[List[Any]] = field(default_factory=list)
    title: Optional[str] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_records(
        cls,
        name: str,
        records: Sequence[Mapping[str, Any]],
        title: Optional[str] = None,
    ) -> 'ResultTable':
        """Build a table from dict rows sharing one key order."""
        if not records:
            raise ExportError(f"Table '{name}' has no records")
        columns = list(records[0].keys())
        rows = []
        for i, record in enumerate(records):
            if list(record.keys()) != columns:
                raise ExportError(f"Record {i} of table '{name}' has differing columns")
            rows.append([record[c] for c in columns])
        return cls(name=name, columns=columns, rows=rows, title=title)

    def validate(self) -> ValidationResult:
        result = ValidationResult(is_valid=True)
        if not self.columns:
            result.add_error(f"Table '{self.name}' has no columns")
        if len(set(self.columns)) != len(self.columns):
            result.add_error(f"Table '{self.name}' has duplicate columns")
        for i, row in enumerate(self.rows):
            if len(row) != len(self.columns):
                result.add_error(
                    f"Row {i} of table '{self.name}' has {len(row)} cells, expected {len(self.columns)}"
                )
        if not self.rows:
            result.add_warning(f"Table '{self.name}' is empty")
        return result

    def column(self, name: str) -> List[Any]:
        try:
            k = self.columns.index(name)
        except ValueError:
            raise ExportError(f"Table '{self.name}' has no column '{name}'")
        return [row[k] for row in self.rows]

    def records(self) -> List[Dict[str, Any]]:
        return [dict(zip(self.columns, row)) for row in self.rows]

    def __len__(self) -> int:
        return len(self.rows)


def format_cell(value: Any, float_format: str = '.10g') -> str:
    """Text form of one cell: booleans as true/false, NaN as nan."""
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        if math.isnan(value):
            return 'nan'
        return format(value, float_format)
    if value is None:
        return ''
    return str(value)


@dataclass
class ExportContext:
    """
    Shared context for export operations.

    One context per output directory; messages carry the run identifier.
    """

    output_directory: Path
    run_id: str
    overwrite_existing: bool = True
    logger: Optional[logging.Logger] = None

    def __post_init__(self):
        self.output_directory = Path(self.output_directory)
        if self.logger is None:
            self.logger = logging.getLogger(__name__)

    def log_info(self, message: str) -> None:
        self.logger.info(f"[{self.run_id}] {message}")

    def log_warning(self, message: str) -> None:
        self.logger.warning(f"[{self.run_id}] {message}")

    def log_error(self, message: str) -> None:
        self.logger.error(f"[{self.run_id}] {message}")


class BaseExporter(ABC):
    """
    Abstract base class for table exporters.

    Subclasses render a ResultTable to text; writing, timing and error
    capture are shared.
    """

    def __init__(self, context: ExportContext):
        self.context = context
        self.format_name = self._get_format_name()
        self.file_extension = self._get_file_extension()

    @abstractmethod
    def _get_format_name(self) -> str:
        """Return the human-readable format name."""
        pass

    @abstractmethod
    def _get_file_extension(self) -> str:
        """Return the file extension for this format (without dot)."""
        pass

    @abstractmethod
    def render(self, table: ResultTable) -> str:
        """Render a table to the file content."""
        pass

    def validate_settings(self) -> ValidationResult:
        return self._validate_dependencies()

    def get_output_path(self, table: ResultTable) -> Path:
        return self._get_available_filename(
            self.context.output_directory / f"{self._sanitize_filename(table.name)}.{self.file_extension}"
        )

    def export_table(self, table: ResultTable) -> ExportResult:
        """
        Write one table to the output directory.

        Returns:
            ExportResult; invalid tables and IO errors give a failure result
        """
        validation = table.validate()
        if not validation.is_valid:
            self.context.log_error(f"{self.format_name} export of '{table.name}' rejected")
            return ExportResult.failure_result(
                "; ".join(validation.errors), metadata={'table': table.name}
            )
        try:
            start = time.perf_counter()
            output_path = self.get_output_path(table)
            output_path.parent.mkdir(parents=True, exist_ok=True)
            content = self.render(table)
            with open(output_path, 'w', encoding='utf-8', newline='') as f:
                f.write(content)
            duration = time.perf_counter() - start
        except (OSError, ExportError) as e:
            self.context.log_error(f"{self.format_name} export failed: {e}")
            return ExportResult.failure_result(
                f"{self.format_name} export failed: {e}", metadata={'table': table.name}
            )

        self.context.log_info(f"Wrote {output_path.name} ({len(table)} rows)")
        result = ExportResult.success_result(
            output_path=output_path,
            export_duration=duration,
            metadata={'format': self.file_extension, 'table': table.name, 'rows': len(table)},
        )
        for warning in validation.warnings:
            result.add_warning(warning)
        return result

    def export_batch(self, tables: Sequence[ResultTable]) -> List[ExportResult]:
        results = [self.export_table(table) for table in tables]
        successful = sum(1 for r in results if r.success)
        self.context.log_info(
            f"{self.format_name} batch export complete: {successful}/{len(results)} successful"
        )
        return results

    def _sanitize_filename(self, filename: str, max_length: int = 255) -> str:
        filename = re.sub(r'[<>:"/\\|?*]', '_', filename)
        filename = re.sub(r'\s+', '_', filename)
        filename = re.sub(r'_+', '_', filename)
        filename = filename.strip('_')[:max_length]
        return filename or "table"

    def _get_available_filename(self, base_path: Path) -> Path:
        if self.context.overwrite_existing or not base_path.exists():
            return base_path
        counter = 1
        while True:
            candidate = base_path.parent / f"{base_path.stem}_{counter}{base_path.suffix}"
            if not candidate.exists():
                return candidate
            counter += 1

    def _validate_dependencies(self) -> ValidationResult:
        result = ValidationResult(is_valid=True)
        try:
            self.context.output_directory.mkdir(parents=True, exist_ok=True)
            test_file = self.context.output_directory / ".write_test"
            test_file.touch()
            test_file.unlink()
        except OSError as e:
            result.add_error(f"Output directory is not writable: {e}")
        return result
