"""
CSV export of controller, modal and comparison results.

Table builders turn solver results into ResultTables; ``CSVExporter``
writes them and ``read_table`` loads them back for the compare and plot
commands.
"""

import csv
import io
import math
from pathlib import Path
from typing import Any, Dict, List, Mapping, Sequence, Union

import numpy as np

from ..models.network_models import NetworkModel
from ..optimization.ofo_controller import TrajectoryEntry
from ..power_flow.newton_solver import PowerFlowSolution
from ..small_signal.modal_analysis import ModalResult
from .export_handler_base import BaseExporter, ExportError, ResultTable, format_cell


class CSVExporter(BaseExporter):
    """Writes tables as comma-separated text with a header row."""

    def __init__(self, context, float_format: str = '.17g'):
        super().__init__(context)
        self.float_format = float_format

    def _get_format_name(self) -> str:
        return "CSV"

    def _get_file_extension(self) -> str:
        return "csv"

    def render(self, table: ResultTable) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator='\n')
        writer.writerow(table.columns)
        for row in table.rows:
            writer.writerow([format_cell(_plain_number(v), self.float_format) for v in row])
        return buffer.getvalue()


def _plain_number(value: Any) -> Any:
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    return value


def _parse_cell(text: str) -> Any:
    if text == 'true':
        return True
    if text == 'false':
        return False
    if text == '':
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def read_table(path: Union[str, Path]) -> ResultTable:
    """
    Load a CSV written by CSVExporter.

    Numbers come back as int/float, true/false as bool.

    Raises:
        ExportError: Missing file, empty file or ragged rows
    """
    path = Path(path)
    if not path.exists():
        raise ExportError(f"Table file not found: {path}")
    with open(path, 'r', encoding='utf-8', newline='') as f:
        lines = list(csv.reader(f))
    if not lines:
        raise ExportError(f"Table file is empty: {path}")
    columns, body = lines[0], lines[1:]
    rows = []
    for i, cells in enumerate(body, start=2):
        if len(cells) != len(columns):
            raise ExportError(f"{path.name} line {i}: {len(cells)} cells, expected {len(columns)}")
        rows.append([_parse_cell(c) for c in cells])
    return ResultTable(name=path.stem, columns=columns, rows=rows)


def trajectory_table(
    network: NetworkModel,
    trajectory: Sequence[TrajectoryEntry],
    name: str = 'trajectory',
) -> ResultTable:
    """
    Controller log: iteration, u, y, phi, predicted DI, direction norm, fallback.

    Control columns are prefixed ``u_`` and output columns ``y_`` since a
    quantity can be both.
    """
    columns = (['iteration'] + [f"u_{c}" for c in network.controls] + [f"y_{o}" for o in network.outputs]
               + ['phi', 'g_hat', 'direction_norm', 'fallback'])
    rows = [
        [e.iteration, *e.u, *e.y, e.phi, e.g_hat, e.direction_norm, e.fallback]
        for e in trajectory
    ]
    return ResultTable(name=name, columns=columns, rows=rows, title='Controller trajectory')


def modal_table(result: ModalResult, name: str = 'modal') -> ResultTable:
    """Eigenvalues with frequency, damping ratio and critical flag."""
    critical = result.is_critical()
    freq = result.frequencies_hz
    rows = [
        [float(lam.real), float(lam.imag), float(freq[i]), float(result.damping_ratios[i]), bool(critical[i])]
        for i, lam in enumerate(result.eigenvalues)
    ]
    table = ResultTable(
        name=name,
        columns=['re', 'im', 'freq_hz', 'damping_ratio', 'critical'],
        rows=rows,
        title='Modal map',
    )
    table.metadata['damping_index'] = float(result.di)
    return table


def voltage_table(network: NetworkModel, sol: PowerFlowSolution, name: str = 'voltage_profile') -> ResultTable:
    """Bus voltage magnitudes (p.u.) and angles (degrees)."""
    rows = [
        [bus.id, float(sol.vm[i]), float(math.degrees(sol.va[i]))]
        for i, bus in enumerate(network.buses)
    ]
    return ResultTable(name=name, columns=['bus', 'vm_pu', 'va_deg'], rows=rows, title='Voltage profile')


def records_table(name: str, records: Sequence[Mapping[str, Any]], title: str = '') -> ResultTable:
    return ResultTable.from_records(name, records, title=title or None)


def export_tables(exporter: CSVExporter, tables: Sequence[ResultTable]) -> Dict[str, Path]:
    """
    Write several tables and return their paths by table name.

    Raises:
        ExportError: If any table fails to write
    """
    paths: Dict[str, Path] = {}
    for result, table in zip(exporter.export_batch(tables), tables):
        if not result.success:
            raise ExportError(result.error_message)
        paths[table.name] = result.output_path
    return paths


def column_array(table: ResultTable, name: str) -> np.ndarray:
    """Numeric column as a float array (missing cells become NaN)."""
    values: List[float] = []
    for v in table.column(name):
        values.append(math.nan if v is None or isinstance(v, str) else float(v))
    return np.array(values)
