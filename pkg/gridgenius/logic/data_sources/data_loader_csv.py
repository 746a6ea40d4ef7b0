"""
Dataset CSV reader and writer.

This module provides the on-disk form of labelled datasets: a comma
separated file with a fixed header (see ``dataset_header``), decimal
point '.', '\\n' line endings, floats written with 17 significant digits
and booleans as 0/1. Only feasible rows are written.
"""

import csv
import logging
import math
import time
from pathlib import Path
from typing import Iterable, List, Union

import numpy as np

from ..models.network_models import NetworkModel
from .data_loader_base import (
    Dataset, DatasetFormatError, DatasetRow, LoadResult,
    control_columns, dataset_header, feature_names,
)

logger = logging.getLogger(__name__)


def _fmt(value: float) -> str:
    return format(float(value), '.17g')


def _row_cells(row: DatasetRow) -> List[str]:
    return [
        str(row.index),
        _fmt(row.demand_mw),
        _fmt(row.sg_share),
        _fmt(row.gfm_share),
        *(_fmt(v) for v in row.u),
        *(_fmt(v) for v in row.features),
        _fmt(row.di),
        '1' if row.stable else '0',
        '1' if row.feasible else '0',
    ]


def export_dataset(rows: Iterable[DatasetRow], path: Union[str, Path], network: NetworkModel) -> int:
    """
    Write feasible rows to CSV.

    Args:
        rows: Labelled rows (infeasible rows are skipped)
        path: Destination file
        network: Network that defines the column vocabulary

    Returns:
        Number of rows written
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = dataset_header(network)
    written = 0
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            if not row.feasible:
                continue
            cells = _row_cells(row)
            if len(cells) != len(header):
                raise DatasetFormatError(
                    f"Row {row.index} has {len(cells)} cells, header has {len(header)}"
                )
            writer.writerow(cells)
            written += 1
    logger.info(f"Wrote {written} dataset rows to {path}")
    return written


class DatasetCSVLoader:
    """Loads dataset CSV files written by ``export_dataset``."""

    def __init__(self, network: NetworkModel):
        self.network = network
        self.header = dataset_header(network)
        self.n_controls = len(control_columns(network))
        self.n_features = len(feature_names(network))
        self.logger = logging.getLogger(__name__)

    def load(self, path: Union[str, Path]) -> LoadResult:
        """
        Load a dataset file.

        Args:
            path: CSV file path

        Returns:
            LoadResult with the parsed Dataset or an error message
        """
        start = time.time()
        path = Path(path)
        try:
            dataset = self._read(path)
        except FileNotFoundError:
            return LoadResult.failure_result(f"Dataset file not found: {path}")
        except DatasetFormatError as e:
            return LoadResult.failure_result(str(e), metadata={'path': str(path)})

        result = LoadResult.success_result(
            dataset, load_duration=time.time() - start, metadata={'path': str(path)}
        )
        stable, unstable = dataset.class_balance()
        if stable == 0 or unstable == 0:
            result.add_warning("Dataset contains a single stability class")
        self.logger.info(f"Loaded {len(dataset)} rows from {path}")
        return result

    def _read(self, path: Path) -> Dataset:
        with open(path, 'r', encoding='utf-8', newline='') as f:
            reader = csv.reader(f)
            try:
                header = next(reader)
            except StopIteration:
                raise DatasetFormatError(f"Dataset file is empty: {path}") from None
            if header != self.header:
                raise DatasetFormatError(
                    f"Header mismatch in {path}: expected {len(self.header)} documented columns "
                    f"in fixed order"
                )

            rows = []
            for line_no, cells in enumerate(reader, start=2):
                if not cells:
                    continue
                rows.append(self._parse(cells, line_no))

        return Dataset(
            feature_names=feature_names(self.network),
            control_labels=list(self.network.controls),
            rows=rows,
        )

    def _parse(self, cells: List[str], line_no: int) -> DatasetRow:
        if len(cells) != len(self.header):
            raise DatasetFormatError(
                f"Line {line_no}: expected {len(self.header)} cells, found {len(cells)}"
            )
        try:
            values = [float(c) for c in cells[1:-2]]
            index = int(cells[0])
            stable_flag = cells[-2]
            feasible_flag = cells[-1]
        except ValueError as e:
            raise DatasetFormatError(f"Line {line_no}: {e}") from e
        if stable_flag not in ('0', '1') or feasible_flag not in ('0', '1'):
            raise DatasetFormatError(f"Line {line_no}: flags must be 0 or 1")

        n_meta = len(values) - self.n_controls - self.n_features - 1
        u_start = n_meta
        f_start = u_start + self.n_controls
        di = values[-1]
        if not math.isfinite(di):
            raise DatasetFormatError(f"Line {line_no}: non-finite damping index")
        if (stable_flag == '1') != (di < 1.0):
            raise DatasetFormatError(
                f"Line {line_no}: stable flag {stable_flag} contradicts DI = {di!r}"
            )
        return DatasetRow(
            index=index,
            demand_mw=values[0],
            sg_share=values[1],
            gfm_share=values[2],
            u=np.array(values[u_start:f_start]),
            features=np.array(values[f_start:f_start + self.n_features]),
            di=di,
            stable=stable_flag == '1',
            feasible=feasible_flag == '1',
        )


def import_dataset(path: Union[str, Path], network: NetworkModel) -> Dataset:
    """
    Read a dataset file, raising on any format problem.

    Raises:
        DatasetFormatError: Malformed file or header mismatch
    """
    result = DatasetCSVLoader(network).load(path)
    if not result.success:
        raise DatasetFormatError(result.error_message)
    for warning in result.warnings:
        logger.warning(warning)
    return result.dataset
