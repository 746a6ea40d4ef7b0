"""
Base Test Class for GridGenius
==============================

This module provides a unified base class for all tests, ensuring consistent
fixture management and reducing code duplication.
"""

import unittest
import tempfile
import shutil
from pathlib import Path
from typing import Any, Dict, Optional

from gridgenius.logic.grid.fixture_io import ieee9_fixture, network_from_dict
from gridgenius.logic.models.network_models import NetworkModel


def two_bus_document(
    reactance: float = 0.1,
    machine: Optional[Dict[str, Any]] = None,
    source_reactance: Optional[float] = None,
) -> Dict[str, Any]:
    """
    Fixture document of a two-bus network.

    Bus 1 hosts an ideal source (slack). Without ``machine`` bus 2 is a bare
    PQ bus; with it, bus 2 is a PV bus carrying a synchronous machine with
    the given dynamic parameters.
    """
    source: Dict[str, Any] = {
        'bus': 1, 'kind': 'INF', 'rated_mva': 100.0, 'rated_kv': 230.0,
        'p_min_frac': 0.0, 'p_max_frac': 1.0,
    }
    if source_reactance is not None:
        source['dynamics'] = {'source_reactance': source_reactance}

    generators = [source]
    controls = ['V1']
    outputs = ['V1', 'V2', 'P_INF1']
    bus2_kind = 'PQ'
    if machine is not None:
        generators.append({
            'bus': 2, 'kind': 'SG', 'rated_mva': 100.0, 'rated_kv': 230.0,
            'p_min_frac': 0.0, 'p_max_frac': 1.0, 'dynamics': machine,
        })
        controls = ['P_SG2', 'V1', 'V2']
        outputs = ['V1', 'V2', 'P_INF1', 'Q_SG2']
        bus2_kind = 'PV'

    return {
        'format': 'gridgenius-network',
        'version': 1,
        'name': 'two-bus',
        'system': {'mva_base': 100.0, 'frequency_hz': 60.0, 'demand_range_mw': [0.0, 0.0]},
        'buses': [
            {'id': 1, 'kind': 'Slack', 'base_kv': 230.0, 'v_min': 0.9, 'v_max': 1.1},
            {'id': 2, 'kind': bus2_kind, 'base_kv': 230.0, 'v_min': 0.9, 'v_max': 1.1},
        ],
        'branches': [
            {'from': 1, 'to': 2, 'kind': 'line', 'r': 0.0, 'x': reactance, 'b': 0.0, 'tap': 1.0},
        ],
        'loads': [],
        'generators': generators,
        'controls': controls,
        'outputs': outputs,
    }


def two_bus_network(**kwargs: Any) -> NetworkModel:
    return network_from_dict(two_bus_document(**kwargs))


class GridGeniusTestBase(unittest.TestCase):
    """
    Base class for all GridGenius tests.

    This class provides:
    - The bundled 9-bus network (loaded once per class)
    - Temporary directory management
    - Common file assertions
    """

    @classmethod
    def setUpClass(cls):
        """Set up test class with shared resources."""
        cls.test_dir = Path(__file__).parent
        cls.network = ieee9_fixture()

    def setUp(self):
        """Set up individual test with temporary directory."""
        self.temp_dir = Path(tempfile.mkdtemp())
        self.output_dir = self.temp_dir / "output"
        self.output_dir.mkdir(exist_ok=True)

    def tearDown(self):
        """Clean up temporary directory after test."""
        if self.temp_dir.exists():
            shutil.rmtree(self.temp_dir)

    def assert_file_exists(self, file_path: Path, message: str = ""):
        """Assert that a file exists."""
        self.assertTrue(Path(file_path).exists(), f"File should exist: {file_path}. {message}")

    def assert_file_not_empty(self, file_path: Path, message: str = ""):
        """Assert that a file exists and is not empty."""
        self.assert_file_exists(file_path, message)
        self.assertGreater(Path(file_path).stat().st_size, 0, f"File should not be empty: {file_path}. {message}")

    def assert_file_contains(self, file_path: Path, content: str, message: str = ""):
        """Assert that a file contains specific content."""
        self.assert_file_exists(file_path, message)
        text = Path(file_path).read_text(encoding='utf-8')
        self.assertIn(content, text, f"File should contain '{content}': {file_path}. {message}")


if __name__ == '__main__':
    unittest.main()
