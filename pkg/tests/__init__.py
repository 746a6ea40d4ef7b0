"""
Test package for GridGenius.

Unit tests per subsystem (grid model, power flow, small-signal analysis,
dataset, surrogate, controller, OPF, exporters) plus integration tests of
the scenario harness and the command-line interface.
"""

# Import test base classes for easy access
from .test_base import GridGeniusTestBase
