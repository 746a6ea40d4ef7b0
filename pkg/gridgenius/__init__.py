"""
GridGenius - Stability-Constrained Feedback Optimization Toolkit

Online feedback optimization of a converter-dominated power network with
a learned small-signal stability constraint, plus the offline OPF
baselines it is compared against.

Main Components:
- Core: Scenario runner, sweep and pipeline
- CLI: Command-line interface
- Logic: Modular numerical core (grid, power flow, small signal, dataset,
  regression, optimization, exporters, utilities)

Entry Points:
- gridgenius (console script): gridgenius.cli.main_cli:main
- app_launcher_cli.py: Launcher for source checkouts
"""

__version__ = "1.0.0"
__author__ = "GridGenius Team"

from .core.pipeline import run_pipeline
from .core.scenario_runner import run_scenario

__all__ = [
    'run_pipeline',
    'run_scenario',
]
