"""
GridGenius Core Module

Closed-loop scenario runner, demand sweep and the end-to-end pipeline.
"""

from .scenario_runner import Method, RunReport, Scenario, ScenarioError, run_batch, run_scenario, sweep
from .pipeline import Pipeline, PipelineStageError, compare_runs, plot_results, run_pipeline

__all__ = [
    'Method',
    'RunReport',
    'Scenario',
    'ScenarioError',
    'run_batch',
    'run_scenario',
    'sweep',
    'Pipeline',
    'PipelineStageError',
    'compare_runs',
    'plot_results',
    'run_pipeline',
]
