"""
GridGenius Logic Package

This package contains the numerical core of the toolkit, layered so that
each subpackage only depends on the ones listed before it:

- models: network description, dynamic parameters, validation
- grid: fixture files, demand scaling, admittance matrix, limits
- power_flow: Newton-Raphson solver and sensitivities
- small_signal: device models, linearization and modal analysis
- data_sources: sampling and labelling of operating points
- regression: MARS surrogate of the damping index
- optimization: QP, objective, online controller, OPF baselines
- exporters: CSV/markdown tables and figures
- utilities: logging and configuration

Example usage:
    from gridgenius.logic.grid import ieee9_fixture
    from gridgenius.logic.power_flow import SetpointVector, solve
    from gridgenius.logic.small_signal import evaluate_stability

    network = ieee9_fixture()
    setpoints = SetpointVector(u=[0.5, 0.5, 1.0, 1.0, 1.0], demand_mw=315.0)
    evaluation = evaluate_stability(network, setpoints)
    print(evaluation.di)
"""

__version__ = "1.0.0"
__author__ = "GridGenius Team"
