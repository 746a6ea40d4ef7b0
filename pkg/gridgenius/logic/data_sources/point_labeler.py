"""
Operating-point labelling.

This module provides the stability label of a sampled point (power flow,
linearization and modal analysis) and the dataset generator that drives
the two-pass sampler with it. Labelling of independent points can be
spread over worker processes; output order always follows point index.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
import logging
import math
import time
from typing import Any, Dict, List, Optional

import numpy as np

from ..models.network_models import NetworkModel
from ..power_flow.newton_solver import PowerFlowError, PowerFlowSolution, solve
from ..small_signal.device_models import LinearizationError
from ..small_signal.modal_analysis import CriticalFilter, ModalAnalysisError, evaluate_stability
from .data_loader_base import Dataset, DatasetRow, feature_names
from .sample_generator import OperatingPoint, PlanSpace, SamplingPlan, sample

logger = logging.getLogger(__name__)


def solution_features(network: NetworkModel, sol: PowerFlowSolution) -> np.ndarray:
    """Feature vector of a solved point in ``feature_names`` order."""
    values = list(sol.vm) + list(sol.va)
    for gen in network.generators:
        k = network.bus_index(gen.bus)
        values += [sol.p_gen[k], sol.q_gen[k]]
    for load in network.loads:
        k = network.bus_index(load.bus)
        values += [sol.p_load[k], sol.q_load[k]]
    return np.array(values, dtype=float)


def label_point(
    network: NetworkModel,
    plan: SamplingPlan,
    point: OperatingPoint,
    critical_filter: Optional[CriticalFilter] = None,
) -> DatasetRow:
    """
    Label one operating point.

    Failures never raise: a point whose power flow or linear model cannot
    be built is returned with ``feasible`` False and a NaN damping index.
    """
    setpoints = PlanSpace(network, plan).to_setpoints(point)
    n_features = len(feature_names(network))

    def infeasible(features: np.ndarray) -> DatasetRow:
        return DatasetRow(
            index=point.index, demand_mw=point.demand_mw, sg_share=point.sg_share,
            gfm_share=point.gfm_share, u=setpoints.u, features=features,
            di=math.nan, stable=False, feasible=False,
        )

    try:
        sol = solve(network, setpoints)
    except PowerFlowError as e:
        logger.debug(f"Point {point.index}: power flow failed ({e})")
        return infeasible(np.full(n_features, np.nan))
    if not sol.converged:
        logger.debug(f"Point {point.index}: power flow did not converge")
        return infeasible(np.full(n_features, np.nan))

    features = solution_features(network, sol)
    try:
        evaluation = evaluate_stability(network, setpoints, critical_filter, sol=sol)
    except (LinearizationError, ModalAnalysisError) as e:
        logger.debug(f"Point {point.index}: modal analysis failed ({e})")
        return infeasible(features)

    di = evaluation.di
    return DatasetRow(
        index=point.index, demand_mw=point.demand_mw, sg_share=point.sg_share,
        gfm_share=point.gfm_share, u=setpoints.u, features=features,
        di=di, stable=di < 1.0, feasible=True,
    )


def label_points(
    network: NetworkModel,
    plan: SamplingPlan,
    points: List[OperatingPoint],
    critical_filter: Optional[CriticalFilter] = None,
    workers: int = 1,
) -> List[DatasetRow]:
    """
    Label points, optionally in worker processes.

    Returns:
        Rows in the same order as ``points``
    """
    task = partial(label_point, network, plan, critical_filter=critical_filter)
    if workers <= 1 or len(points) < 2:
        return [task(point) for point in points]
    chunksize = max(1, len(points) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(task, points, chunksize=chunksize))


@dataclass
class GenerationResult:
    """Labelled dataset plus summary statistics of its generation."""

    dataset: Dataset
    stats: Dict[str, Any] = field(default_factory=dict)


def generate_dataset(
    network: NetworkModel,
    plan: SamplingPlan,
    critical_filter: Optional[CriticalFilter] = None,
    workers: int = 1,
) -> GenerationResult:
    """
    Sample and label a full dataset with boundary densification.

    Args:
        network: Network model
        plan: Sampling plan
        critical_filter: Critical-eigenvalue rule for the damping index
        workers: Worker processes for labelling (1 = in-process)

    Returns:
        GenerationResult; rows cover all sampled points, infeasible ones flagged
    """
    start = time.time()
    labelled: Dict[int, DatasetRow] = {}

    def classify(points: List[OperatingPoint]) -> List[Optional[bool]]:
        rows = label_points(network, plan, points, critical_filter, workers)
        labelled.update((row.index, row) for row in rows)
        return [row.stable if row.feasible else None for row in rows]

    points = sample(plan, network, classify)
    remaining = [p for p in points if p.index not in labelled]
    for row in label_points(network, plan, remaining, critical_filter, workers):
        labelled[row.index] = row

    rows = [labelled[p.index] for p in points]
    dataset = Dataset(
        feature_names=feature_names(network), control_labels=list(network.controls), rows=rows,
    )
    stable, unstable = dataset.class_balance()
    feasible = stable + unstable
    stats = {
        'n_points': len(rows),
        'feasible': feasible,
        'infeasible': len(rows) - feasible,
        'stable': stable,
        'unstable': unstable,
        'second_pass': sum(1 for p in points if p.pass_index == 2),
        'duration_s': time.time() - start,
    }
    if feasible and min(stable, unstable) < 0.1 * feasible:
        logger.warning(f"Class imbalance: {stable} stable vs {unstable} unstable rows")
    logger.info(
        f"Generated {len(rows)} points: {feasible} feasible ({stable} stable, {unstable} unstable)"
    )
    return GenerationResult(dataset=dataset, stats=stats)
