"""
Operating-point sampling.

This module provides the sampling plan over the operable space and the
two-pass sampler: a Latin-hypercube base sample followed by a second pass
concentrated around the stable/unstable transition found in the first.

Plan coordinates are (total demand, SG share of demand, GFM share of the
remainder, one voltage setpoint per voltage control).
"""

from dataclasses import dataclass, field
import logging
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import qmc

from ..grid.network_ops import label_limits
from ..models.base_models import BaseModel, ValidationResult
from ..models.network_models import NetworkModel, QuantityLabel
from ..power_flow.newton_solver import SetpointVector
from .data_loader_base import DataSourceError

logger = logging.getLogger(__name__)


class SamplingPlanError(DataSourceError):
    """Exception raised for invalid or infeasible sampling bounds."""
    pass


@dataclass
class SamplingPlan(BaseModel):
    """
    Bounds and sizes for dataset generation.

    ``demand_range`` of None uses the network's nominal demand range.
    ``share_label`` is the control that receives ``sg_share`` of the
    demand; ``remainder_label`` receives the non-GFM part of what is left.
    """

    n_points: int = 5000
    demand_range: Optional[Tuple[float, float]] = None
    sg_share_range: Tuple[float, float] = (0.1, 0.6)
    gfm_share_range: Tuple[float, float] = (0.2, 0.9)
    voltage_range: Tuple[float, float] = (0.9, 1.1)
    boundary_densify_fraction: float = 0.3
    neighbours: int = 8
    band_shrink: float = 0.5
    seed: int = 42
    share_label: str = 'P_SG2'
    remainder_label: str = 'P_GFL3'

    def validate(self) -> ValidationResult:
        result = ValidationResult(is_valid=True)
        if self.n_points < 1:
            result.add_error(f"n_points must be at least 1, got {self.n_points}")
        ranges = {
            'sg_share_range': self.sg_share_range,
            'gfm_share_range': self.gfm_share_range,
            'voltage_range': self.voltage_range,
        }
        if self.demand_range is not None:
            ranges['demand_range'] = self.demand_range
        for name, (lo, hi) in ranges.items():
            if not lo <= hi:
                result.add_error(f"{name} lower bound exceeds upper bound: ({lo}, {hi})")
        for name in ('sg_share_range', 'gfm_share_range'):
            lo, hi = getattr(self, name)
            if lo < 0 or hi > 1:
                result.add_error(f"{name} must lie within [0, 1]")
        if self.demand_range is not None and self.demand_range[0] < 0:
            result.add_error("demand_range cannot be negative")
        if not 0.0 <= self.boundary_densify_fraction < 1.0:
            result.add_error("boundary_densify_fraction must lie in [0, 1)")
        if self.neighbours < 1:
            result.add_error("neighbours must be at least 1")
        if self.band_shrink <= 0:
            result.add_error("band_shrink must be positive")
        return result

    def second_pass_size(self) -> int:
        return int(round(self.boundary_densify_fraction * self.n_points))

    def first_pass_size(self) -> int:
        return self.n_points - self.second_pass_size()


@dataclass
class OperatingPoint:
    """One sampled point; ``coords`` are its unit-cube coordinates."""

    index: int
    demand_mw: float
    sg_share: float
    gfm_share: float
    voltages: Tuple[float, ...]
    coords: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0))
    pass_index: int = 1


class PlanSpace:
    """
    Affine map between the unit cube and the plan's physical bounds.

    Also resolves which controls the plan coordinates drive.
    """

    def __init__(self, network: NetworkModel, plan: SamplingPlan):
        validation = plan.validate()
        if not validation.is_valid:
            raise SamplingPlanError("; ".join(validation.errors))

        labels = network.control_labels()
        names = list(network.controls)
        for name in (plan.share_label, plan.remainder_label):
            if name not in names:
                raise SamplingPlanError(f"Plan label {name} is not a control of {network.name}")
        self.network = network
        self.plan = plan
        self.share_index = names.index(plan.share_label)
        self.remainder_index = names.index(plan.remainder_label)
        self.voltage_indices = [i for i, label in enumerate(labels) if label.quantity == 'V']

        demand = plan.demand_range or network.demand_range
        if demand[1] <= 0:
            raise SamplingPlanError("No demand range in the plan or the network")
        lower = [demand[0], plan.sg_share_range[0], plan.gfm_share_range[0]]
        upper = [demand[1], plan.sg_share_range[1], plan.gfm_share_range[1]]
        for i in self.voltage_indices:
            v_lo, v_hi = label_limits(network, labels[i])
            lo, hi = max(plan.voltage_range[0], v_lo), min(plan.voltage_range[1], v_hi)
            if lo > hi:
                raise SamplingPlanError(f"Voltage range is empty for {labels[i]}")
            lower.append(lo)
            upper.append(hi)
        self.lower = np.array(lower, dtype=float)
        self.upper = np.array(upper, dtype=float)

    @property
    def dimension(self) -> int:
        return len(self.lower)

    def to_physical(self, coords: np.ndarray) -> np.ndarray:
        return self.lower + coords * (self.upper - self.lower)

    def point(self, index: int, coords: np.ndarray, pass_index: int) -> OperatingPoint:
        values = self.to_physical(coords)
        return OperatingPoint(
            index=index,
            demand_mw=float(values[0]),
            sg_share=float(values[1]),
            gfm_share=float(values[2]),
            voltages=tuple(float(v) for v in values[3:]),
            coords=np.asarray(coords, dtype=float),
            pass_index=pass_index,
        )

    def to_setpoints(self, point: OperatingPoint) -> SetpointVector:
        """
        Control vector of a sampled point.

        Generator powers are converted to machine base and clipped into
        their operating ranges; the slack source balances the rest.
        """
        network = self.network
        labels = network.control_labels()
        u = np.zeros(len(labels))

        def machine_value(index: int, mw: float) -> float:
            label = labels[index]
            gen = network.generator_by_label(label)
            lo, hi = label_limits(network, label)
            return float(np.clip(mw / gen.rated_mva, lo, hi))

        u[self.share_index] = machine_value(self.share_index, point.sg_share * point.demand_mw)
        share_gen = network.generator_by_label(labels[self.share_index])
        remainder = max(point.demand_mw - u[self.share_index] * share_gen.rated_mva, 0.0)
        u[self.remainder_index] = machine_value(
            self.remainder_index, (1.0 - point.gfm_share) * remainder
        )
        for i, v in zip(self.voltage_indices, point.voltages):
            u[i] = v
        return SetpointVector(u=u, demand_mw=point.demand_mw)


def latin_hypercube(dimension: int, n: int, seed: int) -> np.ndarray:
    """n Latin-hypercube points in the unit cube (deterministic in seed)."""
    if n <= 0:
        return np.zeros((0, dimension))
    return qmc.LatinHypercube(d=dimension, seed=seed).random(n)


def boundary_band(coords: np.ndarray, stable: Sequence[Optional[bool]], neighbours: int) -> np.ndarray:
    """
    Indices of points whose nearest neighbours disagree in class.

    Infeasible points (class None) are left out of the neighbour search:
    they are neither in the band nor counted as either class.

    Args:
        coords: Unit-cube coordinates, one row per point
        stable: Class of each point; None marks an infeasible point
        neighbours: Number of neighbours inspected (excluding the point itself)

    Returns:
        Sorted indices of band points (into ``coords``)
    """
    feasible = np.array([label is not None for label in stable], dtype=bool)
    kept = np.flatnonzero(feasible)
    labels = np.array([bool(stable[i]) for i in kept], dtype=bool)
    n = len(kept)
    if n < 2:
        return np.zeros(0, dtype=int)
    k = min(neighbours + 1, n)
    _, nearest = cKDTree(coords[kept]).query(coords[kept], k=k)
    nearest = np.asarray(nearest).reshape(n, k)
    disagree = np.any(labels[nearest[:, 1:]] != labels[:, None], axis=1)
    return kept[disagree]


def band_radius(plan: SamplingPlan, first_pass: int, dimension: int) -> float:
    """Half-width of the densification box; shrinks with the pass-one spacing."""
    return plan.band_shrink * max(first_pass, 1) ** (-1.0 / dimension)


def densify(
    coords: np.ndarray,
    band: np.ndarray,
    n: int,
    radius: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """
    Draw n unit-cube points uniformly in boxes around random band points.

    Returns:
        (n, d) array clipped to the unit cube
    """
    d = coords.shape[1]
    if n <= 0:
        return np.zeros((0, d))
    centres = coords[rng.choice(band, size=n, replace=True)]
    offsets = rng.uniform(-radius, radius, size=(n, d))
    return np.clip(centres + offsets, 0.0, 1.0)


def sample(
    plan: SamplingPlan,
    network: NetworkModel,
    classify: Optional[Callable[[List[OperatingPoint]], Sequence[Optional[bool]]]] = None,
) -> List[OperatingPoint]:
    """
    Two-pass sample of exactly ``plan.n_points`` operating points.

    Args:
        plan: Sampling plan
        network: Network whose controls the plan drives
        classify: Returns the stability class of pass-one points, None for an
            infeasible one; without it (or with a zero densify fraction) the
            whole sample is Latin hypercube

    Returns:
        Points indexed 0..n-1, pass-one points first
    """
    space = PlanSpace(network, plan)
    d = space.dimension
    n2 = plan.second_pass_size() if classify is not None else 0
    n1 = plan.n_points - n2

    base = latin_hypercube(d, n1, plan.seed)
    points = [space.point(i, c, 1) for i, c in enumerate(base)]
    if n2 == 0:
        return points

    band = boundary_band(base, list(classify(points)), plan.neighbours)
    rng = np.random.default_rng([plan.seed, 2])
    if band.size == 0:
        logger.warning("No stability transition found in the first pass; "
                       "filling the second pass with Latin-hypercube points")
        extra = latin_hypercube(d, n2, plan.seed + 1)
    else:
        radius = band_radius(plan, n1, d)
        logger.info(f"Boundary band: {band.size} of {n1} points, box radius {radius:.4f}")
        extra = densify(base, band, n2, radius, rng)

    points.extend(space.point(n1 + i, c, 2) for i, c in enumerate(extra))
    return points
