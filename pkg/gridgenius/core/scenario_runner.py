"""
Closed-loop scenario runner and OPF sweep.

A scenario couples one method to the plant at one demand level. Online
methods iterate plant solve -> measurement -> sensitivity -> controller
step; offline OPF methods solve the optimization directly. Every run
writes its own directory with a JSON report and the CSV plot data.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import partial
import json
import logging
import math
from pathlib import Path
import time
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..logic.exporters.export_handler_base import ExportContext
from ..logic.exporters.export_handler_csv import (
    CSVExporter, export_tables, modal_table, records_table, trajectory_table, voltage_table,
)
from ..logic.grid.network_ops import build_constraints
from ..logic.models.base_models import BaseModel, ValidationResult
from ..logic.models.network_models import NetworkModel
from ..logic.optimization.objective import QuadraticObjective
from ..logic.optimization.ofo_controller import (
    ControllerError, ControllerState, OfoConfig, OfoController, SurrogateInputs, TrajectoryEntry,
)
from ..logic.optimization.opf_problem import OpfMode, OpfProblem, report_row, solve_opf
from ..logic.optimization.sqp_solver import OptimizationError, SqpSettings
from ..logic.power_flow.newton_solver import (
    PowerFlowError, PowerFlowSolution, SetpointVector, measure, nominal_demand_for, solve,
)
from ..logic.power_flow.sensitivity import sensitivity
from ..logic.regression.mars_model import MarsModel, MarsModelError, r2
from ..logic.small_signal.device_models import LinearizationError
from ..logic.small_signal.modal_analysis import (
    CriticalFilter, ModalAnalysisError, ModalResult, evaluate_stability,
)
from ..logic.utilities.config_utils import ControllerSettings, ScenarioSettings

logger = logging.getLogger(__name__)

REPORT_FILE = 'report.json'


class ScenarioError(Exception):
    """Exception raised when a run cannot produce any result."""
    pass


class Method(str, Enum):
    """Solution method of a scenario run."""
    OFO = 'ofo'
    SSSC_OFO = 'sssc_ofo'
    OPF = 'opf'
    SSSC_OPF = 'sssc_opf'
    OPF_V1CAP = 'opf_v1cap'

    @property
    def closed_loop(self) -> bool:
        return self in (Method.OFO, Method.SSSC_OFO)

    @property
    def stability_constrained(self) -> bool:
        return self in (Method.SSSC_OFO, Method.SSSC_OPF)

    @property
    def display_name(self) -> str:
        return _DISPLAY_NAMES[self]

    @property
    def opf_mode(self) -> OpfMode:
        return {Method.OPF: OpfMode.PLAIN, Method.SSSC_OPF: OpfMode.MARS,
                Method.OPF_V1CAP: OpfMode.V1CAP}[self]


_DISPLAY_NAMES = {
    Method.OFO: 'OFO',
    Method.SSSC_OFO: 'SSSC-OFO',
    Method.OPF: 'OPF',
    Method.SSSC_OPF: 'SSSC-OPF',
    Method.OPF_V1CAP: 'OPF-V1Cap',
}
METHOD_ORDER = (Method.OPF, Method.OFO, Method.SSSC_OFO, Method.SSSC_OPF, Method.OPF_V1CAP)


@dataclass
class Scenario(BaseModel):
    """
    One demand case solved by one method.

    ``demand_mw`` is the nominal total demand; ``realized_target_mw`` is
    the realized demand it was chosen to reproduce at ``initial_u``. A
    converged run that misses the target is solved again with the nominal
    demand re-targeted at its final controls (``controller.demand_passes``).
    """

    name: str
    method: Method
    demand_mw: float
    initial_u: np.ndarray
    gamma: float
    alpha: float
    metric: Tuple[float, ...]
    controller: ControllerSettings = field(default_factory=ControllerSettings)
    realized_target_mw: Optional[float] = None
    stability_model_path: Optional[str] = None
    noise_seed: int = 0

    def __post_init__(self) -> None:
        self.method = Method(self.method)
        self.initial_u = np.asarray(self.initial_u, dtype=float)
        self.metric = tuple(float(g) for g in self.metric)

    @property
    def run_name(self) -> str:
        return f"{self.name}_{self.method.value}"

    def validate(self) -> ValidationResult:
        result = ValidationResult(is_valid=True)
        if not self.demand_mw > 0:
            result.add_error(f"Demand must be positive, got {self.demand_mw}")
        if self.gamma <= 0 or self.alpha <= 0:
            result.add_error("gamma and alpha must be positive")
        if len(self.metric) != len(self.initial_u):
            result.add_error("metric and initial_u lengths differ")
        return result

    def ofo_config(self) -> OfoConfig:
        c = self.controller
        return OfoConfig(
            alpha=self.alpha, gamma=self.gamma, metric=self.metric, theta=c.theta,
            epsilon_margin=c.epsilon_margin, convergence_tol=c.convergence_tol, max_iter=c.max_iter,
        )

    def sqp_settings(self) -> SqpSettings:
        return SqpSettings(max_iter=self.controller.sqp_max_iter, kkt_tol=self.controller.sqp_kkt_tol)


def build_scenario(
    network: NetworkModel,
    settings: ScenarioSettings,
    method: Method,
    controller: Optional[ControllerSettings] = None,
    stability_model_path: Optional[str] = None,
    noise_seed: int = 0,
) -> Scenario:
    """Scenario with the nominal demand that realizes the configured demand at the initial u."""
    demand = nominal_demand_for(network, settings.initial_u, settings.realized_demand_mw)
    method = Method(method)
    return Scenario(
        name=settings.name,
        method=method,
        demand_mw=demand,
        initial_u=np.asarray(settings.initial_u, dtype=float),
        gamma=float(settings.gamma[method.value]),
        alpha=float(settings.alpha),
        metric=tuple(settings.metric),
        controller=controller or ControllerSettings(),
        realized_target_mw=settings.realized_demand_mw,
        stability_model_path=stability_model_path,
        noise_seed=noise_seed,
    )


@dataclass
class RunReport(BaseModel):
    """Final state of one run and the paths of its exported data."""

    case: str
    method: Method
    converged: bool
    iterations: int
    u: np.ndarray
    y: np.ndarray
    phi: float
    di_predicted: float
    di_exact: float
    demand_mw: float
    realized_demand_mw: float
    voltage_profile: np.ndarray
    kkt_residual: float
    fallback_steps: int = 0
    message: str = ''
    row: Dict[str, Any] = field(default_factory=dict)
    run_directory: Optional[Path] = None
    trajectory_path: Optional[Path] = None
    voltage_path: Optional[Path] = None
    modal_path: Optional[Path] = None
    duration_s: float = 0.0

    @property
    def stable(self) -> bool:
        return self.di_exact < 1.0

    def validate(self) -> ValidationResult:
        result = ValidationResult(is_valid=True)
        if not self.converged:
            result.add_warning(f"{self.case}/{self.method.value} did not converge: {self.message}")
        if math.isnan(self.di_exact):
            result.add_warning(f"{self.case}/{self.method.value}: exact damping index unavailable")
        return result


def predicted_di(network: NetworkModel, model: Optional[MarsModel], u: np.ndarray, y: np.ndarray) -> float:
    """Surrogate damping index at (u, y); NaN without a usable model."""
    if model is None:
        return math.nan
    try:
        return float(model.predict(SurrogateInputs(network, model.feature_names).values(u, y)))
    except (MarsModelError, ControllerError) as e:
        logger.warning(f"Surrogate prediction unavailable: {e}")
        return math.nan


def modal_at(
    network: NetworkModel,
    sol: PowerFlowSolution,
    critical_filter: Optional[CriticalFilter],
) -> Optional[ModalResult]:
    try:
        return evaluate_stability(network, sol.setpoints, critical_filter, sol=sol).result
    except (PowerFlowError, LinearizationError, ModalAnalysisError) as e:
        logger.warning(f"Modal analysis failed at the final point: {e}")
        return None


@dataclass
class _LoopOutcome:
    state: ControllerState
    solution: PowerFlowSolution
    converged: bool
    message: str
    kkt_residual: float


def _closed_loop(
    network: NetworkModel,
    scenario: Scenario,
    controller: OfoController,
) -> _LoopOutcome:
    """Iterate the controller against the power-flow plant."""
    noise_std = scenario.controller.measurement_noise_std
    rng = np.random.default_rng(scenario.noise_seed)
    state = controller.initial_state(scenario.initial_u)
    last_good: Optional[Tuple[ControllerState, PowerFlowSolution]] = None
    last_F: Optional[np.ndarray] = None
    message = f"iteration limit ({scenario.controller.max_iter}) reached"
    converged = False

    for _ in range(scenario.controller.max_iter):
        sol = _plant(network, state.u, scenario.demand_mw)
        if sol is None:
            message = f"plant diverged at iteration {state.iteration}"
            logger.warning(f"{scenario.run_name}: {message}")
            break
        last_good = (state, sol)
        y = measure(network, sol)
        if noise_std > 0:
            y = y + rng.normal(0.0, noise_std, size=len(y))
        last_F = sensitivity(network, sol.setpoints, sol).F
        state = controller.step(state, y, last_F)
        if controller.has_converged(state):
            converged = True
            message = 'direction norm within tolerance'
            break

    if last_good is None:
        raise ScenarioError(f"{scenario.run_name}: plant cannot be solved at the initial point")

    final = _plant(network, state.u, scenario.demand_mw) if state is not last_good[0] else None
    if final is None:
        # report the last point the plant could solve
        if converged:
            message = 'plant diverged at the final point'
        state, final = last_good
        return _LoopOutcome(state=state, solution=final, converged=False, message=message,
                            kkt_residual=math.nan)

    return _LoopOutcome(state=state, solution=final, converged=converged, message=message,
                        kkt_residual=controller.kkt_residual(state, last_F))


def _plant(network: NetworkModel, u: np.ndarray, demand_mw: float) -> Optional[PowerFlowSolution]:
    try:
        sol = solve(network, SetpointVector(u=u, demand_mw=demand_mw))
    except PowerFlowError as e:
        logger.debug(f"Plant solve failed: {e}")
        return None
    return sol if sol.converged else None


@dataclass
class _SolveOutcome:
    solution: PowerFlowSolution
    u: np.ndarray
    converged: bool
    message: str
    iterations: int
    kkt_residual: float
    trajectory: Tuple[TrajectoryEntry, ...] = ()


def _solve_once(
    network: NetworkModel,
    scenario: Scenario,
    objective: QuadraticObjective,
    stability_model: Optional[MarsModel],
    critical_filter: Optional[CriticalFilter],
) -> _SolveOutcome:
    """One closed-loop run or OPF solve at the scenario's nominal demand."""
    if scenario.method.closed_loop:
        controller = OfoController(
            network, objective, scenario.ofo_config(),
            constraints=build_constraints(network),
            stability_model=stability_model if scenario.method.stability_constrained else None,
        )
        loop = _closed_loop(network, scenario, controller)
        return _SolveOutcome(
            solution=loop.solution, u=loop.state.u, converged=loop.converged, message=loop.message,
            iterations=loop.state.iteration, kkt_residual=loop.kkt_residual,
            trajectory=loop.state.trajectory,
        )

    problem = OpfProblem(
        network=network, demand_mw=scenario.demand_mw, objective=objective,
        mode=scenario.method.opf_mode, gamma=scenario.gamma, stability_model=stability_model,
        theta=scenario.controller.theta, epsilon_margin=scenario.controller.epsilon_margin,
    )
    try:
        opf = solve_opf(problem, scenario.initial_u, scenario.sqp_settings(), critical_filter)
    except OptimizationError as e:
        raise ScenarioError(f"{scenario.run_name}: {e}") from e
    return _SolveOutcome(
        solution=opf.solution, u=np.asarray(opf.u, dtype=float), converged=opf.converged,
        message=opf.message, iterations=opf.iterations, kkt_residual=opf.kkt_residual,
    )


def _write_run(
    network: NetworkModel,
    report: RunReport,
    sol: PowerFlowSolution,
    modal: Optional[ModalResult],
    trajectory,
    out_dir: Path,
) -> RunReport:
    run_dir = out_dir / f"{report.case}_{report.method.value}"
    context = ExportContext(output_directory=run_dir, run_id=run_dir.name)
    tables = [voltage_table(network, sol)]
    if trajectory:
        tables.append(trajectory_table(network, trajectory))
    if modal is not None:
        tables.append(modal_table(modal))
    paths = export_tables(CSVExporter(context), tables)

    report.run_directory = run_dir
    report.voltage_path = paths.get('voltage_profile')
    report.trajectory_path = paths.get('trajectory')
    report.modal_path = paths.get('modal')
    with open(run_dir / REPORT_FILE, 'w', encoding='utf-8') as f:
        json.dump(report.to_dict(), f, indent=2, allow_nan=True)
    return report


def run_scenario(
    network: NetworkModel,
    scenario: Scenario,
    stability_model: Optional[MarsModel] = None,
    critical_filter: Optional[CriticalFilter] = None,
    out_dir: Optional[Path] = None,
) -> RunReport:
    """
    Run one scenario to convergence.

    Online methods close the loop through the plant; OPF methods solve
    directly. ``stability_model`` is required by the stability-constrained
    methods and otherwise only used for the predicted damping index.

    Raises:
        ScenarioError: Invalid scenario, missing model or no solvable point
    """
    validation = scenario.validate()
    if not validation.is_valid:
        raise ScenarioError("; ".join(validation.errors))
    if scenario.method.stability_constrained and stability_model is None:
        raise ScenarioError(f"{scenario.method.display_name} requires a stability model")

    start = time.perf_counter()
    objective = QuadraticObjective(network)
    target = scenario.realized_target_mw
    outcome = _solve_once(network, scenario, objective, stability_model, critical_filter)
    iterations = outcome.iterations
    trajectory = outcome.trajectory
    passes = 1
    while (target is not None and outcome.converged
           and passes < scenario.controller.demand_passes
           and abs(outcome.solution.realized_demand_mw - target) > scenario.controller.demand_tol_mw):
        try:
            demand = nominal_demand_for(network, outcome.u, target)
        except PowerFlowError as e:
            logger.warning(f"{scenario.run_name}: demand re-targeting stopped: {e}")
            break
        logger.debug(
            f"{scenario.run_name}: realized {outcome.solution.realized_demand_mw:.3f} MW, "
            f"re-solving at nominal {demand:.3f} MW"
        )
        scenario = replace(scenario, demand_mw=demand, initial_u=outcome.u)
        outcome = _solve_once(network, scenario, objective, stability_model, critical_filter)
        trajectory = trajectory + tuple(
            replace(entry, iteration=entry.iteration + iterations) for entry in outcome.trajectory
        )
        iterations += outcome.iterations
        passes += 1

    sol, converged, message, u = outcome.solution, outcome.converged, outcome.message, outcome.u
    kkt = outcome.kkt_residual
    fallback_steps = sum(1 for entry in trajectory if entry.fallback)

    y = measure(network, sol)
    phi = objective.value(u, y)
    modal = modal_at(network, sol, critical_filter)
    di_exact = modal.di if modal is not None else math.nan
    di_hat = predicted_di(network, stability_model, u, y)

    report = RunReport(
        case=scenario.name,
        method=scenario.method,
        converged=converged,
        iterations=iterations,
        u=np.array(u),
        y=y,
        phi=phi,
        di_predicted=di_hat,
        di_exact=di_exact,
        demand_mw=scenario.demand_mw,
        realized_demand_mw=sol.realized_demand_mw,
        voltage_profile=sol.vm.copy(),
        kkt_residual=kkt,
        fallback_steps=fallback_steps,
        message=message,
        row=report_row(network, scenario.name, scenario.method.display_name, sol, phi,
                       di_hat, di_exact, iterations, converged),
    )
    if out_dir is not None:
        _write_run(network, report, sol, modal, trajectory, Path(out_dir))
    report.duration_s = time.perf_counter() - start
    logger.info(
        f"{scenario.run_name}: converged = {converged} after {iterations} iterations, "
        f"phi = {phi:.6f}, DI exact = {di_exact:.6f}"
    )
    return report


def _run_one(
    network: NetworkModel,
    stability_model: Optional[MarsModel],
    critical_filter: Optional[CriticalFilter],
    out_dir: Optional[Path],
    scenario: Scenario,
) -> RunReport:
    return run_scenario(network, scenario, stability_model, critical_filter, out_dir)


def run_batch(
    network: NetworkModel,
    scenarios: Sequence[Scenario],
    stability_model: Optional[MarsModel] = None,
    critical_filter: Optional[CriticalFilter] = None,
    out_dir: Optional[Path] = None,
    workers: int = 1,
) -> List[RunReport]:
    """Run scenarios in order (or across worker processes); reports keep the input order."""
    task = partial(_run_one, network, stability_model, critical_filter, out_dir)
    if workers <= 1 or len(scenarios) <= 1:
        return [task(s) for s in scenarios]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(task, scenarios))


@dataclass
class SweepResult:
    """Labelled OPF optima over a demand grid."""

    rows: List[Dict[str, Any]]
    failures: int
    surrogate_r2: Optional[float] = None
    table_path: Optional[Path] = None

    @property
    def unstable_fraction(self) -> float:
        if not self.rows:
            return math.nan
        return sum(1 for row in self.rows if row['DI_exact'] >= 1.0) / len(self.rows)


def _sweep_point(
    network: NetworkModel,
    gamma: float,
    initial_u: np.ndarray,
    stability_model: Optional[MarsModel],
    critical_filter: Optional[CriticalFilter],
    settings: SqpSettings,
    item: Tuple[int, float],
) -> Optional[Dict[str, Any]]:
    index, demand = item
    objective = QuadraticObjective(network)
    problem = OpfProblem(network=network, demand_mw=demand, objective=objective,
                         mode=OpfMode.PLAIN, gamma=gamma, stability_model=stability_model)
    try:
        opf = solve_opf(problem, initial_u, settings, critical_filter)
    except (OptimizationError, PowerFlowError) as e:
        logger.warning(f"Sweep point {index} ({demand:.2f} MW) failed: {e}")
        return None
    sol = opf.solution
    row: Dict[str, Any] = {'index': index, 'demand_MW': float(demand)}
    row.update(report_row(network, 'sweep', 'OPF', sol, opf.objective, opf.di_predicted,
                          opf.di_exact, opf.iterations, opf.converged))
    del row['case'], row['method']
    for i, bus in enumerate(network.buses):
        row[f"V{bus.id}"] = float(sol.vm[i])
    return row


def sweep(
    network: NetworkModel,
    n_points: int,
    demand_range: Optional[Sequence[float]] = None,
    gamma: float = 100.0,
    initial_u: Optional[Sequence[float]] = None,
    stability_model: Optional[MarsModel] = None,
    critical_filter: Optional[CriticalFilter] = None,
    settings: Optional[SqpSettings] = None,
    out_dir: Optional[Path] = None,
    workers: int = 1,
) -> SweepResult:
    """
    Solve the plain OPF on a uniform demand grid and label every optimum.

    Failed points are logged and skipped. With a stability model the
    surrogate R^2 on the optima is reported as well.

    Raises:
        ScenarioError: If n_points < 1
    """
    if n_points < 1:
        raise ScenarioError(f"n_points must be at least 1, got {n_points}")
    lo, hi = demand_range if demand_range is not None else network.demand_range
    demands = np.linspace(lo, hi, n_points) if n_points > 1 else np.array([0.5 * (lo + hi)])
    u0 = np.asarray(initial_u if initial_u is not None else [0.5, 0.5, 1.0, 1.0, 1.0], dtype=float)
    task = partial(_sweep_point, network, gamma, u0, stability_model, critical_filter,
                   settings or SqpSettings())
    items = list(enumerate(float(d) for d in demands))
    if workers <= 1:
        results = [task(item) for item in items]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(task, items))

    rows = [row for row in results if row is not None]
    result = SweepResult(rows=rows, failures=len(results) - len(rows))
    if stability_model is not None:
        pairs = [(r['DI_exact'], r['DI_mars']) for r in rows
                 if math.isfinite(r['DI_exact']) and math.isfinite(r['DI_mars'])]
        try:
            result.surrogate_r2 = r2([p[0] for p in pairs], [p[1] for p in pairs])
        except MarsModelError as e:
            logger.warning(f"Surrogate R^2 on the optima unavailable: {e}")

    if out_dir is not None and rows:
        context = ExportContext(output_directory=Path(out_dir), run_id='sweep')
        table = records_table('sweep', rows, title='OPF optima over demand')
        result.table_path = export_tables(CSVExporter(context), [table])['sweep']
    logger.info(
        f"Sweep: {len(rows)} optima, {result.failures} failures, "
        f"unstable fraction {result.unstable_fraction:.3f}"
    )
    return result
