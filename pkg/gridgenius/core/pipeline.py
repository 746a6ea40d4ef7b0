"""
End-to-end reproduction pipeline.

Stages run in order and each is timed and recorded by the session log:

    gen-dataset -> fit -> validate -> run -> report -> plots

A failing stage aborts the pipeline with ``PipelineStageError`` naming
the stage. Dataset and model files depend only on the configuration and
seed.
"""

from dataclasses import dataclass, field
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from ..logic.data_sources.data_loader_base import DataSourceError, Dataset
from ..logic.data_sources.data_loader_csv import export_dataset
from ..logic.data_sources.point_labeler import generate_dataset
from ..logic.exporters.export_handler_base import ExportContext, ExportError, ExportResult, ResultTable
from ..logic.exporters.export_handler_csv import CSVExporter, export_tables, read_table, records_table
from ..logic.exporters.export_handler_markdown import MarkdownExporter, pivot_table
from ..logic.exporters.plot_renderer import PlotRenderer
from ..logic.grid.fixture_io import ieee9_fixture, load_network
from ..logic.models.network_models import NetworkModel
from ..logic.optimization.ofo_controller import ControllerError, observable_features
from ..logic.optimization.sqp_solver import OptimizationError
from ..logic.power_flow.newton_solver import PowerFlowError
from ..logic.regression.mars_fit import SurrogateFit, fit_dataset
from ..logic.regression.mars_model import MarsModel, MarsModelError, load_model, reference_model, save_model
from ..logic.utilities.config_utils import PipelineConfig
from ..logic.utilities.logging_utils import OperationTimer, SessionLogger
from .scenario_runner import (
    METHOD_ORDER, REPORT_FILE, Method, RunReport, ScenarioError, build_scenario, run_batch,
)

logger = logging.getLogger(__name__)

DATASET_FILE = 'dataset.csv'
MODEL_FILE = 'mars_model.yaml'
COMPARISON_NAME = 'comparison'
ITERATIONS_NAME = 'iterations'
PLOTS_DIR = 'plots'
SWEEP_FILE = 'sweep.csv'


class PipelineStageError(Exception):
    """Exception raised when a pipeline stage fails."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"{stage}: {message}")
        self.stage = stage


def load_pipeline_network(config: PipelineConfig) -> NetworkModel:
    """Configured network file, or the bundled 9-bus fixture."""
    if config.network_path:
        return load_network(config.network_path)
    return ieee9_fixture()


def load_stability_model(path: Optional[str]) -> MarsModel:
    """Model file at ``path``, or the bundled reference surrogate."""
    return load_model(path) if path else reference_model()


def build_scenarios(
    network: NetworkModel,
    config: PipelineConfig,
    methods: Sequence[Method],
    cases: Optional[Sequence[str]] = None,
    stability_model_path: Optional[str] = None,
):
    """Scenarios for every (case, method) pair; cases default to all configured ones."""
    settings = [config.scenario(name) for name in cases] if cases else list(config.scenarios)
    scenarios = []
    for case in settings:
        for method in methods:
            scenarios.append(build_scenario(
                network, case, method, config.controller, stability_model_path, noise_seed=config.seed,
            ))
    return scenarios


def run_scenarios(
    network: NetworkModel,
    config: PipelineConfig,
    methods: Sequence[Method],
    stability_model: Optional[MarsModel],
    out_dir: Path,
    cases: Optional[Sequence[str]] = None,
    stability_model_path: Optional[str] = None,
) -> List[RunReport]:
    scenarios = build_scenarios(network, config, methods, cases, stability_model_path)
    return run_batch(
        network, scenarios, stability_model, config.filter.to_filter(), out_dir, config.run_workers,
    )


# ------------------------------------------------------------------
# Comparison tables
# ------------------------------------------------------------------

@dataclass
class ComparisonResult:
    """Comparison table, iteration table and the files written for them."""

    comparison: ResultTable
    iterations: ResultTable
    paths: Dict[str, Path] = field(default_factory=dict)
    all_converged: bool = True


def load_reports(out_dir: Path) -> List[Dict[str, Any]]:
    """Saved run reports under ``out_dir`` (one per run directory)."""
    reports = []
    for path in sorted(Path(out_dir).glob(f"*/{REPORT_FILE}")):
        with open(path, 'r', encoding='utf-8') as f:
            reports.append(json.load(f))
    return reports


def compare_runs(out_dir: Path, case_order: Optional[Sequence[str]] = None) -> ComparisonResult:
    """
    Rebuild the comparison and iteration-count tables from saved reports.

    Rows are ordered by case (``case_order`` first, then by name) and by
    method. Writes comparison.csv, iterations.csv and comparison.md.

    Raises:
        ExportError: If no reports are found
    """
    out_dir = Path(out_dir)
    reports = load_reports(out_dir)
    if not reports:
        raise ExportError(f"No run reports under {out_dir}")

    cases = sorted({r['case'] for r in reports})
    if case_order:
        cases = [c for c in case_order if c in cases] + [c for c in cases if c not in case_order]
    methods = [m.value for m in METHOD_ORDER]
    reports.sort(key=lambda r: (cases.index(r['case']), methods.index(r['method'])))

    rows = [r['row'] for r in reports]
    comparison = records_table(COMPARISON_NAME, rows, title='Solutions summary')
    iterations = pivot_table(
        [{'method': r['row']['method'], 'case': r['case'], 'iterations': r['iterations']} for r in reports],
        row_key='method', column_key='case', value_key='iterations', name=ITERATIONS_NAME,
        title='Iterations to convergence', column_order=cases,
        row_order=[m.display_name for m in METHOD_ORDER],
    )

    context = ExportContext(output_directory=out_dir, run_id='compare')
    paths = export_tables(CSVExporter(context), [comparison, iterations])
    md = MarkdownExporter(context).export_report([comparison, iterations], title='Method comparison',
                                                 name=COMPARISON_NAME)
    if not md.success:
        raise ExportError(md.error_message)
    paths['markdown'] = md.output_path
    return ComparisonResult(
        comparison=comparison,
        iterations=iterations,
        paths=paths,
        all_converged=all(r['converged'] for r in reports),
    )


# ------------------------------------------------------------------
# Figures
# ------------------------------------------------------------------

def plot_results(out_dir: Path, network: NetworkModel, theta: Optional[float] = None) -> List[ExportResult]:
    """Render PNG figures for every CSV found under ``out_dir`` into ``out_dir/plots``."""
    out_dir = Path(out_dir)
    renderer = PlotRenderer(ExportContext(output_directory=out_dir / PLOTS_DIR, run_id='plot'))
    results: List[ExportResult] = []

    by_case: Dict[str, Dict[str, Dict[str, ResultTable]]] = {}
    for report in load_reports(out_dir):
        run_dir = out_dir / f"{report['case']}_{report['method']}"
        label = Method(report['method']).display_name
        tables = by_case.setdefault(report['case'], {'modal': {}, 'voltage': {}})
        trajectory = run_dir / 'trajectory.csv'
        if trajectory.exists():
            table = read_table(trajectory)
            table.title = f"{label}, {report['case']} demand"
            results.append(renderer.render_trajectory(
                table, list(network.controls), name=f"{run_dir.name}_trajectory",
                threshold=theta if Method(report['method']).stability_constrained else None,
            ))
        if (run_dir / 'modal.csv').exists():
            tables['modal'][label] = read_table(run_dir / 'modal.csv')
        if (run_dir / 'voltage_profile.csv').exists():
            tables['voltage'][label] = read_table(run_dir / 'voltage_profile.csv')

    limits = (min(b.v_min for b in network.buses), max(b.v_max for b in network.buses))
    for case, tables in by_case.items():
        if tables['modal']:
            results.append(renderer.render_modal_map(tables['modal'], name=f"{case}_modal_map"))
        if tables['voltage']:
            results.append(renderer.render_voltage_profiles(
                tables['voltage'], name=f"{case}_voltage_profiles", limits=limits,
            ))

    if (out_dir / SWEEP_FILE).exists():
        sweep_table = read_table(out_dir / SWEEP_FILE)
        for gen in network.generators:
            results.append(renderer.render_stability_scatter(
                sweep_table, f"P_{gen.label}_MW", f"V{gen.bus}", name=f"sweep_{gen.label}",
                title=f"OPF optima: {gen.label}",
            ))

    if (out_dir / DATASET_FILE).exists():
        results.append(renderer.render_stability_scatter(
            read_table(out_dir / DATASET_FILE), 'V1', 'V6', name='dataset_V1_V6',
            title='Labelled dataset', di_column='DI',
        ))
    failed = [r for r in results if not r.success]
    if failed:
        logger.warning(f"{len(failed)} of {len(results)} figures failed")
    return results


# ------------------------------------------------------------------
# Pipeline
# ------------------------------------------------------------------

@dataclass
class PipelineResult:
    """Artifacts and outcome of a pipeline run."""

    output_directory: Path
    dataset_path: Optional[Path] = None
    model_path: Optional[Path] = None
    fit: Optional[SurrogateFit] = None
    reports: List[RunReport] = field(default_factory=list)
    comparison: Optional[ComparisonResult] = None
    figures: List[ExportResult] = field(default_factory=list)
    session_summary: Dict[str, Any] = field(default_factory=dict)

    @property
    def success(self) -> bool:
        return bool(self.reports) and all(r.converged for r in self.reports)


class Pipeline:
    """
    Runs the configured stages against one output directory.

    Each stage method can also be called on its own (the CLI subcommands
    do); ``run`` chains them.
    """

    def __init__(self, config: PipelineConfig, network: Optional[NetworkModel] = None):
        self.config = config
        self.network = network or load_pipeline_network(config)
        self.out = Path(config.output_directory)
        self.session: Optional[SessionLogger] = None

    def _stage(self, name: str, context: Optional[Dict[str, Any]] = None) -> OperationTimer:
        return OperationTimer(name, self.session, context)

    def _artifact(self, path: Optional[Path]) -> Optional[Path]:
        if self.session is not None and path is not None:
            self.session.artifact_written(path)
        return path

    def generate(self, path: Optional[Path] = None) -> Dataset:
        plan = self.config.sampling.to_plan(self.config.seed)
        generation = generate_dataset(
            self.network, plan, self.config.filter.to_filter(), self.config.sampling.workers,
        )
        target = Path(path) if path else self.out / DATASET_FILE
        written = export_dataset(generation.dataset.rows, target, self.network)
        self._artifact(target)
        logger.info(f"Dataset: {written} feasible rows written, stats {generation.stats}")
        return generation.dataset

    def fit(self, dataset: Dataset, path: Optional[Path] = None) -> SurrogateFit:
        fit_settings = self.config.fit
        candidates = fit_settings.candidate_features or observable_features(
            self.network, dataset.feature_names,
        )
        result = fit_dataset(
            dataset, fit_settings.to_fit_config(), candidates, fit_settings.test_fraction, self.config.seed,
        )
        target = Path(path) if path else self.out / MODEL_FILE
        save_model(result.model, target)
        self._artifact(target)
        return result

    def validate_fit(self, fit: SurrogateFit) -> None:
        if not fit.test_r2 >= self.config.fit.min_test_r2:
            raise PipelineStageError(
                'validate', f"held-out R^2 {fit.test_r2:.5f} below {self.config.fit.min_test_r2}",
            )

    def run(self) -> PipelineResult:
        """
        Execute every stage.

        Raises:
            PipelineStageError: The first failing stage
        """
        self.out.mkdir(parents=True, exist_ok=True)
        self.session = SessionLogger(self.out / 'logs')
        result = PipelineResult(output_directory=self.out)
        model_path = self.out / MODEL_FILE
        try:
            with self._guarded('gen-dataset', {'n_points': self.config.sampling.n_points}):
                dataset = self.generate()
                result.dataset_path = self.out / DATASET_FILE
            with self._guarded('fit'):
                result.fit = self.fit(dataset, model_path)
                result.model_path = model_path
            with self._guarded('validate', {'test_r2': result.fit.test_r2}):
                self.validate_fit(result.fit)
            with self._guarded('run', {'scenarios': len(self.config.scenarios)}):
                result.reports = run_scenarios(
                    self.network, self.config, METHOD_ORDER, result.fit.model, self.out,
                    stability_model_path=str(model_path),
                )
            with self._guarded('report'):
                result.comparison = compare_runs(self.out, [s.name for s in self.config.scenarios])
                for path in result.comparison.paths.values():
                    self._artifact(path)
            with self._guarded('plots'):
                result.figures = plot_results(self.out, self.network, self.config.controller.theta)
        finally:
            self.session.end_session()
            result.session_summary = self.session.get_summary()
        return result

    def _guarded(self, stage: str, context: Optional[Dict[str, Any]] = None) -> '_StageGuard':
        return _StageGuard(self._stage(stage, context), stage)


class _StageGuard:
    """Times a stage and re-raises domain failures as PipelineStageError."""

    DOMAIN_ERRORS = (
        DataSourceError, MarsModelError, ScenarioError, ExportError, PowerFlowError,
        ControllerError, OptimizationError, OSError,
    )

    def __init__(self, timer: OperationTimer, stage: str):
        self.timer = timer
        self.stage = stage

    def __enter__(self) -> OperationTimer:
        return self.timer.__enter__()

    def __exit__(self, exc_type, exc_val, exc_tb) -> bool:
        self.timer.__exit__(exc_type, exc_val, exc_tb)
        if exc_type is not None and not issubclass(exc_type, PipelineStageError) \
                and issubclass(exc_type, self.DOMAIN_ERRORS):
            raise PipelineStageError(self.stage, str(exc_val)) from exc_val
        return False


def run_pipeline(config: PipelineConfig, network: Optional[NetworkModel] = None) -> PipelineResult:
    return Pipeline(config, network).run()
