"""
GridGenius command-line interface.

Subcommands cover each pipeline stage plus the full pipeline:

    gen-dataset   sample and label operating points
    fit           fit the stability surrogate on a dataset
    run-ofo       closed-loop OFO / SSSC-OFO runs on the configured cases
    run-opf       offline OPF baselines (plain, surrogate-constrained, V1 cap)
    sweep         plain OPF over a demand grid, optima labelled with the exact DI
    pipeline      gen-dataset -> fit -> validate -> run -> report -> plots
    compare       rebuild the comparison tables from saved run reports
    plot          render figures from the emitted CSV files

Exit status is 0 only when every run converged.
"""

import argparse
from dataclasses import asdict, replace
import logging
from pathlib import Path
import sys
from typing import Any, Dict, List, Optional, Sequence

import yaml
from rich.console import Console
from rich.table import Table

from ..core.pipeline import (
    DATASET_FILE, MODEL_FILE, SWEEP_FILE, Pipeline, PipelineStageError, compare_runs,
    load_pipeline_network, load_stability_model, plot_results, run_scenarios,
)
from ..core.scenario_runner import Method, RunReport, ScenarioError, sweep
from ..logic.data_sources.data_loader_base import DataSourceError
from ..logic.data_sources.data_loader_csv import import_dataset
from ..logic.exporters.export_handler_base import ExportError
from ..logic.models.network_models import NetworkDataError
from ..logic.optimization.ofo_controller import ControllerError
from ..logic.optimization.sqp_solver import OptimizationError, SqpSettings
from ..logic.power_flow.newton_solver import PowerFlowError
from ..logic.regression.mars_model import MarsModelError
from ..logic.utilities.config_utils import (
    ConfigError, ConfigValidator, PipelineConfig, apply_overrides, config_from_dict, get_config_manager,
    load_scenarios,
)
from ..logic.utilities.logging_utils import LoggingConfigurator

logger = logging.getLogger(__name__)
console = Console()

DOMAIN_ERRORS = (
    ConfigError, NetworkDataError, PowerFlowError, DataSourceError, MarsModelError,
    ControllerError, OptimizationError, ScenarioError, ExportError, PipelineStageError,
)

OPF_MODES = {'plain': Method.OPF, 'mars': Method.SSSC_OPF, 'v1cap': Method.OPF_V1CAP}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='gridgenius',
        description="Small-signal-stability-constrained online feedback optimization toolkit.",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s pipeline --seed 7 --out results
  %(prog)s run-ofo --cases low medium --sssc
  %(prog)s run-opf --mode v1cap
  %(prog)s sweep --points 100 --model results/mars_model.yaml
        """
    )
    parser.add_argument('--config', type=str, help='Pipeline configuration file (YAML or JSON)')
    parser.add_argument('--seed', type=int, help='Override the configured seed')
    parser.add_argument('--out', type=str, help='Override the output directory')
    parser.add_argument('--verbose', action='store_true', help='Enable debug logging on the console')

    sub = parser.add_subparsers(dest='command', required=True)

    gen = sub.add_parser('gen-dataset', help='Sample and label operating points')
    gen.add_argument('--plan', type=str, help='YAML file with sampling settings')
    gen.add_argument('--points', type=int, help='Override the number of points')
    gen.add_argument('--dataset', '--out', dest='dataset', type=str,
                     help=f'Output dataset file (default <out>/{DATASET_FILE})')

    fit = sub.add_parser('fit', help='Fit the stability surrogate')
    fit.add_argument('--dataset', type=str, help=f'Dataset file (default <out>/{DATASET_FILE})')
    fit.add_argument('--config', dest='sub_config', type=str, help='Configuration file (same as the global flag)')
    fit.add_argument('--model', '--out', dest='model', type=str,
                     help=f'Output model file (default <out>/{MODEL_FILE})')

    ofo = sub.add_parser('run-ofo', help='Closed-loop OFO runs')
    ofo.add_argument('--cases', nargs='+', help='Case names (default: all configured)')
    group = ofo.add_mutually_exclusive_group()
    group.add_argument('--sssc', action='store_true', help='Only the stability-constrained controller')
    group.add_argument('--plain', action='store_true', help='Only the unconstrained controller')
    ofo.add_argument('--model', type=str, help='Stability model file (default: bundled reference)')
    ofo.add_argument('--scenario', type=str, help='YAML file with the demand case(s) to run')
    ofo.add_argument('--out', dest='run_out', type=str, help='Output directory for this run')

    opf = sub.add_parser('run-opf', help='Offline OPF baselines')
    opf.add_argument('--mode', choices=sorted(OPF_MODES), nargs='+', default=sorted(OPF_MODES),
                     help='OPF variants to solve')
    opf.add_argument('--cases', nargs='+', help='Case names (default: all configured)')
    opf.add_argument('--model', type=str, help='Stability model file (default: bundled reference)')
    opf.add_argument('--scenario', type=str, help='YAML file with the demand case(s) to run')
    opf.add_argument('--out', dest='run_out', type=str, help='Output directory for this run')

    sw = sub.add_parser('sweep', help='Plain OPF over a uniform demand grid')
    sw.add_argument('--points', type=int, help='Override the number of demand points')
    sw.add_argument('--model', type=str, help='Stability model used for the predicted DI')

    sub.add_parser('pipeline', help='Run every stage')
    sub.add_parser('compare', help='Rebuild comparison tables from saved reports')
    sub.add_parser('plot', help='Render figures from emitted CSV files')
    return parser


def load_config(args: argparse.Namespace) -> PipelineConfig:
    """
    Configuration file merged with the command-line overrides.

    Raises:
        ConfigError: Unreadable file or validation errors
    """
    config = get_config_manager().load(getattr(args, 'sub_config', None) or args.config)
    out = getattr(args, 'run_out', None) or args.out
    config = apply_overrides(config, seed=args.seed, output_directory=out)
    if getattr(args, 'scenario', None):
        config = replace(config, scenarios=load_scenarios(args.scenario))
    errors = ConfigValidator().validate(config)
    if errors:
        raise ConfigError("; ".join(errors))
    return config


def setup_logging(config: PipelineConfig, verbose: bool) -> None:
    level = 'DEBUG' if verbose else config.logging.level
    LoggingConfigurator().setup_application_logging(
        log_level=level,
        log_to_file=config.logging.log_to_file,
        log_dir=Path(config.output_directory) / 'logs',
        max_log_files=config.logging.max_log_files,
        max_file_size_mb=config.logging.max_file_size_mb,
    )


def _fmt(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def show_reports(reports: Sequence[RunReport]) -> None:
    table = Table(title="Run summary")
    for column in ('case', 'method', 'converged', 'iterations', 'phi', 'DI pred.', 'DI exact', 'verdict'):
        table.add_column(column)
    for r in reports:
        style = None if r.converged else 'red'
        table.add_row(
            r.case, r.method.display_name, str(r.converged), str(r.iterations), _fmt(r.phi),
            _fmt(r.di_predicted), _fmt(r.di_exact), str(r.row.get('verdict', '')), style=style,
        )
    console.print(table)


def show_records(title: str, records: List[Dict[str, Any]], columns: Sequence[str]) -> None:
    table = Table(title=title)
    for column in columns:
        table.add_column(column)
    for record in records:
        table.add_row(*(_fmt(record.get(c, '')) for c in columns))
    console.print(table)


def _all_converged(reports: Sequence[RunReport]) -> int:
    return 0 if reports and all(r.converged for r in reports) else 1


# ------------------------------------------------------------------
# Commands
# ------------------------------------------------------------------

def cmd_gen_dataset(args: argparse.Namespace, config: PipelineConfig) -> int:
    sampling = asdict(config.sampling)
    if args.plan:
        with open(args.plan, 'r', encoding='utf-8') as f:
            plan_data = yaml.safe_load(f) or {}
        if not isinstance(plan_data, dict):
            raise ConfigError(f"Plan file {args.plan} must be a mapping")
        sampling.update(plan_data)
    if args.points is not None:
        sampling['n_points'] = args.points
    config = replace(config, sampling=config_from_dict({'sampling': sampling}).sampling)
    errors = ConfigValidator().validate(config)
    if errors:
        raise ConfigError("; ".join(errors))

    pipeline = Pipeline(config)
    target = Path(args.dataset) if args.dataset else pipeline.out / DATASET_FILE
    dataset = pipeline.generate(target)
    stable, unstable = dataset.class_balance()
    console.print(f"[bold green]Dataset written to {target}[/bold green]: "
                  f"{stable} stable, {unstable} unstable, {len(dataset) - stable - unstable} infeasible")
    return 0


def cmd_fit(args: argparse.Namespace, config: PipelineConfig) -> int:
    pipeline = Pipeline(config)
    source = Path(args.dataset) if args.dataset else pipeline.out / DATASET_FILE
    dataset = import_dataset(source, pipeline.network)
    target = Path(args.model) if args.model else pipeline.out / MODEL_FILE
    result = pipeline.fit(dataset, target)
    console.print(result.model.describe())
    console.print(f"Features: {', '.join(result.features)}")
    console.print(f"R^2 train {result.train_r2:.5f} ({result.n_train} rows), "
                  f"held-out {result.test_r2:.5f} ({result.n_test} rows)")
    console.print(f"[bold green]Model written to {target}[/bold green]")
    return 0 if result.test_r2 >= config.fit.min_test_r2 else 1


def _run(
    config: PipelineConfig,
    methods: Sequence[Method],
    cases: Optional[Sequence[str]],
    model_path: Optional[str],
) -> int:
    network = load_pipeline_network(config)
    model_path = model_path or config.stability_model_path
    model = load_stability_model(model_path)
    out = Path(config.output_directory)
    reports = run_scenarios(network, config, methods, model, out, cases, model_path)
    show_reports(reports)
    return _all_converged(reports)


def cmd_run_ofo(args: argparse.Namespace, config: PipelineConfig) -> int:
    if args.sssc:
        methods = [Method.SSSC_OFO]
    elif args.plain:
        methods = [Method.OFO]
    else:
        methods = [Method.OFO, Method.SSSC_OFO]
    return _run(config, methods, args.cases, args.model)


def cmd_run_opf(args: argparse.Namespace, config: PipelineConfig) -> int:
    methods = [OPF_MODES[mode] for mode in args.mode]
    return _run(config, methods, args.cases, args.model)


def cmd_sweep(args: argparse.Namespace, config: PipelineConfig) -> int:
    network = load_pipeline_network(config)
    model_path = args.model or config.stability_model_path
    model = load_stability_model(model_path)
    settings = config.sweep
    result = sweep(
        network,
        n_points=args.points or settings.n_points,
        demand_range=settings.demand_range,
        gamma=settings.gamma,
        stability_model=model,
        critical_filter=config.filter.to_filter(),
        settings=SqpSettings(max_iter=config.controller.sqp_max_iter, kkt_tol=config.controller.sqp_kkt_tol),
        out_dir=Path(config.output_directory),
        workers=settings.workers,
    )
    console.print(f"{len(result.rows)} optima, {result.failures} failed points, "
                  f"unstable fraction {result.unstable_fraction:.3f}")
    if result.surrogate_r2 is not None:
        console.print(f"Surrogate R^2 on the optima: {result.surrogate_r2:.5f}")
    if result.table_path is not None:
        console.print(f"[bold green]Sweep written to {result.table_path}[/bold green]")
    return 0 if result.failures == 0 and all(row['converged'] for row in result.rows) else 1


def cmd_pipeline(args: argparse.Namespace, config: PipelineConfig) -> int:
    result = Pipeline(config).run()
    show_reports(result.reports)
    if result.fit is not None:
        console.print(f"Surrogate held-out R^2: {result.fit.test_r2:.5f}")
    summary = result.session_summary
    console.print(f"Stages: {summary['stages']['successful']}/{summary['stages']['total']} successful, "
                  f"{summary['artifacts']} artifacts in {result.output_directory}")
    return 0 if result.success else 1


def cmd_compare(args: argparse.Namespace, config: PipelineConfig) -> int:
    result = compare_runs(Path(config.output_directory), [s.name for s in config.scenarios])
    show_records('Solutions summary', result.comparison.records(), result.comparison.columns)
    show_records('Iterations to convergence', result.iterations.records(), result.iterations.columns)
    return 0 if result.all_converged else 1


def cmd_plot(args: argparse.Namespace, config: PipelineConfig) -> int:
    network = load_pipeline_network(config)
    results = plot_results(Path(config.output_directory), network, config.controller.theta)
    for r in results:
        if r.success:
            console.print(f"  {r.output_path}")
    failed = sum(1 for r in results if not r.success)
    console.print(f"{len(results) - failed} figures rendered, {failed} failed")
    return 0 if failed == 0 else 1


COMMANDS = {
    'gen-dataset': cmd_gen_dataset,
    'fit': cmd_fit,
    'run-ofo': cmd_run_ofo,
    'run-opf': cmd_run_opf,
    'sweep': cmd_sweep,
    'pipeline': cmd_pipeline,
    'compare': cmd_compare,
    'plot': cmd_plot,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point for the GridGenius CLI."""
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args)
    except ConfigError as e:
        console.print(f"[bold red]Configuration error:[/bold red] {e}")
        return 1
    setup_logging(config, args.verbose)

    try:
        return COMMANDS[args.command](args, config)
    except PipelineStageError as e:
        console.print(f"[bold red]Stage '{e.stage}' failed:[/bold red] {e}")
        logger.debug("Stage failure", exc_info=True)
        return 1
    except DOMAIN_ERRORS as e:
        console.print(f"[bold red]Error:[/bold red] {e}")
        logger.debug("Command failed", exc_info=True)
        return 1
    except KeyboardInterrupt:
        console.print("\nOperation cancelled by user.")
        return 1
    except Exception as e:
        console.print(f"[bold red]Unexpected error:[/bold red] {e}")
        logging.exception("Unexpected error occurred")
        return 1


if __name__ == '__main__':
    sys.exit(main())
