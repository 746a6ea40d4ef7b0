"""
Configuration management utilities for GridGenius.

This module provides the pipeline settings (dataclasses with the shipped
defaults), YAML/JSON loading merged over those defaults, saving, and
validation.
"""

from dataclasses import asdict, dataclass, field, fields, replace
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Type, TypeVar, Union

import yaml

from ..data_sources.sample_generator import SamplingPlan
from ..optimization.ofo_controller import DEFAULT_EPSILON_MARGIN, DEFAULT_THETA
from ..regression.mars_fit import FitConfig
from ..small_signal.modal_analysis import CriticalFilter

DEFAULT_CONFIG_PATH = Path(__file__).resolve().parents[2] / 'assets' / 'default_config.yaml'
METHOD_NAMES = ('ofo', 'sssc_ofo', 'opf', 'sssc_opf', 'opf_v1cap')
VALID_LOG_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL')

T = TypeVar('T')


class ConfigError(Exception):
    """Exception raised for unreadable or malformed configuration files."""
    pass


@dataclass
class LoggingSettings:
    level: str = "INFO"
    log_to_file: bool = True
    max_log_files: int = 10
    max_file_size_mb: int = 10


@dataclass
class SamplingSettings:
    """Dataset generation settings (see SamplingPlan)."""

    n_points: int = 5000
    demand_range: Optional[List[float]] = None
    sg_share_range: List[float] = field(default_factory=lambda: [0.1, 0.6])
    gfm_share_range: List[float] = field(default_factory=lambda: [0.2, 0.9])
    voltage_range: List[float] = field(default_factory=lambda: [0.9, 1.1])
    boundary_densify_fraction: float = 0.3
    neighbours: int = 8
    band_shrink: float = 0.5
    workers: int = 1

    def to_plan(self, seed: int) -> SamplingPlan:
        return SamplingPlan(
            n_points=int(self.n_points),
            demand_range=tuple(self.demand_range) if self.demand_range is not None else None,
            sg_share_range=tuple(self.sg_share_range),
            gfm_share_range=tuple(self.gfm_share_range),
            voltage_range=tuple(self.voltage_range),
            boundary_densify_fraction=float(self.boundary_densify_fraction),
            neighbours=int(self.neighbours),
            band_shrink=float(self.band_shrink),
            seed=int(seed),
        )


@dataclass
class FitSettings:
    """Surrogate fitting and acceptance settings."""

    max_terms: int = 21
    gcv_penalty: float = 3.0
    min_span: int = 1
    max_knots: int = 200
    forward_improvement_tol: float = 1e-9
    correlation_drop_threshold: float = 0.95
    test_fraction: float = 0.2
    min_test_r2: float = 0.99
    candidate_features: Optional[List[str]] = None

    def to_fit_config(self) -> FitConfig:
        return FitConfig(
            max_terms=int(self.max_terms),
            gcv_penalty=float(self.gcv_penalty),
            min_span=int(self.min_span),
            max_knots=int(self.max_knots),
            forward_improvement_tol=float(self.forward_improvement_tol),
            correlation_drop_threshold=float(self.correlation_drop_threshold),
        )


@dataclass
class FilterSettings:
    """Critical-eigenvalue selection."""

    re_min: float = -50.0
    require_complex: bool = True
    freq_band_hz: Optional[List[float]] = None

    def to_filter(self) -> CriticalFilter:
        band = tuple(self.freq_band_hz) if self.freq_band_hz is not None else None
        return CriticalFilter(re_min=float(self.re_min), require_complex=bool(self.require_complex),
                              freq_band_hz=band)


@dataclass
class ControllerSettings:
    """Settings shared by every controller and OPF run."""

    theta: float = DEFAULT_THETA
    epsilon_margin: float = DEFAULT_EPSILON_MARGIN
    convergence_tol: float = 1e-5
    max_iter: int = 1000
    measurement_noise_std: float = 0.0
    sqp_max_iter: int = 200
    sqp_kkt_tol: float = 1e-6
    # re-solve with the nominal demand re-targeted at the final controls
    demand_passes: int = 3
    demand_tol_mw: float = 0.05


def _default_gamma(opf: float, sssc_opf: float) -> Dict[str, float]:
    return {'ofo': 100.0, 'sssc_ofo': 100.0, 'opf': opf, 'sssc_opf': sssc_opf, 'opf_v1cap': 100.0}


@dataclass
class ScenarioSettings:
    """
    One demand case and its per-method tuning.

    ``gamma`` maps method names to the objective scaling; ``metric`` is
    the diagonal of the controller metric G.
    """

    name: str = "case"
    realized_demand_mw: float = 318.55
    initial_u: List[float] = field(default_factory=lambda: [0.5, 0.5, 1.0, 1.0, 1.0])
    metric: List[float] = field(default_factory=lambda: [1.0, 1.0, 0.2, 0.2, 0.2])
    gamma: Dict[str, float] = field(default_factory=lambda: _default_gamma(100.0, 10.0))
    alpha: float = 4e-4


def default_scenarios() -> List[ScenarioSettings]:
    return [
        ScenarioSettings(name='low', realized_demand_mw=207.23,
                         metric=[1.0, 1.0, 0.1, 0.1, 0.1], gamma=_default_gamma(1000.0, 1000.0)),
        ScenarioSettings(name='medium', realized_demand_mw=318.55,
                         metric=[1.0, 1.0, 0.2, 0.2, 0.2], gamma=_default_gamma(100.0, 10.0)),
        ScenarioSettings(name='high', realized_demand_mw=661.41,
                         metric=[1.0, 1.0, 0.2, 0.2, 0.2], gamma=_default_gamma(100.0, 100.0)),
    ]


@dataclass
class SweepSettings:
    n_points: int = 100
    demand_range: Optional[List[float]] = None
    gamma: float = 100.0
    workers: int = 1


@dataclass
class PipelineConfig:
    """Complete run configuration."""

    seed: int = 42
    output_directory: str = "gridgenius_out"
    network_path: Optional[str] = None
    stability_model_path: Optional[str] = None
    run_workers: int = 1
    logging: LoggingSettings = field(default_factory=LoggingSettings)
    sampling: SamplingSettings = field(default_factory=SamplingSettings)
    fit: FitSettings = field(default_factory=FitSettings)
    filter: FilterSettings = field(default_factory=FilterSettings)
    controller: ControllerSettings = field(default_factory=ControllerSettings)
    scenarios: List[ScenarioSettings] = field(default_factory=default_scenarios)
    sweep: SweepSettings = field(default_factory=SweepSettings)

    def scenario(self, name: str) -> ScenarioSettings:
        for scenario in self.scenarios:
            if scenario.name == name:
                return scenario
        raise ConfigError(f"Unknown scenario '{name}' (have {[s.name for s in self.scenarios]})")


_SECTIONS = {
    'logging': LoggingSettings,
    'sampling': SamplingSettings,
    'fit': FitSettings,
    'filter': FilterSettings,
    'controller': ControllerSettings,
    'sweep': SweepSettings,
}


def _build(cls: Type[T], data: Any, section: str) -> T:
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"Section '{section}' must be a mapping")
    unknown = sorted(set(data) - {f.name for f in fields(cls)})
    if unknown:
        raise ConfigError(f"Unknown setting(s) in '{section}': {', '.join(unknown)}")
    try:
        return cls(**data)
    except TypeError as e:
        raise ConfigError(f"Invalid section '{section}': {e}")


def config_from_dict(data: Dict[str, Any]) -> PipelineConfig:
    """
    Merge a parsed configuration over the defaults.

    Missing sections and keys keep their defaults; a ``scenarios`` list
    replaces the default cases entirely.

    Raises:
        ConfigError: Unknown keys or wrongly shaped sections
    """
    if not isinstance(data, dict):
        raise ConfigError("Configuration root must be a mapping")
    top_level = {f.name for f in fields(PipelineConfig)}
    unknown = sorted(set(data) - top_level)
    if unknown:
        raise ConfigError(f"Unknown setting(s): {', '.join(unknown)}")

    kwargs: Dict[str, Any] = {}
    for key, value in data.items():
        if key in _SECTIONS:
            kwargs[key] = _build(_SECTIONS[key], value, key)
        elif key == 'scenarios':
            if not isinstance(value, list):
                raise ConfigError("'scenarios' must be a list")
            kwargs[key] = [_build(ScenarioSettings, item, f"scenarios[{i}]") for i, item in enumerate(value)]
        else:
            kwargs[key] = value
    return PipelineConfig(**kwargs)


def load_scenarios(path: Union[str, Path]) -> List[ScenarioSettings]:
    """
    Read demand cases from a YAML scenario file.

    The file holds one case mapping, a list of them, or a mapping with a
    ``scenarios`` list; missing keys take the ScenarioSettings defaults.

    Raises:
        ConfigError: Missing or malformed file
    """
    path = Path(path)
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = yaml.safe_load(f)
    except FileNotFoundError:
        raise ConfigError(f"Scenario file not found: {path}") from None
    except yaml.YAMLError as e:
        raise ConfigError(f"Cannot parse {path.name}: {e}") from e

    if isinstance(data, dict) and 'scenarios' in data:
        data = data['scenarios']
    items = [data] if isinstance(data, dict) else data
    if not isinstance(items, list) or not items:
        raise ConfigError(f"Scenario file {path} holds no scenario")
    return [_build(ScenarioSettings, item, f"{path.name}[{i}]") for i, item in enumerate(items)]


def apply_overrides(
    config: PipelineConfig,
    seed: Optional[int] = None,
    output_directory: Optional[Union[str, Path]] = None,
) -> PipelineConfig:
    """Command-line overrides of the file settings."""
    changes: Dict[str, Any] = {}
    if seed is not None:
        changes['seed'] = int(seed)
    if output_directory is not None:
        changes['output_directory'] = str(output_directory)
    return replace(config, **changes) if changes else config


class ConfigManager:
    """Configuration file loading and persistence."""

    def __init__(self):
        self.logger = logging.getLogger(__name__)

    def load(self, path: Optional[Union[str, Path]] = None) -> PipelineConfig:
        """
        Load a YAML (.yaml/.yml) or JSON (.json) configuration.

        Returns:
            Defaults when ``path`` is None

        Raises:
            ConfigError: Missing file, unsupported suffix or malformed content
        """
        if path is None:
            return PipelineConfig()
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"Configuration file not found: {path}")
        try:
            with open(path, 'r', encoding='utf-8') as f:
                if path.suffix.lower() in ('.yaml', '.yml'):
                    data = yaml.safe_load(f)
                elif path.suffix.lower() == '.json':
                    data = json.load(f)
                else:
                    raise ConfigError(f"Unsupported configuration format: {path.suffix}")
        except (yaml.YAMLError, json.JSONDecodeError) as e:
            raise ConfigError(f"Cannot parse {path.name}: {e}")
        config = config_from_dict(data or {})
        self.logger.info(f"Loaded configuration from: {path}")
        return config

    def save(self, config: PipelineConfig, path: Union[str, Path]) -> Path:
        """Write a configuration as YAML or JSON (by suffix)."""
        path = Path(path)
        data = asdict(config)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            if path.suffix.lower() == '.json':
                json.dump(data, f, indent=2)
            elif path.suffix.lower() in ('.yaml', '.yml'):
                yaml.safe_dump(data, f, sort_keys=False)
            else:
                raise ConfigError(f"Unsupported configuration format: {path.suffix}")
        self.logger.info(f"Saved configuration to: {path}")
        return path


class ConfigValidator:
    """Configuration validation utilities."""

    def validate(self, config: PipelineConfig) -> List[str]:
        """
        Validate a complete configuration.

        Returns:
            List of validation errors (empty if valid)
        """
        errors: List[str] = []

        if config.logging.level.upper() not in VALID_LOG_LEVELS:
            errors.append(f"Invalid log level: {config.logging.level}")
        if config.logging.max_log_files <= 0:
            errors.append("max_log_files must be positive")

        errors.extend(config.sampling.to_plan(config.seed).validate().errors)
        if config.sampling.workers < 1:
            errors.append("sampling.workers must be at least 1")
        errors.extend(config.fit.to_fit_config().validate().errors)
        if not 0.0 < config.fit.test_fraction < 1.0:
            errors.append("fit.test_fraction must lie in (0, 1)")
        if config.fit.min_test_r2 > 1.0:
            errors.append("fit.min_test_r2 cannot exceed 1")
        errors.extend(config.filter.to_filter().validate().errors)

        ctrl = config.controller
        if ctrl.theta > 1.0:
            errors.append(f"controller.theta cannot exceed 1, got {ctrl.theta}")
        if ctrl.epsilon_margin < 0:
            errors.append("controller.epsilon_margin cannot be negative")
        if ctrl.convergence_tol <= 0 or ctrl.sqp_kkt_tol <= 0:
            errors.append("convergence tolerances must be positive")
        if ctrl.max_iter < 1 or ctrl.sqp_max_iter < 1 or ctrl.demand_passes < 1:
            errors.append("iteration limits must be at least 1")
        if ctrl.demand_tol_mw <= 0:
            errors.append("controller.demand_tol_mw must be positive")
        if ctrl.measurement_noise_std < 0:
            errors.append("controller.measurement_noise_std cannot be negative")

        if not config.scenarios:
            errors.append("At least one scenario is required")
        names = [s.name for s in config.scenarios]
        if len(set(names)) != len(names):
            errors.append(f"Duplicate scenario names: {names}")
        for s in config.scenarios:
            errors.extend(self._validate_scenario(s))

        if config.sweep.n_points < 1:
            errors.append("sweep.n_points must be at least 1")
        if config.sweep.gamma <= 0:
            errors.append("sweep.gamma must be positive")
        if config.run_workers < 1 or config.sweep.workers < 1:
            errors.append("worker counts must be at least 1")
        return errors

    def _validate_scenario(self, s: ScenarioSettings) -> List[str]:
        errors = []
        if s.realized_demand_mw <= 0:
            errors.append(f"Scenario {s.name}: demand must be positive")
        if len(s.metric) != len(s.initial_u):
            errors.append(f"Scenario {s.name}: metric and initial_u lengths differ")
        if any(g <= 0 for g in s.metric):
            errors.append(f"Scenario {s.name}: metric entries must be positive")
        if s.alpha <= 0:
            errors.append(f"Scenario {s.name}: alpha must be positive")
        missing = [m for m in METHOD_NAMES if m not in s.gamma]
        extra = [m for m in s.gamma if m not in METHOD_NAMES]
        if missing or extra:
            errors.append(f"Scenario {s.name}: gamma needs exactly {list(METHOD_NAMES)}")
        if any(v <= 0 for v in s.gamma.values()):
            errors.append(f"Scenario {s.name}: gamma values must be positive")
        return errors


_config_manager: Optional[ConfigManager] = None


def get_config_manager() -> ConfigManager:
    """Get the global configuration manager instance."""
    global _config_manager
    if _config_manager is None:
        _config_manager = ConfigManager()
    return _config_manager
