"""
Utilities package initialization for GridGenius.

Logging, session tracking and configuration management.
"""

from .logging_utils import (
    LoggingConfigurator,
    OperationTimer,
    SessionLogger,
    setup_default_logging,
)
from .config_utils import (
    ConfigError,
    ConfigManager,
    ConfigValidator,
    PipelineConfig,
    ScenarioSettings,
    get_config_manager,
)

__all__ = [
    "LoggingConfigurator",
    "OperationTimer",
    "SessionLogger",
    "setup_default_logging",
    "ConfigError",
    "ConfigManager",
    "ConfigValidator",
    "PipelineConfig",
    "ScenarioSettings",
    "get_config_manager",
]
