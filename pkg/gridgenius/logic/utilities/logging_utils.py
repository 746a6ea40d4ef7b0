"""
Logging and run-tracking utilities for GridGenius.

This module provides centralized logging configuration and session
tracking of pipeline stages (start, success, failure, duration and the
artifacts each stage wrote).
"""

import json
import logging
import logging.handlers
import sys
import time
import traceback
from dataclasses import asdict, dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
LOG_FILE_NAME = 'gridgenius.log'


@dataclass
class LogEntry:
    """Structured log entry for session tracking."""

    timestamp: str
    level: str
    stage: str
    message: str
    context: Optional[Dict[str, Any]] = None
    duration_ms: Optional[float] = None
    error_details: Optional[str] = None


@dataclass
class SessionStats:
    """Session statistics."""

    session_id: str
    start_time: str
    end_time: Optional[str] = None
    duration_seconds: Optional[float] = None
    total_stages: int = 0
    successful_stages: int = 0
    failed_stages: int = 0
    warnings_count: int = 0
    errors_count: int = 0
    artifacts: List[str] = field(default_factory=list)


class SessionLogger:
    """
    Stage-level run log.

    Entries go to the ``gridgenius.session.<id>`` logger and are mirrored
    into ``session_<id>.json`` under ``log_dir``.
    """

    def __init__(self, log_dir: Path, session_id: Optional[str] = None):
        self.session_id = session_id or datetime.now().strftime("%Y%m%d_%H%M%S")
        self.log_dir = Path(log_dir)
        self.log_dir.mkdir(parents=True, exist_ok=True)
        self.session_file = self.log_dir / f"session_{self.session_id}.json"
        self.start_time = datetime.now()
        self.entries: List[LogEntry] = []
        self.stats = SessionStats(session_id=self.session_id, start_time=self.start_time.isoformat())
        self.logger = logging.getLogger(f"gridgenius.session.{self.session_id}")
        self.logger.info(f"Session started: {self.session_id}")

    def log(
        self,
        level: str,
        message: str,
        stage: str = "main",
        context: Optional[Dict[str, Any]] = None,
        duration_ms: Optional[float] = None,
        error_details: Optional[str] = None,
    ) -> None:
        """
        Log a structured entry.

        Args:
            level: Log level (DEBUG, INFO, WARNING, ERROR, CRITICAL)
            message: Log message
            stage: Pipeline stage name
            context: Additional context data
            duration_ms: Stage duration in milliseconds
            error_details: Error details if applicable
        """
        level = level.upper()
        self.entries.append(LogEntry(
            timestamp=datetime.now().isoformat(),
            level=level,
            stage=stage,
            message=message,
            context=context,
            duration_ms=duration_ms,
            error_details=error_details,
        ))
        if level == "WARNING":
            self.stats.warnings_count += 1
        elif level in ("ERROR", "CRITICAL"):
            self.stats.errors_count += 1

        log_msg = f"[{stage}] {message}"
        if context:
            log_msg += f" | Context: {json.dumps(context, default=str)}"
        if duration_ms is not None:
            log_msg += f" | Duration: {duration_ms:.2f}ms"
        getattr(self.logger, level.lower(), self.logger.info)(log_msg)
        self._save_session_data()

    def stage_start(self, stage: str, context: Optional[Dict[str, Any]] = None) -> None:
        self.stats.total_stages += 1
        self.log("INFO", f"Stage started: {stage}", stage=stage, context=context)

    def stage_success(self, stage: str, duration_ms: float, context: Optional[Dict[str, Any]] = None) -> None:
        self.stats.successful_stages += 1
        self.log("INFO", f"Stage completed: {stage}", stage=stage, context=context, duration_ms=duration_ms)

    def stage_error(self, stage: str, error: BaseException, duration_ms: float) -> None:
        details = "".join(traceback.format_exception(type(error), error, error.__traceback__))
        self.stats.failed_stages += 1
        self.log("ERROR", f"Stage failed: {stage}: {error}", stage=stage,
                 duration_ms=duration_ms, error_details=details)

    def artifact_written(self, path: Path) -> None:
        self.stats.artifacts.append(str(path))

    def end_session(self) -> None:
        end_time = datetime.now()
        self.stats.end_time = end_time.isoformat()
        self.stats.duration_seconds = (end_time - self.start_time).total_seconds()
        self.log("INFO", f"Session ended: {self.session_id}",
                 context={"duration_seconds": self.stats.duration_seconds})

    def _save_session_data(self) -> None:
        try:
            session_data = {
                "stats": asdict(self.stats),
                "entries": [asdict(entry) for entry in self.entries[-100:]],
            }
            with open(self.session_file, 'w', encoding='utf-8') as f:
                json.dump(session_data, f, indent=2, default=str)
        except OSError as e:
            self.logger.error(f"Failed to save session data: {e}")

    def get_summary(self) -> Dict[str, Any]:
        return {
            "session_id": self.session_id,
            "duration": self.stats.duration_seconds or (datetime.now() - self.start_time).total_seconds(),
            "stages": {
                "total": self.stats.total_stages,
                "successful": self.stats.successful_stages,
                "failed": self.stats.failed_stages,
            },
            "issues": {
                "warnings": self.stats.warnings_count,
                "errors": self.stats.errors_count,
            },
            "artifacts": len(self.stats.artifacts),
        }


class LoggingConfigurator:
    """Application logging configuration."""

    def __init__(self):
        self.configured_loggers: List[str] = []

    def setup_application_logging(
        self,
        log_level: str = "INFO",
        log_to_file: bool = True,
        log_dir: Optional[Path] = None,
        max_log_files: int = 10,
        max_file_size_mb: int = 10,
    ) -> bool:
        """
        Install the console handler and the optional rotating file handler.

        Args:
            log_level: Console logging level
            log_to_file: Whether to log to ``<log_dir>/gridgenius.log``
            log_dir: Directory for log files (file logging is skipped when None)
            max_log_files: Rotated files to keep
            max_file_size_mb: Size at which the log file rotates

        Returns:
            True if setup was successful
        """
        level = getattr(logging, log_level.upper(), None)
        if not isinstance(level, int):
            return False
        root_logger = logging.getLogger()
        root_logger.setLevel(logging.DEBUG if log_to_file and log_dir else level)
        for handler in root_logger.handlers[:]:
            root_logger.removeHandler(handler)
            handler.close()

        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setLevel(level)
        console_handler.setFormatter(logging.Formatter(LOG_FORMAT, datefmt='%H:%M:%S'))
        root_logger.addHandler(console_handler)

        if log_to_file and log_dir is not None:
            try:
                log_dir = Path(log_dir)
                log_dir.mkdir(parents=True, exist_ok=True)
                file_handler = logging.handlers.RotatingFileHandler(
                    log_dir / LOG_FILE_NAME,
                    maxBytes=max_file_size_mb * 1024 * 1024,
                    backupCount=max_log_files,
                    encoding='utf-8',
                )
            except OSError as e:
                root_logger.warning(f"File logging disabled: {e}")
            else:
                file_handler.setLevel(logging.DEBUG)
                file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
                root_logger.addHandler(file_handler)

        logging.getLogger('matplotlib').setLevel(logging.WARNING)
        self.configured_loggers.append("root")
        return True


class OperationTimer:
    """Context manager timing one pipeline stage."""

    def __init__(self, stage: str, session: Optional[SessionLogger] = None,
                 context: Optional[Dict[str, Any]] = None):
        self.stage = stage
        self.session = session
        self.context = context
        self.start_time: Optional[float] = None
        self.duration_ms: Optional[float] = None

    def __enter__(self) -> 'OperationTimer':
        self.start_time = time.perf_counter()
        if self.session:
            self.session.stage_start(self.stage, self.context)
        return self

    def __exit__(self, exc_type, exc_val, exc_tb) -> bool:
        self.duration_ms = (time.perf_counter() - self.start_time) * 1000
        if self.session:
            if exc_type is None:
                self.session.stage_success(self.stage, self.duration_ms)
            else:
                self.session.stage_error(self.stage, exc_val, self.duration_ms)
        return False


def setup_default_logging(level: str = "INFO") -> bool:
    """Console-only logging."""
    return LoggingConfigurator().setup_application_logging(log_level=level, log_to_file=False)
