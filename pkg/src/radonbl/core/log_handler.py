"""Per-run log capture for CLI experiments."""

import logging
from datetime import datetime
from pathlib import Path
from typing import Optional, TextIO

from radonbl.core.config import APP_NAME, APP_VERSION, get_run_logs_dir


class RunLogHandler:
    """
    Handles log capture and persistence for a single experiment run.
    Creates a new log file for each run.
    """

    def __init__(self, run_id: int):
        self.run_id = run_id
        self.log_file: Optional[TextIO] = None
        self.log_path: Optional[Path] = None
        self._bridge: Optional[logging.Handler] = None
        self._previous_level = logging.NOTSET

    def start_logging(self, title: str = "") -> Path:
        """Start a new log file for this run. Returns the log file path."""
        logs_dir = get_run_logs_dir(self.run_id)
        timestamp = datetime.now().strftime("%Y-%m-%d_%H-%M-%S")
        self.log_path = logs_dir / f"{timestamp}.log"

        # pylint: disable=consider-using-with
        self.log_file = open(self.log_path, "w", encoding="utf-8", buffering=1)

        started = datetime.now().isoformat()
        self.log_file.write(f"=== {APP_NAME} {APP_VERSION} run started: {started} ===\n")
        self.log_file.write(f"=== Run ID: {self.run_id} {title} ===\n\n")
        return self.log_path

    def write_line(self, line: str, level: str = "INFO"):
        """Write a line to the log file."""
        if self.log_file is None:
            return
        timestamp = datetime.now().strftime("%H:%M:%S")
        self.log_file.write(f"{timestamp} [{level}] {line}\n")

    def attach(self, logger_name: str = "radonbl") -> logging.Handler:
        """Route records of ``logger_name`` into this run's file until stop_logging."""
        handler = _RunLogBridge(self)
        handler.setLevel(logging.INFO)
        target = logging.getLogger(logger_name)
        self._previous_level = target.level
        if target.getEffectiveLevel() > logging.INFO:
            target.setLevel(logging.INFO)
        target.addHandler(handler)
        self._bridge = handler
        return handler

    def stop_logging(self, logger_name: str = "radonbl"):
        """Detach the bridge and close the log file."""
        if self._bridge is not None:
            target = logging.getLogger(logger_name)
            target.removeHandler(self._bridge)
            target.setLevel(self._previous_level)
            self._bridge = None
        if self.log_file is not None:
            self.log_file.write(f"\n=== {APP_NAME} run ended: {datetime.now().isoformat()} ===\n")
            self.log_file.close()
            self.log_file = None

    def get_current_log_path(self) -> Optional[Path]:
        """Get the path to the current log file."""
        return self.log_path


class _RunLogBridge(logging.Handler):
    def __init__(self, owner: RunLogHandler):
        super().__init__()
        self._owner = owner

    def emit(self, record: logging.LogRecord):
        try:
            self._owner.write_line(f"{record.name}: {record.getMessage()}", record.levelname)
        except Exception:  # pylint: disable=broad-exception-caught
            self.handleError(record)
