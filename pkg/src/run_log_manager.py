"""
Run Log Manager

Captures the desk's module logs for the duration of a train/test run:

- RecentLogsHandler keeps the last N records in memory
- a rotating file handler writes runs/<run-id>/logs/<phase>.log

Handlers are attached to the monitored module loggers, so modules keep
their plain ``logger.info()`` calls.

Usage:
    manager = RunLogManager(run_dir)
    manager.start_run_logging("train")
    ...
    manager.stop_run_logging("train")
    manager.get_recent_logs("train", limit=20, level="WARNING")   # read back from the file
"""

import logging
import re
from collections import deque
from datetime import datetime
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Dict, List, Optional

logger = logging.getLogger(__name__)


class RecentLogsHandler(logging.Handler):
    """
    Logging handler that keeps recent records in memory

    Attributes:
        max_records: Maximum number of records to keep
        records: Deque of record dicts
    """

    def __init__(self, max_records: int = 200):
        super().__init__()
        self.max_records = max_records
        self.records = deque(maxlen=max_records)

    def emit(self, record: logging.LogRecord):
        try:
            self.records.append({
                "timestamp": datetime.fromtimestamp(record.created).isoformat(),
                "level": record.levelname,
                "logger": record.name,
                "message": record.getMessage()
            })
        except Exception:
            self.handleError(record)

    def get_recent_logs(self, limit: Optional[int] = None) -> List[Dict[str, str]]:
        """Recent records, newest first"""
        logs = list(self.records)
        logs.reverse()
        if limit and limit < len(logs):
            logs = logs[:limit]
        return logs

    def clear(self):
        self.records.clear()


class RunLogManager:
    """
    Attaches file and memory handlers to the desk's loggers during a run
    """

    MONITORED_MODULES = [
        "memory_engine",
        "storage",
        "market_data",
        "agent",
        "debate",
        "decision_cores",
        "backtest",
    ]

    LINE_PATTERN = re.compile(r"\[(\d{4}-\d{2}-\d{2} \d{2}:\d{2}:\d{2})\] (\w+) ([\w.]+): (.*)")

    def __init__(self, run_dir: Path, level: int = logging.INFO):
        """
        Initialize RunLogManager

        Args:
            run_dir: Run directory; logs go to <run_dir>/logs
            level: Minimum level written
        """
        self.logs_dir = Path(run_dir) / "logs"
        self.level = level
        self.handlers: Dict[str, List[logging.Handler]] = {}
        self.memory_handlers: Dict[str, RecentLogsHandler] = {}

    def _loggers(self) -> List[logging.Logger]:
        # Modules log as "src.x" under tests and as "x" when installed
        names = []
        for module in self.MONITORED_MODULES:
            names.extend([module, f"src.{module}"])
        return [logging.getLogger(name) for name in names]

    def start_run_logging(self, phase: str) -> Path:
        """
        Start capturing logs for a phase

        Returns:
            Path to the log file
        """
        log_file = self.log_file(phase)
        if phase in self.handlers:
            return log_file

        self.logs_dir.mkdir(parents=True, exist_ok=True)
        file_handler = RotatingFileHandler(
            log_file,
            maxBytes=10 * 1024 * 1024,
            backupCount=2,
            encoding="utf-8"
        )
        file_handler.setLevel(self.level)
        file_handler.setFormatter(logging.Formatter(
            "[%(asctime)s] %(levelname)s %(name)s: %(message)s",
            datefmt="%Y-%m-%d %H:%M:%S"
        ))
        memory_handler = RecentLogsHandler()
        memory_handler.setLevel(self.level)

        handlers = [file_handler, memory_handler]
        for module_logger in self._loggers():
            if module_logger.level == logging.NOTSET or module_logger.level > self.level:
                module_logger.setLevel(self.level)
            for handler in handlers:
                module_logger.addHandler(handler)

        self.handlers[phase] = handlers
        self.memory_handlers[phase] = memory_handler
        logger.info(f"Started log capture for {phase} → {log_file}")
        return log_file

    def stop_run_logging(self, phase: str):
        """Detach and close the phase's handlers"""
        handlers = self.handlers.pop(phase, None)
        if handlers is None:
            return
        self.memory_handlers.pop(phase, None)

        for module_logger in self._loggers():
            for handler in handlers:
                module_logger.removeHandler(handler)
        for handler in handlers:
            try:
                handler.close()
            except Exception as e:
                logger.warning(f"Error closing log handler for {phase}: {e}")
        logger.info(f"Stopped log capture for {phase}")

    def log_file(self, phase: str) -> Path:
        return self.logs_dir / f"{phase}.log"

    def get_recent_logs(self, phase: str, limit: int = 50,
                        level: Optional[str] = None) -> List[Dict[str, str]]:
        """
        Recent records of a phase, newest first

        Reads the memory handler while the phase is capturing, the log file
        once it has stopped (e.g. from a later ``tradmem logs`` invocation).

        Args:
            phase: Phase name (train, test)
            limit: Maximum records returned
            level: Minimum level name; lines without a level are then dropped
        """
        if phase in self.memory_handlers:
            logs = self.memory_handlers[phase].get_recent_logs()
        else:
            logs = self._read_log_file(phase)
        if level:
            threshold = logging.getLevelName(level.upper())
            logs = [
                entry for entry in logs
                if entry["level"] and logging.getLevelName(entry["level"]) >= threshold
            ]
        return logs[:limit]

    def _read_log_file(self, phase: str) -> List[Dict[str, str]]:
        log_file = self.log_file(phase)
        if not log_file.exists():
            return []
        parsed = []
        for line in reversed(log_file.read_text(encoding="utf-8", errors="ignore").splitlines()):
            match = self.LINE_PATTERN.match(line)
            if match:
                timestamp, level, name, message = match.groups()
                parsed.append({"timestamp": timestamp, "level": level, "logger": name, "message": message})
            else:
                # Traceback and other continuation lines
                parsed.append({"timestamp": "", "level": "", "logger": "", "message": line})
        return parsed
