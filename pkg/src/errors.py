"""
Exception hierarchy for tradmem

Every error carries a ``category`` used by the CLI to emit a
machine-readable error line.
"""

from typing import Any, Dict, Optional


class TradmemError(Exception):
    """Base error for all tradmem failures"""

    category = "TradmemError"

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}


# Memory scoring

class InvalidTimestamp(TradmemError):
    """Memory event postdates the prompt time"""
    category = "InvalidTimestamp"


class DegenerateEmbedding(TradmemError):
    """Zero-norm vector or token-free text"""
    category = "DegenerateEmbedding"


class DimensionMismatch(TradmemError):
    """Vectors of different dimension compared"""
    category = "DimensionMismatch"


class EmptyCandidateSet(TradmemError):
    """Min-max normalization over an empty list"""
    category = "EmptyCandidateSet"


# Storage and ingestion

class SchemaViolation(TradmemError):
    """Record violates its type invariants"""
    category = "SchemaViolation"


class InvalidRange(TradmemError):
    """Query window with from > to"""
    category = "InvalidRange"


class IngestError(TradmemError):
    """Malformed input file or row"""
    category = "IngestError"

    def __init__(self, message: str, line: Optional[int] = None,
                 details: Optional[Dict[str, Any]] = None):
        super().__init__(message, details)
        self.line = line
        if line is not None:
            self.details.setdefault("line", line)


class RunDirLocked(TradmemError):
    """Another invocation owns the run directory"""
    category = "RunDirLocked"


# Agent workflow

class MissingMarketData(TradmemError):
    """No price bar for (ticker, date)"""
    category = "MissingMarketData"


class DuplicateReflection(TradmemError):
    """Second immediate reflection for the same (agent, ticker, day)"""
    category = "DuplicateReflection"


class NoActivity(TradmemError):
    """Extended reflection over a period with no trading day"""
    category = "NoActivity"


# Decision cores

class InsufficientHistory(TradmemError):
    """Not enough price bars for the momentum window"""
    category = "InsufficientHistory"


class CoreUnavailable(TradmemError):
    """External decision core could not be reached"""
    category = "CoreUnavailable"


# Backtest and reporting

class UndefinedSharpe(TradmemError):
    """Standard deviation of daily returns is zero"""
    category = "UndefinedSharpe"


class IoError(TradmemError):
    """Report or export path not writable"""
    category = "IoError"


class ConfigError(TradmemError):
    """Run configuration missing or invalid"""
    category = "ConfigError"
