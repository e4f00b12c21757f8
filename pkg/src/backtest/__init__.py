"""Backtest workflow, metrics and reports"""

try:
    from .engine import Backtester, DayReport, PhaseResult
    from .metrics import compute_metrics
    from .report import AgentMetrics, MetricsReport, emit_report
except ImportError:
    from backtest.engine import Backtester, DayReport, PhaseResult
    from backtest.metrics import compute_metrics
    from backtest.report import AgentMetrics, MetricsReport, emit_report

__all__ = [
    "AgentMetrics",
    "Backtester",
    "DayReport",
    "MetricsReport",
    "PhaseResult",
    "compute_metrics",
    "emit_report",
]
