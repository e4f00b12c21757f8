"""
Metrics report models and emission

Reports are written deterministically: identical reports produce identical
bytes in both formats.
"""

import json
import logging
from pathlib import Path
from typing import List, Literal, Optional

import pandas as pd
from pydantic import BaseModel, Field

try:
    from ..errors import IoError
except ImportError:
    from errors import IoError

logger = logging.getLogger(__name__)

AGGREGATE_ID = "aggregate"

CSV_COLUMNS = [
    "run_id", "phase", "config_hash", "agent_id", "start", "end", "days",
    "start_value", "final_value", "cumulative_return", "volatility", "sharpe", "trade_count",
]


class AgentMetrics(BaseModel):
    """Performance of one agent (or of the whole desk)"""
    agent_id: str = Field(..., description="Agent id, or 'aggregate'")
    days: int = Field(..., ge=0, description="Trading days valued")
    start_value: float = Field(..., description="Portfolio value at span start")
    final_value: float = Field(..., description="Portfolio value at span end")
    cumulative_return: float = Field(..., description="final_value / start_value - 1")
    volatility: float = Field(..., ge=0, description="Annualized sample std of daily returns")
    sharpe: Optional[float] = Field(None, description="Annualized, risk-free rate 0; null when undefined")
    trade_count: int = Field(..., ge=0)


class MetricsReport(BaseModel):
    """Per-agent and aggregate metrics of one phase"""
    run_id: str
    phase: str
    config_hash: str = Field(..., description="Provenance hash of the run config")
    start: str
    end: str
    agents: List[AgentMetrics]
    aggregate: AgentMetrics

    model_config = {
        "json_schema_extra": {
            "examples": [
                {
                    "run_id": "desk-01",
                    "phase": "test",
                    "config_hash": "3f2a9c0d11e4b7a8",
                    "start": "2023-03-01",
                    "end": "2023-03-31",
                    "agents": [],
                    "aggregate": {
                        "agent_id": "aggregate", "days": 22, "start_value": 300000.0,
                        "final_value": 303120.5, "cumulative_return": 0.0104,
                        "volatility": 0.081, "sharpe": 1.42, "trade_count": 57
                    }
                }
            ]
        }
    }

    def rows(self) -> List[dict]:
        rows = []
        for metrics in list(self.agents) + [self.aggregate]:
            rows.append({
                "run_id": self.run_id,
                "phase": self.phase,
                "config_hash": self.config_hash,
                "start": self.start,
                "end": self.end,
                **metrics.model_dump(),
            })
        return rows


def render_report(report: MetricsReport, fmt: Literal["csv", "json"]) -> str:
    """Report text in the requested format"""
    if fmt == "json":
        return json.dumps(report.model_dump(mode="json"), indent=2, sort_keys=True) + "\n"
    if fmt == "csv":
        frame = pd.DataFrame(report.rows(), columns=CSV_COLUMNS)
        return frame.to_csv(index=False, lineterminator="\n")
    raise ValueError(f"Unknown report format: {fmt}")


def emit_report(report: MetricsReport, fmt: Literal["csv", "json"], path: Path) -> Path:
    """
    Write a report

    Args:
        report: Computed report
        fmt: "csv" or "json"
        path: Output file

    Returns:
        The written path

    Raises:
        IoError: If the path is not writable
    """
    path = Path(path)
    text = render_report(report, fmt)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    except OSError as e:
        raise IoError(f"Cannot write report to {path}: {e}", {"path": str(path)})
    logger.info(f"Report written: {path}")
    return path


def load_report(path: Path) -> MetricsReport:
    """Parse a JSON report back"""
    return MetricsReport.model_validate_json(Path(path).read_text(encoding="utf-8"))
