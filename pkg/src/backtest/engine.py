"""
Backtest orchestration

Simulated day (all times on the trading date):

    16:00  news delivery, contexts, decisions (train: executed at the close)
    16:15  immediate reflections (train)
    16:30  debates over shared tickers, 5 minutes per round
    17:00  execution of the debated decisions and reflections (test)
    18:00  memory maintenance sweep
    18:30  extended reflection on the last trading day of each 7-day bucket

Training debates only inform memory; the executed trade is the pre-debate
one. Test debates are deliberated before execution.
"""

import json
import logging
from dataclasses import dataclass, field
from datetime import date, datetime, time, timedelta
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

try:
    from ..agent import (Action, DecisionContext, Execution, Phase, Recommendation, TradeExecution,
                         TradingAgent)
    from ..debate import DebateCoordinator, Participant
    from ..decision_cores import DecisionCore, create_core
    from ..embedding import EmbeddingProvider, create_embedder
    from ..errors import ConfigError, InsufficientHistory, MissingMarketData
    from ..market_data import DataIngestor, NewsRouter, load_seed_memories
    from ..memory_engine import MemoryEngine
    from ..models.config import RunConfig
    from ..storage import Frequency, Warehouse
    from .audit import ContextAuditor, JsonlWriter
    from .metrics import aggregate_metrics, close_frame
    from .report import MetricsReport, emit_report
except ImportError:
    from agent import (Action, DecisionContext, Execution, Phase, Recommendation, TradeExecution,
                       TradingAgent)
    from debate import DebateCoordinator, Participant
    from decision_cores import DecisionCore, create_core
    from embedding import EmbeddingProvider, create_embedder
    from errors import ConfigError, InsufficientHistory, MissingMarketData
    from market_data import DataIngestor, NewsRouter, load_seed_memories
    from memory_engine import MemoryEngine
    from models.config import RunConfig
    from storage import Frequency, Warehouse
    from backtest.audit import ContextAuditor, JsonlWriter
    from backtest.metrics import aggregate_metrics, close_frame
    from backtest.report import MetricsReport, emit_report

logger = logging.getLogger(__name__)

DECISION_TIME = time(16, 0)
REFLECTION_TIME = time(16, 15)
DEBATE_TIME = time(16, 30)
SETTLE_TIME = time(17, 0)
SWEEP_TIME = time(18, 0)
WEEKLY_TIME = time(18, 30)

WEEK_DAYS = 7


def at(day: date, moment: time) -> datetime:
    return datetime.combine(day, moment)


@dataclass
class DayReport:
    """What happened on one simulated day"""
    day: date
    phase: Phase
    decisions: List[Dict[str, Any]] = field(default_factory=list)
    trades: int = 0
    shares_bought: int = 0
    shares_sold: int = 0
    debates: List[Dict[str, Any]] = field(default_factory=list)
    revisions: List[Dict[str, Any]] = field(default_factory=list)
    sweeps: Dict[str, Dict[str, int]] = field(default_factory=dict)
    extended_reflections: List[str] = field(default_factory=list)
    skipped: List[Dict[str, str]] = field(default_factory=list)
    news_delivered: int = 0
    lookahead_violations: int = 0
    step_times: Dict[str, str] = field(default_factory=dict)

    def record_execution(self, execution: Execution) -> None:
        if isinstance(execution, TradeExecution):
            self.trades += 1
            if execution.side.value == "Buy":
                self.shares_bought += execution.shares
            else:
                self.shares_sold += execution.shares

    def to_dict(self) -> Dict[str, Any]:
        return {
            "date": self.day.isoformat(),
            "phase": self.phase.value,
            "decisions": self.decisions,
            "trades": self.trades,
            "shares_bought": self.shares_bought,
            "shares_sold": self.shares_sold,
            "debates": self.debates,
            "revisions": self.revisions,
            "sweeps": self.sweeps,
            "extended_reflections": self.extended_reflections,
            "skipped": self.skipped,
            "news_delivered": self.news_delivered,
            "lookahead_violations": self.lookahead_violations,
            "step_times": self.step_times,
        }


@dataclass
class PhaseResult:
    """Outcome of a train or test run"""
    phase: Phase
    days: List[date]
    report: MetricsReport
    day_reports: List[DayReport]
    audit: Dict[str, Any]
    checkpoint: Optional[Path] = None


@dataclass
class _Decision:
    agent: TradingAgent
    context: DecisionContext
    recommendation: Recommendation
    shares_at_open: int
    execution: Optional[Execution] = None


class Backtester:
    """
    Runs the desk over a phase span against one run directory
    """

    def __init__(self, config: RunConfig, run_dir: Path, config_dir: Optional[Path] = None,
                 warehouse: Optional[Warehouse] = None, core: Optional[DecisionCore] = None,
                 embedder: Optional[EmbeddingProvider] = None):
        """
        Initialize Backtester

        Args:
            config: Validated run config
            run_dir: Run directory (logs, reports, checkpoints)
            config_dir: Base for relative data paths (default: cwd)
            warehouse: Preloaded warehouse (default: opened on run_dir)
            core: Decision core (default: built from config.core)
            embedder: Embedding provider (default: built from config.embedding)
        """
        self.config = config
        self.run_dir = Path(run_dir)
        self.config_dir = Path(config_dir) if config_dir else Path.cwd()
        self.embedder = embedder or create_embedder(
            config.embedding.kind, config.embedding.dimension,
            config.embedding.endpoint, config.embedding.timeout
        )
        self.warehouse = warehouse or Warehouse(self.run_dir, self.embedder).init()
        self.core = core or create_core(config.core)
        self.engine = MemoryEngine(
            self.warehouse.cognition,
            self.embedder,
            config.layer_params(),
            audit_path=self.run_dir / "memory_audit.jsonl",
        )
        self.coordinator = DebateCoordinator(
            self.warehouse, self.engine,
            max_rounds=config.debate.max_rounds,
            parallelism=config.core.parallelism if config.core.kind == "chat_completion" else 1,
        )
        self.agents: Dict[str, TradingAgent] = {}
        self.router: Optional[NewsRouter] = None
        self.auditor = ContextAuditor()
        self.reset_agents()

    def reset_agents(self) -> None:
        """Fresh portfolios; memory carries over through the store"""
        sizing = self.config.sizing.to_sizing()
        history = self.config.core.momentum_window + 1
        self.agents = {
            spec.agent_id: TradingAgent(
                character=spec.to_character(),
                engine=self.engine,
                warehouse=self.warehouse,
                sector_map=self.config.sectors,
                initial_cash=spec.initial_cash,
                sizing=sizing,
                k=self.config.k,
                history_sessions=history,
            )
            for spec in sorted(self.config.agents, key=lambda a: a.agent_id)
        }
        self.router = NewsRouter(
            self.warehouse, self.engine,
            [a.character for a in self.agents.values()],
            self.config.sectors,
        )

    # ==================== PREPARATION ====================

    def prepare(self, phase: Phase) -> Dict[str, Any]:
        """
        Ingest the configured data files and seed memories

        Ingestion is idempotent, so preparing an already-prepared run adds nothing.
        """
        paths = self.config.data.resolved(self.config_dir)
        ingestor = DataIngestor(self.warehouse)
        summary: Dict[str, Any] = {}

        if paths["prices"]:
            summary["prices"] = ingestor.ingest_prices(paths["prices"], Frequency.DAILY).to_dict()
        if paths["minute_prices"]:
            summary["minute_prices"] = ingestor.ingest_prices(paths["minute_prices"], Frequency.MINUTE).to_dict()
        if paths["holdings"]:
            summary["holdings"] = ingestor.ingest_holdings(paths["holdings"]).to_dict()
        if paths["news"]:
            summary["news"] = ingestor.ingest_news(paths["news"]).to_dict()
        if paths["seed_memories"]:
            span = self.config.span(phase.value)
            summary["seed_memories"] = load_seed_memories(
                paths["seed_memories"], self.engine, sorted(self.agents),
                until=at(span.start, DECISION_TIME),
            )
        return summary

    # ==================== DAY ====================

    def _decide(self, agent: TradingAgent, ticker: str, day: date, phase: Phase,
                report: DayReport) -> Optional[_Decision]:
        now = at(day, DECISION_TIME)
        try:
            context = agent.build_context(ticker, day, phase, now)
        except MissingMarketData as e:
            logger.warning(f"[{agent.agent_id}] skipping {ticker} on {day}: {e.message}")
            report.skipped.append({"agent_id": agent.agent_id, "ticker": ticker, "reason": e.category})
            return None

        violations = self.auditor.check(context)
        report.lookahead_violations += len(violations)

        try:
            recommendation = self.core.decide(context)
        except InsufficientHistory as e:
            logger.debug(f"[{agent.agent_id}] {ticker}: {e.message}")
            recommendation = Recommendation(Action.HOLD, "insufficient history")

        return _Decision(agent, context, recommendation, agent.portfolio.shares(ticker))

    def _execute(self, decision: _Decision, recommendation: Recommendation, moment: time,
                 report: DayReport, ledger: JsonlWriter) -> Execution:
        context = decision.context
        execution = decision.agent.execute(
            recommendation, context.ticker, context.facts.close, at(context.day, moment)
        )
        decision.execution = execution
        report.record_execution(execution)
        if isinstance(execution, TradeExecution):
            ledger.write(execution.to_dict())
        return execution

    def _reflect(self, decision: _Decision, recommendation: Recommendation, moment: time) -> None:
        agent = decision.agent
        context = decision.context
        realized = agent.position_return(context.ticker, context.day, decision.shares_at_open)
        agent.immediate_reflection(context, recommendation, decision.execution, realized,
                                   at(context.day, moment))

    def _debate(self, decisions: List[_Decision], day: date, phase: Phase,
                report: DayReport) -> Dict[Tuple[str, str], Recommendation]:
        by_ticker: Dict[str, List[_Decision]] = {}
        for decision in decisions:
            by_ticker.setdefault(decision.context.ticker, []).append(decision)

        revised: Dict[Tuple[str, str], Recommendation] = {}
        for ticker in sorted(by_ticker):
            group = by_ticker[ticker]
            if len(group) < 2:
                continue
            participants = []
            for d in group:
                execution = d.execution
                participants.append(Participant(
                    agent=d.agent,
                    core=self.core,
                    context=d.context,
                    recommendation=d.recommendation,
                    trade_volume=execution.shares if execution else 0,
                    trade_value=execution.value if execution else 0.0,
                    realized_return=d.agent.position_return(ticker, day, d.shares_at_open),
                ))
            pending = None
            if phase is Phase.TEST:
                pending = {d.agent.agent_id: d.recommendation.action for d in group}
            session = self.coordinator.convene(day, ticker, participants, phase,
                                               at(day, DEBATE_TIME), pending)
            if session is None:
                continue

            originals = {p.agent_id: p.recommendation for p in session.participants}
            final = self.coordinator.run(session)
            report.debates.append(session.to_dict())
            for agent_id, recommendation in sorted(final.items()):
                revised[(agent_id, ticker)] = recommendation
                if recommendation.action is not originals[agent_id].action:
                    report.revisions.append({
                        "agent_id": agent_id,
                        "ticker": ticker,
                        "session_id": session.session_id,
                        "original": originals[agent_id].action.value,
                        "revised": recommendation.action.value,
                        "executed": phase is Phase.TEST,
                    })
        return revised

    def run_day(self, day: date, phase: Phase, week: Optional[Tuple[date, date]] = None,
                ledger: Optional[JsonlWriter] = None) -> DayReport:
        """
        Simulate one trading day

        Args:
            day: Trading date
            phase: Train or Test
            week: 7-day bucket closing today, triggers extended reflections
            ledger: Ledger JSON-lines writer (default: ledger_<phase>.jsonl)
        """
        report = DayReport(day=day, phase=phase)
        ledger = ledger or JsonlWriter(self.run_dir / f"ledger_{phase.value.lower()}.jsonl")
        report.news_delivered = self.router.deliver_until(at(day, DECISION_TIME))

        decisions: List[_Decision] = []
        for agent_id in sorted(self.agents):
            agent = self.agents[agent_id]
            for ticker in agent.tickers():
                decision = self._decide(agent, ticker, day, phase, report)
                if decision is not None:
                    decisions.append(decision)
        report.step_times["decisions"] = at(day, DECISION_TIME).isoformat()

        if phase is Phase.TRAIN:
            for decision in decisions:
                self._execute(decision, decision.recommendation, DECISION_TIME, report, ledger)
            for decision in decisions:
                self._reflect(decision, decision.recommendation, REFLECTION_TIME)
            if self.config.debate.enabled:
                self._debate(decisions, day, phase, report)
                report.step_times["debates"] = at(day, DEBATE_TIME).isoformat()
            final = {(d.agent.agent_id, d.context.ticker): d.recommendation for d in decisions}
        else:
            revised: Dict[Tuple[str, str], Recommendation] = {}
            if self.config.debate.enabled:
                revised = self._debate(decisions, day, phase, report)
                report.step_times["debates"] = at(day, DEBATE_TIME).isoformat()
            final = {}
            for decision in decisions:
                key = (decision.agent.agent_id, decision.context.ticker)
                final[key] = revised.get(key, decision.recommendation)
                self._execute(decision, final[key], SETTLE_TIME, report, ledger)
            for decision in decisions:
                self._reflect(decision, final[(decision.agent.agent_id, decision.context.ticker)],
                              SETTLE_TIME)
            report.step_times["settle"] = at(day, SETTLE_TIME).isoformat()

        for decision in decisions:
            key = (decision.agent.agent_id, decision.context.ticker)
            report.decisions.append({
                "agent_id": key[0],
                "ticker": key[1],
                "action": decision.recommendation.action.value,
                "executed": final[key].action.value,
                "shares": decision.execution.shares if decision.execution else 0,
            })

        for agent_id in sorted(self.agents):
            agent = self.agents[agent_id]
            agent.mark_to_market(day)
            sweep = self.engine.maintenance_sweep(agent_id, at(day, SWEEP_TIME))
            report.sweeps[agent_id] = {
                "promoted": sweep.promoted_count,
                "purged": sweep.purged_count,
                "pinned": len(sweep.pinned),
                "retained": sweep.retained,
            }
        report.step_times["sweep"] = at(day, SWEEP_TIME).isoformat()

        if week is not None:
            for agent_id in sorted(self.agents):
                reflection = self.agents[agent_id].extended_reflection(week[0], week[1], at(day, WEEKLY_TIME))
                report.extended_reflections.append(agent_id)
                logger.debug(f"[{agent_id}] extended reflection {reflection.record_id}")
            report.step_times["weekly"] = at(day, WEEKLY_TIME).isoformat()

        logger.info(
            f"{phase.value} {day}: {len(decisions)} decisions, {report.trades} trades, "
            f"{len(report.debates)} debates, {len(report.revisions)} revisions"
        )
        return report

    # ==================== PHASE ====================

    def weekly_buckets(self, days: List[date], start: date) -> Dict[date, Tuple[date, date]]:
        """Last trading day of each 7-calendar-day bucket -> bucket span"""
        closing: Dict[date, Tuple[date, date]] = {}
        for i, day in enumerate(days):
            bucket = (day - start).days // WEEK_DAYS
            next_bucket = (days[i + 1] - start).days // WEEK_DAYS if i + 1 < len(days) else None
            if next_bucket != bucket:
                bucket_start = start + timedelta(days=bucket * WEEK_DAYS)
                closing[day] = (bucket_start, bucket_start + timedelta(days=WEEK_DAYS - 1))
        return closing

    def checkpoint_path(self, phase: Phase) -> Path:
        return self.run_dir / "checkpoints" / f"{phase.value.lower()}_end.json"

    def run(self, phase: Phase) -> PhaseResult:
        """
        Run a whole phase span and emit its report

        Raises:
            ConfigError: If the phase already completed in this run directory
            MissingMarketData: If the span has no trading day
        """
        checkpoint = self.checkpoint_path(phase)
        if checkpoint.exists():
            raise ConfigError(
                f"{phase.value} already completed in {self.run_dir}",
                {"checkpoint": str(checkpoint)}
            )
        if phase is Phase.TEST and not self.checkpoint_path(Phase.TRAIN).exists():
            logger.warning("No training checkpoint found; test starts from the stored memory state")

        span = self.config.span(phase.value)
        self.reset_agents()
        self.auditor = ContextAuditor()
        days = self.warehouse.raw.trading_days(span.start, span.end)
        if not days:
            raise MissingMarketData(
                f"No daily bars between {span.start} and {span.end}",
                {"start": span.start.isoformat(), "end": span.end.isoformat()}
            )

        name = phase.value.lower()
        ledger = JsonlWriter(self.run_dir / f"ledger_{name}.jsonl")
        audit_log = JsonlWriter(self.run_dir / f"audit_{name}.jsonl")
        ledger.reset()
        audit_log.reset()

        weeks = self.weekly_buckets(days, span.start)
        logger.info(f"{phase.value} phase: {len(days)} trading days {days[0]}..{days[-1]}")

        day_reports = []
        for day in days:
            report = self.run_day(day, phase, week=weeks.get(day), ledger=ledger)
            audit_log.write(report.to_dict())
            day_reports.append(report)

        metrics = self.compute_report(phase, days)
        for fmt in ("json", "csv"):
            emit_report(metrics, fmt, self.run_dir / f"report_{name}.{fmt}")
            emit_report(metrics, fmt, self.run_dir / f"report.{fmt}")

        path = self.write_checkpoint(phase, days[-1])
        logger.info(
            f"{phase.value} complete: cumulative {metrics.aggregate.cumulative_return:+.4%}, "
            f"lookahead violations {len(self.auditor.violations)}"
        )
        return PhaseResult(phase, days, metrics, day_reports, self.auditor.summary(), path)

    def compute_report(self, phase: Phase, days: List[date]) -> MetricsReport:
        raw = self.warehouse.raw
        tickers = sorted(self.config.sectors)
        closes = {t: {d: raw.close_on(t, d) for d in days if raw.close_on(t, d) is not None}
                  for t in tickers}
        prices = close_frame(closes).reindex(days)
        results = aggregate_metrics(
            {a: agent.portfolio.ledger for a, agent in self.agents.items()},
            prices,
            {a: agent.initial_cash for a, agent in self.agents.items()},
        )
        return MetricsReport(
            run_id=self.config.run_id,
            phase=phase.value.lower(),
            config_hash=self.config.config_hash(),
            start=days[0].isoformat(),
            end=days[-1].isoformat(),
            agents=results[:-1],
            aggregate=results[-1],
        )

    def write_checkpoint(self, phase: Phase, last_day: date) -> Path:
        """Phase-boundary snapshot of log positions and portfolios"""
        path = self.checkpoint_path(phase)
        path.parent.mkdir(parents=True, exist_ok=True)
        snapshot = {
            "phase": phase.value,
            "last_date": last_day.isoformat(),
            "config_hash": self.config.config_hash(),
            "cognition_last_id": self.warehouse.cognition.log.last_id,
            "raw_last_id": self.warehouse.raw.log.last_id,
            "agents": {
                agent_id: {
                    "cash": agent.portfolio.cash,
                    "positions": {t: p.shares for t, p in sorted(agent.portfolio.positions.items()) if p.shares},
                    "trades": len(agent.portfolio.ledger),
                }
                for agent_id, agent in sorted(self.agents.items())
            },
        }
        path.write_text(json.dumps(snapshot, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return path
