"""
Trading agent

Character profile, layer assignment, context building, trade execution,
portfolio accounting and immediate / extended reflections.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from datetime import date, datetime, time, timedelta
from enum import Enum
from typing import Any, Dict, FrozenSet, Iterable, List, Mapping, Optional, Tuple, Union

try:
    from .errors import MissingMarketData, NoActivity, SchemaViolation
    from .memory_engine import LAYER_ORDER, LayerKind, MemoryEngine, MemoryOrigin
    from .storage import CognitionKind, RawKind, ReflectionFlag, Warehouse
except ImportError:
    from errors import MissingMarketData, NoActivity, SchemaViolation
    from memory_engine import LAYER_ORDER, LayerKind, MemoryEngine, MemoryOrigin
    from storage import CognitionKind, RawKind, ReflectionFlag, Warehouse

logger = logging.getLogger(__name__)

REFLECTION_WINDOW_DAYS = 7


class RiskPreference(str, Enum):
    """Trader risk appetite"""
    SEEKING = "Seeking"
    NEUTRAL = "Neutral"
    AVERSE = "Averse"

    @property
    def label(self) -> str:
        return f"risk-{self.value.lower()}"


class Phase(str, Enum):
    """Workflow phase a prompt or context belongs to"""
    TRAIN = "Train"
    TEST = "Test"
    DEBATE = "Debate"


class Action(str, Enum):
    """The five position recommendations"""
    SIG_INCREASE = "SigIncrease"
    SLIGHT_INCREASE = "SlightIncrease"
    HOLD = "Hold"
    SLIGHT_DECREASE = "SlightDecrease"
    SIG_DECREASE = "SigDecrease"

    @property
    def label(self) -> str:
        return _ACTION_LABELS[self]

    @property
    def strength(self) -> int:
        """-2 (SigDecrease) .. +2 (SigIncrease)"""
        return _ACTION_STRENGTH[self]

    @property
    def direction(self) -> int:
        return (self.strength > 0) - (self.strength < 0)

    @classmethod
    def from_strength(cls, strength: int) -> "Action":
        strength = max(-2, min(2, strength))
        return next(action for action, s in _ACTION_STRENGTH.items() if s == strength)

    def notch(self, toward: int) -> "Action":
        """One step in the sign of ``toward``, clamped to the scale"""
        step = (toward > 0) - (toward < 0)
        return Action.from_strength(self.strength + step)


_ACTION_LABELS = {
    Action.SIG_INCREASE: "significantly increase position",
    Action.SLIGHT_INCREASE: "slightly increase position",
    Action.HOLD: "hold",
    Action.SLIGHT_DECREASE: "slightly decrease position",
    Action.SIG_DECREASE: "significantly decrease position",
}

_ACTION_STRENGTH = {
    Action.SIG_INCREASE: 2,
    Action.SLIGHT_INCREASE: 1,
    Action.HOLD: 0,
    Action.SLIGHT_DECREASE: -1,
    Action.SIG_DECREASE: -2,
}


def parse_action(text: str) -> Optional[Action]:
    """
    Parse an action from its enum value or its label

    Accepts e.g. "SigIncrease" or "Significantly increase position",
    case-insensitive, surrounding punctuation ignored.
    """
    cleaned = (text or "").strip().strip(".:*`\"'").strip().lower()
    for action in Action:
        if cleaned in (action.value.lower(), action.label):
            return action
    return None


@dataclass(frozen=True)
class TraderCharacter:
    """Risk preference plus sector scope of one agent"""
    agent_id: str
    risk: RiskPreference
    sectors: FrozenSet[str]

    def __post_init__(self):
        if not self.sectors:
            raise ValueError(f"Agent {self.agent_id} must cover at least one sector")

    def covers(self, sector: Optional[str]) -> bool:
        return sector in self.sectors

    def profile(self) -> str:
        """One-line character framing"""
        return f"{self.risk.label} trader covering {', '.join(sorted(self.sectors))}"

    def to_dict(self) -> Dict[str, Any]:
        return {"agent_id": self.agent_id, "risk": self.risk.value, "sectors": sorted(self.sectors)}


@dataclass(frozen=True)
class Recommendation:
    """One of the five actions with its rationale"""
    action: Action
    rationale: str = ""

    def to_dict(self) -> Dict[str, Any]:
        return {"action": self.action.value, "rationale": self.rationale}


def assign_layer(origin: MemoryOrigin, content: Optional[str] = None) -> LayerKind:
    """
    Layer a new memory lands in, by origin

    Macro indicators go long-term, strategy documents and weekly reflections
    mid-term, and everything daily (news, immediate reflections, debate
    feedback, trade outcomes) short-term.
    """
    origin = MemoryOrigin(origin)
    if origin is MemoryOrigin.MACRO_INDICATOR:
        return LayerKind.LONG
    if origin in (MemoryOrigin.STRATEGY_DOC, MemoryOrigin.EXTENDED_REFLECTION):
        return LayerKind.MIDDLE
    return LayerKind.SHORT


# ==================== CONTEXT ====================

@dataclass(frozen=True)
class MemorySnippet:
    """A retrieved memory with its ranking score"""
    event_id: str
    layer: LayerKind
    text: str
    timestamp: datetime
    origin: MemoryOrigin
    gamma: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "event_id": self.event_id,
            "layer": self.layer.value,
            "text": self.text,
            "timestamp": self.timestamp.isoformat(),
            "origin": self.origin.value,
            "gamma": round(self.gamma, 6),
        }


@dataclass(frozen=True)
class HoldingFact:
    """A same-day fund holding change"""
    fund: str
    shares: int
    direction: str
    timestamp: datetime

    def to_dict(self) -> Dict[str, Any]:
        return {"fund": self.fund, "shares": self.shares, "direction": self.direction,
                "timestamp": self.timestamp.isoformat()}


@dataclass(frozen=True)
class MarketFacts:
    """Price and (training only) fund facts for one ticker-day"""
    ticker: str
    day: date
    close: float
    history: Tuple[Tuple[date, float], ...]
    holdings: Tuple[HoldingFact, ...] = ()

    @property
    def net_fund_direction(self) -> int:
        net = sum(h.shares for h in self.holdings)
        return (net > 0) - (net < 0)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "ticker": self.ticker,
            "date": self.day.isoformat(),
            "close": self.close,
            "history": [[d.isoformat(), c] for d, c in self.history],
            "holdings": [h.to_dict() for h in self.holdings],
        }


@dataclass(frozen=True)
class ContextNote:
    """A prior reflection or received debate feedback"""
    kind: str
    timestamp: datetime
    text: str
    sender_id: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind, "timestamp": self.timestamp.isoformat(),
                "text": self.text, "sender_id": self.sender_id}


@dataclass(frozen=True)
class DecisionContext:
    """Everything a decision core sees for one (agent, ticker, day)"""
    character: TraderCharacter
    ticker: str
    day: date
    decision_time: datetime
    phase: Phase
    k: int
    memories: Mapping[LayerKind, Tuple[MemorySnippet, ...]]
    facts: MarketFacts
    notes: Tuple[ContextNote, ...] = ()

    def cited_ids(self) -> List[str]:
        return [s.event_id for layer in LAYER_ORDER for s in self.memories.get(layer, ())]

    def data_timestamps(self) -> List[datetime]:
        """Timestamp of every datum, for lookahead audits"""
        stamps = [s.timestamp for layer in LAYER_ORDER for s in self.memories.get(layer, ())]
        stamps += [datetime.combine(d, time()) for d, _ in self.facts.history]
        stamps += [h.timestamp for h in self.facts.holdings]
        stamps += [n.timestamp for n in self.notes]
        return stamps

    def to_dict(self) -> Dict[str, Any]:
        return {
            "agent_id": self.character.agent_id,
            "character": self.character.to_dict(),
            "ticker": self.ticker,
            "date": self.day.isoformat(),
            "decision_time": self.decision_time.isoformat(),
            "phase": self.phase.value,
            "k": self.k,
            "memories": {layer.value: [s.to_dict() for s in self.memories.get(layer, ())]
                         for layer in LAYER_ORDER},
            "facts": self.facts.to_dict(),
            "notes": [n.to_dict() for n in self.notes],
        }


# ==================== PORTFOLIO ====================

class TradeSide(str, Enum):
    BUY = "Buy"
    SELL = "Sell"


@dataclass(frozen=True)
class TradeExecution:
    """One filled trade"""
    agent_id: str
    timestamp: datetime
    ticker: str
    side: TradeSide
    shares: int
    price: float
    action: Action

    @property
    def value(self) -> float:
        return self.shares * self.price

    def to_dict(self) -> Dict[str, Any]:
        return {
            "agent_id": self.agent_id,
            "timestamp": self.timestamp.isoformat(),
            "ticker": self.ticker,
            "side": self.side.value,
            "shares": self.shares,
            "price": self.price,
            "action": self.action.value,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TradeExecution":
        return cls(
            agent_id=data["agent_id"],
            timestamp=datetime.fromisoformat(data["timestamp"]),
            ticker=data["ticker"],
            side=TradeSide(data["side"]),
            shares=int(data["shares"]),
            price=float(data["price"]),
            action=Action(data["action"]),
        )


@dataclass(frozen=True)
class NoTrade:
    """A recommendation that produced no fill"""
    agent_id: str
    timestamp: datetime
    ticker: str
    action: Action
    reason: str

    shares = 0
    value = 0.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "agent_id": self.agent_id,
            "timestamp": self.timestamp.isoformat(),
            "ticker": self.ticker,
            "action": self.action.value,
            "reason": self.reason,
        }


Execution = Union[TradeExecution, NoTrade]


@dataclass
class Position:
    shares: int = 0
    cost_basis: float = 0.0


@dataclass
class PortfolioState:
    """Cash, long-only positions and the trade ledger"""
    cash: float
    positions: Dict[str, Position] = field(default_factory=dict)
    ledger: List[TradeExecution] = field(default_factory=list)

    def shares(self, ticker: str) -> int:
        position = self.positions.get(ticker)
        return position.shares if position else 0

    def apply(self, execution: TradeExecution) -> None:
        """
        Book a fill

        Raises:
            SchemaViolation: If the fill would make cash or shares negative
        """
        if execution.shares <= 0 or execution.price <= 0:
            raise SchemaViolation(f"Invalid fill: {execution.to_dict()}")
        position = self.positions.setdefault(execution.ticker, Position())
        cost = execution.shares * execution.price

        if execution.side is TradeSide.BUY:
            if cost > self.cash:
                raise SchemaViolation(f"Buy of {cost:.2f} exceeds cash {self.cash:.2f}")
            self.cash -= cost
            position.cost_basis += cost
            position.shares += execution.shares
        else:
            if execution.shares > position.shares:
                raise SchemaViolation(
                    f"Sell of {execution.shares} exceeds position {position.shares} in {execution.ticker}"
                )
            average = position.cost_basis / position.shares
            position.cost_basis -= average * execution.shares
            position.shares -= execution.shares
            self.cash += cost
            if position.shares == 0:
                position.cost_basis = 0.0

        self.ledger.append(execution)

    def market_value(self, prices: Mapping[str, float]) -> float:
        """cash + sum of shares * price"""
        value = self.cash
        for ticker in sorted(self.positions):
            shares = self.positions[ticker].shares
            if shares:
                value += shares * prices[ticker]
        return value

    @classmethod
    def from_ledger(cls, initial_cash: float, ledger: Iterable[TradeExecution]) -> "PortfolioState":
        """Rebuild a portfolio by replaying fills"""
        portfolio = cls(cash=initial_cash)
        for execution in ledger:
            portfolio.apply(execution)
        return portfolio


@dataclass(frozen=True)
class TradeSizing:
    """Predetermined trade values of the four non-Hold actions"""
    sig_buy_fraction: float = 0.25
    slight_buy_fraction: float = 0.10
    sig_sell_fraction: float = 0.25
    slight_sell_fraction: float = 0.10
    significant_return: float = 0.02


DEFAULT_SIZING = TradeSizing()


def execute(recommendation: Recommendation, portfolio: PortfolioState, price: float,
            agent_id: str, ticker: str, timestamp: datetime,
            sizing: TradeSizing = DEFAULT_SIZING) -> Execution:
    """
    Size and book a recommendation

    Buys spend a fraction of cash, floored to whole shares. Sells release a
    fraction of held shares, floored, with a minimum of one share.
    """
    if price <= 0:
        raise SchemaViolation(f"Execution price must be positive, got {price}")

    action = recommendation.action
    if action is Action.HOLD:
        return NoTrade(agent_id, timestamp, ticker, action, "hold")

    if action.direction > 0:
        fraction = sizing.sig_buy_fraction if action is Action.SIG_INCREASE else sizing.slight_buy_fraction
        shares = math.floor(portfolio.cash * fraction / price)
        if shares < 1:
            return NoTrade(agent_id, timestamp, ticker, action, "insufficient cash")
        side = TradeSide.BUY
    else:
        held = portfolio.shares(ticker)
        if held == 0:
            return NoTrade(agent_id, timestamp, ticker, action, "no position")
        fraction = sizing.sig_sell_fraction if action is Action.SIG_DECREASE else sizing.slight_sell_fraction
        shares = max(1, math.floor(held * fraction))
        side = TradeSide.SELL

    execution = TradeExecution(agent_id, timestamp, ticker, side, shares, price, action)
    portfolio.apply(execution)
    return execution


# ==================== REFLECTIONS ====================

@dataclass(frozen=True)
class Reflection:
    """Daily per-ticker or weekly self-assessment"""
    flag: ReflectionFlag
    agent_id: str
    timestamp: datetime
    rationale: str
    trade_volume: int
    realized_return: float
    ticker: Optional[str] = None
    day: Optional[date] = None
    action: Optional[Action] = None
    trade_value: float = 0.0
    period_start: Optional[date] = None
    period_end: Optional[date] = None
    cited_ids: Tuple[str, ...] = ()
    record_id: Optional[int] = None

    def to_body(self) -> Dict[str, Any]:
        body = {
            "rationale": self.rationale,
            "trade_volume": self.trade_volume,
            "realized_return": self.realized_return,
            "trade_value": self.trade_value,
        }
        if self.flag is ReflectionFlag.IMMEDIATE:
            body.update({
                "ticker": self.ticker,
                "date": self.day.isoformat(),
                "action": self.action.value,
                "cited_ids": list(self.cited_ids),
            })
        else:
            body.update({
                "period_start": self.period_start.isoformat(),
                "period_end": self.period_end.isoformat(),
            })
        return body

    def to_text(self) -> str:
        if self.flag is ReflectionFlag.IMMEDIATE:
            return (
                f"Daily reflection on {self.ticker} for {self.day.isoformat()}: chose to "
                f"{self.action.label}, traded {self.trade_volume} shares, position return "
                f"{self.realized_return:+.2%}. {self.rationale}"
            )
        return (
            f"Weekly reflection {self.period_start.isoformat()} to {self.period_end.isoformat()}: "
            f"traded {self.trade_volume} shares, portfolio return {self.realized_return:+.2%}. "
            f"{self.rationale}"
        )


class TradingAgent:
    """
    One trader: character, memory space and portfolio

    All memory access goes through the shared MemoryEngine; all persisted
    cognition through the warehouse.
    """

    def __init__(self, character: TraderCharacter, engine: MemoryEngine, warehouse: Warehouse,
                 sector_map: Mapping[str, str], initial_cash: float,
                 sizing: TradeSizing = DEFAULT_SIZING, k: int = 3, history_sessions: int = 6):
        """
        Initialize TradingAgent

        Args:
            character: Risk preference and sector scope
            engine: Memory engine shared by the desk
            warehouse: Run storage
            sector_map: Ticker to sector tag
            initial_cash: Starting cash
            sizing: Trade sizing fractions
            k: Memories retrieved per layer
            history_sessions: Daily closes included in market facts
        """
        if initial_cash < 0:
            raise ValueError("initial_cash must be non-negative")
        self.character = character
        self.engine = engine
        self.warehouse = warehouse
        self.sector_map = dict(sector_map)
        self.initial_cash = initial_cash
        self.sizing = sizing
        self.k = k
        self.history_sessions = history_sessions
        self.portfolio = PortfolioState(cash=initial_cash)
        self.value_history: Dict[date, float] = {}

    @property
    def agent_id(self) -> str:
        return self.character.agent_id

    def tickers(self) -> List[str]:
        """Tickers in the agent's sector scope"""
        return sorted(t for t, sector in self.sector_map.items() if self.character.covers(sector))

    def covers_ticker(self, ticker: str) -> bool:
        return self.character.covers(self.sector_map.get(ticker))

    def retrieval_prompt(self, ticker: str, day: date) -> str:
        return f"{ticker} trading decision on {day.isoformat()} for a {self.character.profile()}"

    # ==================== CONTEXT ====================

    def build_context(self, ticker: str, day: date, phase: Phase, now: datetime,
                      k: Optional[int] = None) -> DecisionContext:
        """
        Assemble the decision context for one ticker-day

        Retrieval bumps the access counters of the returned memories.

        Raises:
            MissingMarketData: If no daily bar exists for (ticker, day)
        """
        raw = self.warehouse.raw
        close = raw.close_on(ticker, day)
        if close is None:
            raise MissingMarketData(
                f"No daily bar for {ticker} on {day.isoformat()}",
                {"ticker": ticker, "date": day.isoformat()}
            )

        k = k or self.k
        prompt = self.retrieval_prompt(ticker, day)
        memories = {}
        for layer in LAYER_ORDER:
            hits = self.engine.retrieve_top_k(self.agent_id, layer, prompt, k, now)
            memories[layer] = tuple(
                MemorySnippet(e.id, e.layer, e.text, e.timestamp, e.origin, s.gamma) for e, s in hits
            )

        holdings: Tuple[HoldingFact, ...] = ()
        if phase is Phase.TRAIN:
            holdings = tuple(
                HoldingFact(r.payload["fund"], r.payload["shares"], r.payload["direction"], r.timestamp)
                for r in raw.on_day(RawKind.HOLDING_RECORD, day, ticker)
            )

        facts = MarketFacts(
            ticker=ticker,
            day=day,
            close=close,
            history=tuple(raw.price_history(ticker, day, self.history_sessions)),
            holdings=holdings,
        )
        notes = self.recent_notes(now) if phase is Phase.TEST else ()

        return DecisionContext(
            character=self.character,
            ticker=ticker,
            day=day,
            decision_time=now,
            phase=phase,
            k=k,
            memories=memories,
            facts=facts,
            notes=notes,
        )

    def recent_notes(self, now: datetime, days: int = REFLECTION_WINDOW_DAYS) -> Tuple[ContextNote, ...]:
        """Own reflections and received debate feedback of the past week"""
        cognition = self.warehouse.cognition
        start = now - timedelta(days=days)
        notes = []
        for record in cognition.query_window(CognitionKind.REFLECTION, self.agent_id, start, now):
            if record.agent_id != self.agent_id:
                continue
            notes.append(ContextNote(
                kind=f"{record.reflection_flag.value.lower()}_reflection",
                timestamp=record.timestamp,
                text=record.body.get("text") or record.body.get("rationale", ""),
            ))
        for record in cognition.query_window(CognitionKind.DEBATE, self.agent_id, start, now):
            if record.receiver_id != self.agent_id:
                continue
            notes.append(ContextNote(
                kind="debate_feedback",
                timestamp=record.timestamp,
                text=record.body.get("feedback", ""),
                sender_id=record.agent_id,
            ))
        notes.sort(key=lambda n: (n.timestamp, n.kind, n.sender_id or ""))
        return tuple(notes)

    # ==================== TRADING ====================

    def execute(self, recommendation: Recommendation, ticker: str, price: float,
                timestamp: datetime) -> Execution:
        execution = execute(recommendation, self.portfolio, price, self.agent_id, ticker,
                            timestamp, self.sizing)
        if isinstance(execution, TradeExecution):
            logger.info(
                f"[{self.agent_id}] {execution.side.value} {execution.shares} {ticker} @ {price:.4f} "
                f"({recommendation.action.value})"
            )
        else:
            logger.debug(f"[{self.agent_id}] no trade on {ticker}: {execution.reason}")
        return execution

    def position_return(self, ticker: str, day: date, shares_at_open: int) -> float:
        """
        Daily return of a position held at the previous close

        close_t / close_{t-1} - 1 when shares were held, 0 otherwise.
        """
        if shares_at_open <= 0:
            return 0.0
        close = self.warehouse.raw.close_on(ticker, day)
        previous = self.warehouse.raw.previous_close(ticker, day)
        if close is None or previous is None:
            return 0.0
        return close / previous[1] - 1.0

    def mark_to_market(self, day: date) -> float:
        """Record end-of-day portfolio value"""
        prices = {}
        for ticker, position in self.portfolio.positions.items():
            if position.shares:
                close = self.warehouse.raw.close_on(ticker, day)
                if close is None:
                    previous = self.warehouse.raw.previous_close(ticker, day)
                    close = previous[1] if previous else position.cost_basis / position.shares
                prices[ticker] = close
        value = self.portfolio.market_value(prices)
        self.value_history[day] = value
        return value

    # ==================== REFLECTIONS ====================

    def immediate_reflection(self, context: DecisionContext, decision: Recommendation,
                             execution: Execution, realized_return: float,
                             now: datetime) -> Reflection:
        """
        Store the daily reflection for one ticker

        Also lands as a short-term memory. A position move of at least the
        significant-return threshold boosts every memory cited in the context.

        Raises:
            DuplicateReflection: If one was already stored for (agent, ticker, day)
        """
        volume = execution.shares
        if isinstance(execution, TradeExecution):
            side = f"{execution.side.value.lower()} {execution.shares} at {execution.price:.4f}"
        else:
            side = f"no trade ({execution.reason})"

        reflection = Reflection(
            flag=ReflectionFlag.IMMEDIATE,
            agent_id=self.agent_id,
            timestamp=now,
            rationale=f"{decision.rationale} Outcome: {side}.".strip(),
            trade_volume=volume,
            realized_return=realized_return,
            ticker=context.ticker,
            day=context.day,
            action=decision.action,
            trade_value=execution.value,
            cited_ids=tuple(context.cited_ids()),
        )
        body = dict(reflection.to_body(), text=reflection.to_text())
        record_id = self.warehouse.cognition.add_reflection(
            self.agent_id, ReflectionFlag.IMMEDIATE, body, now
        )
        self.engine.add_memory(
            self.agent_id,
            assign_layer(MemoryOrigin.IMMEDIATE_REFLECTION),
            MemoryOrigin.IMMEDIATE_REFLECTION,
            reflection.to_text(),
            now,
            source_ref=f"reflection:{record_id}",
        )

        if abs(realized_return) >= self.sizing.significant_return:
            boosted = self.engine.boost(self.agent_id, reflection.cited_ids, now)
            logger.info(
                f"[{self.agent_id}] {context.ticker} moved {realized_return:+.2%}, "
                f"boosted {len(boosted)} cited memories"
            )

        return replace(reflection, record_id=record_id)

    def extended_reflection(self, period_start: date, period_end: date,
                            now: datetime) -> Reflection:
        """
        Weekly aggregate over [period_start, period_end]

        Raises:
            NoActivity: If no trading day falls in the period
        """
        days = sorted(d for d in self.value_history if period_start <= d <= period_end)
        if not days:
            raise NoActivity(
                f"No trading day between {period_start.isoformat()} and {period_end.isoformat()}",
                {"agent_id": self.agent_id}
            )

        before = [d for d in self.value_history if d < period_start]
        start_value = self.value_history[max(before)] if before else self.initial_cash
        end_value = self.value_history[days[-1]]
        weekly_return = end_value / start_value - 1.0 if start_value else 0.0

        trades = [
            t for t in self.portfolio.ledger
            if period_start <= t.timestamp.date() <= period_end
        ]
        volume = sum(t.shares for t in trades)
        traded_value = sum(t.value for t in trades)

        price_moves = []
        for ticker in self.tickers():
            closes = [(d, self.warehouse.raw.close_on(ticker, d)) for d in days]
            closes = [(d, c) for d, c in closes if c is not None]
            if closes:
                first, last = closes[0][1], closes[-1][1]
                price_moves.append(f"{ticker} {first:.2f}->{last:.2f}")

        buys = sum(1 for t in trades if t.side is TradeSide.BUY)
        sells = len(trades) - buys
        verdict = "gained" if weekly_return > 0 else "lost" if weekly_return < 0 else "was flat"
        rationale = (
            f"Prices: {'; '.join(price_moves) or 'none'}. Trading trend: {buys} buys, {sells} sells. "
            f"Self-evaluation: the portfolio {verdict} over {len(days)} trading days."
        )

        reflection = Reflection(
            flag=ReflectionFlag.EXTENDED,
            agent_id=self.agent_id,
            timestamp=now,
            rationale=rationale,
            trade_volume=volume,
            realized_return=weekly_return,
            trade_value=traded_value,
            period_start=period_start,
            period_end=period_end,
        )
        body = dict(reflection.to_body(), text=reflection.to_text())
        record_id = self.warehouse.cognition.add_reflection(
            self.agent_id, ReflectionFlag.EXTENDED, body, now
        )
        self.engine.add_memory(
            self.agent_id,
            assign_layer(MemoryOrigin.EXTENDED_REFLECTION),
            MemoryOrigin.EXTENDED_REFLECTION,
            reflection.to_text(),
            now,
            source_ref=f"reflection:{record_id}",
        )
        logger.info(
            f"[{self.agent_id}] weekly reflection {period_start}..{period_end}: "
            f"return {weekly_return:+.2%}, volume {volume}"
        )
        return replace(reflection, record_id=record_id)