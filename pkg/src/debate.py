"""
Inter-agent debate over shared tickers

Round-synchronous complete-graph exchange: in every round each participant
reviews every other participant's package, and each review is stored as a
debate record tagged with the package owner as receiver. Every review also
becomes a short-term memory of its receiver.
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

try:
    from .agent import (Action, DecisionContext, Phase, Recommendation, TradingAgent,
                        assign_layer)
    from .decision_cores.base import DebatePackage, DecisionCore, PeerFeedback
    from .errors import IoError, SchemaViolation, TradmemError
    from .memory_engine import MemoryEngine, MemoryOrigin
    from .storage import CognitionKind, CognitionStore, Warehouse
except ImportError:
    from agent import (Action, DecisionContext, Phase, Recommendation, TradingAgent,
                       assign_layer)
    from decision_cores.base import DebatePackage, DecisionCore, PeerFeedback
    from errors import IoError, SchemaViolation, TradmemError
    from memory_engine import MemoryEngine, MemoryOrigin
    from storage import CognitionKind, CognitionStore, Warehouse

logger = logging.getLogger(__name__)

DEFAULT_MAX_ROUNDS = 2
ROUND_SPACING = timedelta(minutes=5)


@dataclass
class Participant:
    """An agent's seat in one debate session"""
    agent: TradingAgent
    core: DecisionCore
    context: DecisionContext
    recommendation: Recommendation
    trade_volume: int = 0
    trade_value: float = 0.0
    realized_return: float = 0.0

    @property
    def agent_id(self) -> str:
        return self.agent.agent_id

    def package(self) -> DebatePackage:
        memories = tuple(s for layer in self.context.memories.values() for s in layer)
        return DebatePackage(
            agent_id=self.agent_id,
            ticker=self.context.ticker,
            action=self.recommendation.action,
            rationale=self.recommendation.rationale,
            trade_value=self.trade_value,
            trade_volume=self.trade_volume,
            realized_return=self.realized_return,
            memories=memories,
        )


@dataclass
class DebateMessage:
    """One stored feedback message"""
    session_id: str
    round: int
    sender_id: str
    receiver_id: str
    ticker: str
    timestamp: datetime
    payload: Dict[str, Any]
    record_id: Optional[int] = None

    def __post_init__(self):
        if self.sender_id == self.receiver_id:
            raise SchemaViolation("Debate sender and receiver must differ")
        if self.round < 1:
            raise SchemaViolation("Debate rounds start at 1")

    def to_body(self) -> Dict[str, Any]:
        return dict(self.payload, session_id=self.session_id, round=self.round, ticker=self.ticker)


@dataclass
class DebateSession:
    """A debate over one ticker on one day"""
    session_id: str
    day: date
    ticker: str
    phase: Phase
    participants: List[Participant]
    start: datetime
    round: int = 0
    messages: List[DebateMessage] = field(default_factory=list)
    revised: Dict[str, Recommendation] = field(default_factory=dict)

    @property
    def participant_ids(self) -> List[str]:
        return [p.agent_id for p in self.participants]

    def latest_feedback(self, receiver_id: str) -> List[PeerFeedback]:
        """Feedback to a receiver from the last completed round, sender order"""
        received = [
            m for m in self.messages
            if m.receiver_id == receiver_id and m.round == self.round
        ]
        received.sort(key=lambda m: m.sender_id)
        return [
            PeerFeedback(m.sender_id, m.receiver_id, m.payload["agrees"],
                         Action(m.payload["feedback_action"]), m.payload["feedback"])
            for m in received
        ]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "session_id": self.session_id,
            "date": self.day.isoformat(),
            "ticker": self.ticker,
            "phase": self.phase.value,
            "participants": self.participant_ids,
            "rounds": self.round,
            "messages": len(self.messages),
            "revised": {k: v.action.value for k, v in sorted(self.revised.items())},
        }


def is_eligible(agent: TradingAgent, ticker: str, day: date,
                pending: Optional[Action] = None) -> bool:
    """
    Holds the ticker, traded it that day, or (before execution) intends to buy it
    """
    if agent.portfolio.shares(ticker) > 0:
        return True
    if any(t.ticker == ticker and t.timestamp.date() == day for t in agent.portfolio.ledger):
        return True
    return pending is not None and pending.direction > 0


class DebateCoordinator:
    """Runs debate sessions and persists their transcripts"""

    def __init__(self, warehouse: Warehouse, engine: MemoryEngine,
                 max_rounds: int = DEFAULT_MAX_ROUNDS, parallelism: int = 1):
        """
        Initialize DebateCoordinator

        Args:
            warehouse: Run storage (debate records)
            engine: Memory engine (feedback memories)
            max_rounds: Rounds per session
            parallelism: Concurrent core calls within a round
        """
        if max_rounds < 1:
            raise ValueError("max_rounds must be at least 1")
        self.warehouse = warehouse
        self.engine = engine
        self.max_rounds = max_rounds
        self.parallelism = max(1, parallelism)

    def convene(self, day: date, ticker: str, candidates: Sequence[Participant],
                phase: Phase, start: datetime,
                pending: Optional[Dict[str, Action]] = None) -> Optional[DebateSession]:
        """
        Open a session if at least two candidates are eligible

        Args:
            day: Trading day
            ticker: Ticker under debate
            candidates: Agents that decided on the ticker today
            phase: Train or Test
            start: Timestamp of the first round
            pending: Preliminary actions not yet executed (test phase)

        Returns:
            DebateSession, or None with fewer than two eligible agents
        """
        pending = pending or {}
        eligible = [
            c for c in candidates
            if is_eligible(c.agent, ticker, day, pending.get(c.agent_id))
        ]
        if len(eligible) < 2:
            return None

        eligible.sort(key=lambda c: c.agent_id)
        session = DebateSession(
            session_id=f"debate:{day.isoformat()}:{ticker}",
            day=day,
            ticker=ticker,
            phase=phase,
            participants=eligible,
            start=start,
        )
        logger.info(f"Debate {session.session_id} convened with {session.participant_ids}")
        return session

    def _review(self, reviewer: Participant, package: DebatePackage) -> Optional[PeerFeedback]:
        try:
            return reviewer.core.feedback(reviewer.context, package)
        except TradmemError as e:
            logger.warning(f"[{reviewer.agent_id}] abstains from reviewing {package.agent_id}: {e}")
            return None

    def exchange_round(self, session: DebateSession) -> List[DebateMessage]:
        """
        Run one complete exchange round

        Recommendations stay as shared until finalize, which revises once.

        Returns:
            Messages stored this round, in (sender, receiver) order
        """
        if session.round >= self.max_rounds:
            raise ValueError(f"{session.session_id} already ran {session.round} rounds")

        session.round += 1
        timestamp = session.start + ROUND_SPACING * (session.round - 1)
        pairs: List[Tuple[Participant, Participant]] = [
            (sender, receiver)
            for sender in session.participants
            for receiver in session.participants
            if sender.agent_id != receiver.agent_id
        ]
        packages = {p.agent_id: p.package() for p in session.participants}

        if self.parallelism > 1:
            with ThreadPoolExecutor(max_workers=self.parallelism) as pool:
                reviews = list(pool.map(lambda pair: self._review(pair[0], packages[pair[1].agent_id]), pairs))
        else:
            reviews = [self._review(s, packages[r.agent_id]) for s, r in pairs]

        messages = []
        cognition = self.warehouse.cognition
        for (sender, receiver), review in zip(pairs, reviews):
            if review is None:
                continue
            package = packages[receiver.agent_id]
            message = DebateMessage(
                session_id=session.session_id,
                round=session.round,
                sender_id=sender.agent_id,
                receiver_id=receiver.agent_id,
                ticker=session.ticker,
                timestamp=timestamp,
                payload={
                    "shared": package.to_dict(),
                    "feedback": review.text,
                    "feedback_action": review.action.value,
                    "agrees": review.agrees,
                },
            )
            message.record_id = cognition.add_debate(
                message.sender_id, message.receiver_id, message.to_body(), timestamp
            )
            self.engine.add_memory(
                receiver.agent_id,
                assign_layer(MemoryOrigin.DEBATE_FEEDBACK),
                MemoryOrigin.DEBATE_FEEDBACK,
                f"Debate feedback from {sender.agent_id} on {session.ticker}: {review.text}",
                timestamp,
                source_ref=session.session_id,
            )
            messages.append(message)

        session.messages.extend(messages)

        logger.debug(f"{session.session_id} round {session.round}: {len(messages)} messages")
        return messages

    def finalize(self, session: DebateSession,
                 originals: Optional[Dict[str, Recommendation]] = None) -> Dict[str, Recommendation]:
        """
        Each participant's revised recommendation after the last round

        Args:
            session: Session with all rounds run
            originals: Pre-debate recommendations (default: current packages)
        """
        if session.round < self.max_rounds:
            raise ValueError(f"{session.session_id} has {self.max_rounds - session.round} rounds left")

        originals = originals or {}
        revised = {}
        for participant in session.participants:
            original = originals.get(participant.agent_id, participant.recommendation)
            feedback = session.latest_feedback(participant.agent_id)
            try:
                revised[participant.agent_id] = participant.core.revise(
                    participant.context, original, feedback
                ) if feedback else original
            except TradmemError as e:
                logger.warning(f"[{participant.agent_id}] keeps {original.action.value}: {e}")
                revised[participant.agent_id] = original
        session.revised = revised
        changed = [a for a, r in revised.items()
                   if r.action is not originals.get(a, r).action]
        logger.info(f"Debate {session.session_id} finalized, {len(changed)} revised")
        return revised

    def run(self, session: DebateSession) -> Dict[str, Recommendation]:
        """All rounds then finalize"""
        originals = {p.agent_id: p.recommendation for p in session.participants}
        while session.round < self.max_rounds:
            self.exchange_round(session)
        return self.finalize(session, originals)


def export_transcripts(cognition: CognitionStore, out_path: Path,
                       start: Optional[datetime] = None, end: Optional[datetime] = None) -> int:
    """
    Write debate records as JSON-lines, one message per line

    Returns:
        Number of messages written

    Raises:
        IoError: If the output path is not writable
    """
    start = start or datetime.min
    end = end or datetime.max
    records = cognition.query_window(CognitionKind.DEBATE, None, start, end)
    out_path = Path(out_path)
    try:
        out_path.parent.mkdir(parents=True, exist_ok=True)
        with open(out_path, "w", encoding="utf-8", newline="\n") as f:
            for record in records:
                f.write(json.dumps(record.to_dict(), sort_keys=True, ensure_ascii=False) + "\n")
    except OSError as e:
        raise IoError(f"Cannot write transcripts to {out_path}: {e}", {"path": str(out_path)})
    logger.info(f"Exported {len(records)} debate messages to {out_path}")
    return len(records)
