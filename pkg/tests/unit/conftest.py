"""Hand-built decision contexts for unit tests"""

from datetime import date, datetime, timedelta

import pytest

from src.agent import (ContextNote, DecisionContext, HoldingFact, MarketFacts, MemorySnippet, Phase,
                       RiskPreference, TraderCharacter)
from src.memory_engine import LayerKind, MemoryOrigin

DAY = date(2024, 2, 1)


@pytest.fixture
def make_context():
    """
    make_context(closes=[...], phase=Phase.TRAIN, risk=RiskPreference.NEUTRAL,
                 fund_shares=(), agent_id="alpha") -> DecisionContext
    """
    def _make(closes=(100, 100, 100, 100, 100, 100), phase=Phase.TRAIN, risk=RiskPreference.NEUTRAL,
              fund_shares=(), agent_id="alpha", notes=()):
        history = tuple(
            (DAY - timedelta(days=len(closes) - 1 - i), float(c)) for i, c in enumerate(closes)
        )
        holdings = tuple(
            HoldingFact("ARKK", s, "Buy" if s > 0 else "Sell", datetime(2024, 2, 1)) for s in fund_shares
        )
        memory = MemorySnippet("mem-00000001", LayerKind.SHORT, "AAA wins contract",
                               datetime(2024, 1, 31, 9), MemoryOrigin.MARKET_NEWS, 42.5)
        return DecisionContext(
            character=TraderCharacter(agent_id, risk, frozenset({"tech"})),
            ticker="AAA",
            day=DAY,
            decision_time=datetime(2024, 2, 1, 16),
            phase=phase,
            k=3,
            memories={LayerKind.SHORT: (memory,), LayerKind.MIDDLE: (), LayerKind.LONG: ()},
            facts=MarketFacts("AAA", DAY, float(closes[-1]), history, holdings),
            notes=tuple(ContextNote("debate_feedback", datetime(2024, 1, 31, 17), t, "beta") for t in notes),
        )
    return _make
