"""
Deterministic momentum decision core

Pure function of the context: the same context always yields the same
recommendation, feedback and revision.
"""

import logging
from typing import Dict, Mapping, Optional, Sequence

try:
    from ..agent import Action, DecisionContext, Phase, Recommendation, RiskPreference
    from ..errors import InsufficientHistory
    from .base import DebatePackage, DecisionCore, PeerFeedback
except ImportError:
    from agent import Action, DecisionContext, Phase, Recommendation, RiskPreference
    from errors import InsufficientHistory
    from decision_cores.base import DebatePackage, DecisionCore, PeerFeedback

logger = logging.getLogger(__name__)

DEFAULT_RISK_MULTIPLIERS: Dict[RiskPreference, float] = {
    RiskPreference.SEEKING: 0.5,
    RiskPreference.NEUTRAL: 1.0,
    RiskPreference.AVERSE: 1.5,
}


def momentum_action(momentum: float, slight: float, significant: float) -> Action:
    """Map momentum onto the five actions with symmetric thresholds"""
    if momentum >= significant:
        return Action.SIG_INCREASE
    if momentum >= slight:
        return Action.SLIGHT_INCREASE
    if momentum <= -significant:
        return Action.SIG_DECREASE
    if momentum <= -slight:
        return Action.SLIGHT_DECREASE
    return Action.HOLD


def majority_notch(own: Action, peer_actions: Sequence[Action]) -> Action:
    """
    Step one notch toward a direction backed by at least twice as many
    peers as support the agent's own direction (self included)
    """
    supporters = 1 + sum(1 for a in peer_actions if a.direction == own.direction)
    for direction in (1, 0, -1):
        if direction == own.direction:
            continue
        backers = sum(1 for a in peer_actions if a.direction == direction)
        if backers and backers >= 2 * supporters:
            return own.notch(direction - own.direction)
    return own


class RuleBasedCore(DecisionCore):
    """Momentum thresholds scaled by risk preference"""

    name = "rule_based"

    def __init__(self, window: int = 5, slight_threshold: float = 0.01,
                 sig_threshold: float = 0.03,
                 risk_multipliers: Optional[Mapping[RiskPreference, float]] = None):
        if window < 1:
            raise ValueError("momentum window must be at least 1")
        if not 0 < slight_threshold < sig_threshold:
            raise ValueError("thresholds must satisfy 0 < slight < significant")
        self.window = window
        self.slight_threshold = slight_threshold
        self.sig_threshold = sig_threshold
        self.risk_multipliers = dict(risk_multipliers or DEFAULT_RISK_MULTIPLIERS)

    def momentum(self, context: DecisionContext) -> float:
        """
        (close_t - close_{t-window}) / close_{t-window}

        Raises:
            InsufficientHistory: If fewer than window + 1 closes are known
        """
        history = context.facts.history
        if len(history) < self.window + 1:
            raise InsufficientHistory(
                f"{context.ticker} on {context.day.isoformat()}: need {self.window + 1} closes, "
                f"have {len(history)}",
                {"ticker": context.ticker, "have": len(history)}
            )
        base = history[-(self.window + 1)][1]
        return (history[-1][1] - base) / base

    def thresholds(self, risk: RiskPreference) -> tuple:
        multiplier = self.risk_multipliers[risk]
        return self.slight_threshold * multiplier, self.sig_threshold * multiplier

    def decide(self, context: DecisionContext) -> Recommendation:
        m = self.momentum(context)
        slight, significant = self.thresholds(context.character.risk)
        action = momentum_action(m, slight, significant)
        rationale = (
            f"{self.window}-session momentum {m:+.2%} against thresholds "
            f"{slight:.2%}/{significant:.2%}"
        )

        if context.phase is Phase.TRAIN:
            fund = context.facts.net_fund_direction
            if fund != 0 and fund != action.direction:
                adjusted = action.notch(fund - action.direction)
                rationale += (
                    f"; fund records point {'up' if fund > 0 else 'down'}, "
                    f"moved from {action.value} to {adjusted.value}"
                )
                action = adjusted

        return Recommendation(action, rationale)

    def feedback(self, context: DecisionContext, package: DebatePackage) -> PeerFeedback:
        try:
            own = self.decide(context)
        except InsufficientHistory:
            own = Recommendation(Action.HOLD, "insufficient history")
        agrees = own.action.direction == package.action.direction
        verdict = "agree" if agrees else "disagree"
        text = (
            f"I {verdict} with your choice to {package.action.label} on {package.ticker}. "
            f"My view is {own.action.value}: {own.rationale}."
        )
        return PeerFeedback(
            sender_id=context.character.agent_id,
            receiver_id=package.agent_id,
            agrees=agrees,
            action=own.action,
            text=text,
        )

    def revise(self, context: DecisionContext, original: Recommendation,
               feedback: Sequence[PeerFeedback]) -> Recommendation:
        revised = majority_notch(original.action, [f.action for f in feedback])
        if revised is original.action:
            return original
        logger.debug(
            f"[{context.character.agent_id}] {context.ticker} revised "
            f"{original.action.value} -> {revised.value} after debate"
        )
        return Recommendation(
            revised,
            f"{original.rationale}; outnumbered by peers, moved to {revised.value}"
        )
