"""Base decision core interface and prompt rendering"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

try:
    from ..agent import Action, DecisionContext, MemorySnippet, Phase, Recommendation
    from ..memory_engine import LayerKind
    from ..prompt_registry import PromptRegistry, default_registry
except ImportError:
    from agent import Action, DecisionContext, MemorySnippet, Phase, Recommendation
    from memory_engine import LayerKind
    from prompt_registry import PromptRegistry, default_registry


@dataclass(frozen=True)
class DebatePackage:
    """What a debate participant shares with its peers"""
    agent_id: str
    ticker: str
    action: Action
    rationale: str
    trade_value: float
    trade_volume: int
    realized_return: float
    memories: Tuple[MemorySnippet, ...] = ()

    def to_dict(self) -> Dict[str, Any]:
        return {
            "agent_id": self.agent_id,
            "ticker": self.ticker,
            "action": self.action.value,
            "rationale": self.rationale,
            "trade_value": self.trade_value,
            "trade_volume": self.trade_volume,
            "realized_return": self.realized_return,
            "memories": [m.to_dict() for m in self.memories],
        }


@dataclass(frozen=True)
class PeerFeedback:
    """One participant's reply to another's package"""
    sender_id: str
    receiver_id: str
    agrees: bool
    action: Action
    text: str

    def to_dict(self) -> Dict[str, Any]:
        return {
            "sender_id": self.sender_id,
            "receiver_id": self.receiver_id,
            "agrees": self.agrees,
            "action": self.action.value,
            "text": self.text,
        }


class DecisionCore(ABC):
    """Maps decision contexts to one of the five recommendations"""

    name: str = "base"

    @abstractmethod
    def decide(self, context: DecisionContext) -> Recommendation:
        """
        Preliminary recommendation for one ticker-day

        Args:
            context: Decision context

        Returns:
            Recommendation
        """
        pass

    @abstractmethod
    def feedback(self, context: DecisionContext, package: DebatePackage) -> PeerFeedback:
        """
        Review a peer's package

        Args:
            context: The reviewer's own context for the same ticker-day
            package: The peer's package

        Returns:
            Feedback addressed to the package owner
        """
        pass

    @abstractmethod
    def revise(self, context: DecisionContext, original: Recommendation,
               feedback: Sequence[PeerFeedback]) -> Recommendation:
        """
        Final recommendation after a debate

        Args:
            context: Decision context
            original: Preliminary recommendation
            feedback: Latest feedback from each peer, sender order

        Returns:
            Revised recommendation
        """
        pass


# ==================== PROMPTS ====================

PHASE_TEMPLATES = {
    Phase.TRAIN: "train_decision",
    Phase.TEST: "test_decision",
    Phase.DEBATE: "debate_feedback",
}
REVISION_TEMPLATE = "debate_revision"


def _format_memories(snippets: Sequence[MemorySnippet]) -> str:
    if not snippets:
        return "- (none)"
    return "\n".join(
        f"- [{s.timestamp.isoformat()}] (score {s.gamma:.2f}) {s.text}" for s in snippets
    )


def _format_facts(context: DecisionContext) -> str:
    facts = context.facts
    lines = [f"- Close on {facts.day.isoformat()}: {facts.close:.4f}"]
    if facts.history:
        closes = ", ".join(f"{d.isoformat()} {c:.4f}" for d, c in facts.history)
        lines.append(f"- Recent closes: {closes}")
    return "\n".join(lines)


def _format_holdings(context: DecisionContext) -> str:
    if not context.facts.holdings:
        return "- (no fund records today)"
    return "\n".join(
        f"- {h.fund} {h.direction} {abs(h.shares)} shares" for h in context.facts.holdings
    )


def _format_peers(packages: Sequence[DebatePackage]) -> str:
    if not packages:
        return "- (none)"
    blocks = []
    for p in packages:
        memories = "; ".join(m.text for m in p.memories) or "none"
        blocks.append(
            f"- {p.agent_id}: {p.action.label} ({p.rationale}); traded {p.trade_volume} shares "
            f"worth {p.trade_value:.2f}, return {p.realized_return:+.2%}. Memories: {memories}"
        )
    return "\n".join(blocks)


def _format_feedback(feedback: Sequence[PeerFeedback]) -> str:
    if not feedback:
        return "- (none)"
    return "\n".join(f"- {f.sender_id}: {f.text}" for f in feedback)


def prompt_values(context: DecisionContext) -> Dict[str, str]:
    """Template fields shared by every prompt"""
    return {
        "character": context.character.profile(),
        "actions": "\n".join(f"  {a.value}" for a in Action),
        "ticker": context.ticker,
        "date": context.day.isoformat(),
        "facts": _format_facts(context),
        "holdings": _format_holdings(context),
        "short_memories": _format_memories(context.memories.get(LayerKind.SHORT, ())),
        "middle_memories": _format_memories(context.memories.get(LayerKind.MIDDLE, ())),
        "long_memories": _format_memories(context.memories.get(LayerKind.LONG, ())),
        "notes": "\n".join(f"- [{n.timestamp.isoformat()}] {n.kind}: {n.text}" for n in context.notes)
                 or "- (none)",
        "peers": "- (none)",
        "original": "",
    }


def render_messages(context: DecisionContext, phase: Phase,
                    peers: Sequence[DebatePackage] = (),
                    registry: Optional[PromptRegistry] = None) -> Dict[str, str]:
    """System and user messages for a phase"""
    registry = registry or default_registry()
    values = prompt_values(context)
    values["peers"] = _format_peers(peers)
    return registry.get(PHASE_TEMPLATES[phase]).render(values)


def render_revision_messages(context: DecisionContext, original: Recommendation,
                             feedback: Sequence[PeerFeedback],
                             registry: Optional[PromptRegistry] = None) -> Dict[str, str]:
    registry = registry or default_registry()
    values = prompt_values(context)
    values["peers"] = _format_feedback(feedback)
    values["original"] = f"{original.action.value} ({original.rationale})"
    return registry.get(REVISION_TEMPLATE).render(values)


def render_prompt(context: DecisionContext, phase: Phase, peers: Sequence[DebatePackage] = (),
                  registry: Optional[PromptRegistry] = None) -> str:
    """
    Deterministic prompt text for a context

    Identical contexts render to identical strings. Training prompts carry
    the fund holding records, test prompts carry the past week's notes.
    """
    messages = render_messages(context, phase, peers, registry)
    return f"{messages['system']}\n\n{messages['user']}"
