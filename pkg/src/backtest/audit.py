"""
No-lookahead context auditing and the day-level audit log
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List

try:
    from ..agent import DecisionContext, Phase
except ImportError:
    from agent import DecisionContext, Phase

logger = logging.getLogger(__name__)


@dataclass
class LookaheadViolation:
    agent_id: str
    ticker: str
    day: str
    reason: str

    def to_dict(self) -> Dict[str, str]:
        return {"agent_id": self.agent_id, "ticker": self.ticker, "date": self.day, "reason": self.reason}


@dataclass
class ContextAuditor:
    """
    Checks every decision context of a run

    A context violates no-lookahead if any datum is timestamped after the
    decision time, or if a test-phase context carries fund holding records.
    """
    contexts_checked: int = 0
    holdings_in_test: int = 0
    violations: List[LookaheadViolation] = field(default_factory=list)

    def check(self, context: DecisionContext) -> List[LookaheadViolation]:
        self.contexts_checked += 1
        found = []
        agent_id = context.character.agent_id
        day = context.day.isoformat()

        late = [ts for ts in context.data_timestamps() if ts > context.decision_time]
        if late:
            found.append(LookaheadViolation(
                agent_id, context.ticker, day,
                f"{len(late)} data items after {context.decision_time.isoformat()} "
                f"(latest {max(late).isoformat()})"
            ))
        if context.phase is Phase.TEST and context.facts.holdings:
            self.holdings_in_test += len(context.facts.holdings)
            found.append(LookaheadViolation(
                agent_id, context.ticker, day,
                f"{len(context.facts.holdings)} fund holding records in a test context"
            ))

        for violation in found:
            logger.error(f"Lookahead violation: {violation.to_dict()}")
        self.violations.extend(found)
        return found

    def summary(self) -> Dict[str, Any]:
        return {
            "contexts_checked": self.contexts_checked,
            "violations": len(self.violations),
            "holdings_in_test": self.holdings_in_test,
        }


class JsonlWriter:
    """Appends dicts as sorted-key JSON lines"""

    def __init__(self, path: Path):
        self.path = Path(path)

    def write(self, entry: Dict[str, Any]) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a", encoding="utf-8", newline="\n") as f:
            f.write(json.dumps(entry, sort_keys=True, ensure_ascii=False) + "\n")

    def read(self) -> List[Dict[str, Any]]:
        if not self.path.exists():
            return []
        with open(self.path, "r", encoding="utf-8") as f:
            return [json.loads(line) for line in f if line.strip()]

    def reset(self) -> None:
        if self.path.exists():
            self.path.unlink()
