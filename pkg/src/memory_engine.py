"""
Layered memory engine

Three memory layers (short, middle, long) per agent. Prompt-time ranking
combines min-max normalized recency and relevancy with a per-layer
importance constant:

    gamma = 100 * (alpha * recency_n + beta * relevancy_n + lambda * importance) + bonus

Maintenance (once per simulated day) has no prompt, so it scores each event
on its own:

    gamma_maint = 100 * recency * (beta * last_relevancy + lambda * importance) + bonus

and promotes, pins or purges against the layer thresholds.
"""

import json
import logging
import math
from dataclasses import dataclass, field, replace
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

try:
    from .embedding import EmbeddingProvider, EmbeddingVector
    from .errors import DegenerateEmbedding, DimensionMismatch, EmptyCandidateSet, InvalidTimestamp
except ImportError:
    from embedding import EmbeddingProvider, EmbeddingVector
    from errors import DegenerateEmbedding, DimensionMismatch, EmptyCandidateSet, InvalidTimestamp

logger = logging.getLogger(__name__)

SECONDS_PER_DAY = 86400.0
BONUS_PER_ACCESS = 5.0
MAX_COUNTED_ACCESSES = 4
SCORE_SCALE = 100.0


class LayerKind(str, Enum):
    """Memory layer"""
    SHORT = "short"
    MIDDLE = "middle"
    LONG = "long"

    @property
    def next_layer(self) -> Optional["LayerKind"]:
        """Next longer layer, None for long"""
        if self is LayerKind.SHORT:
            return LayerKind.MIDDLE
        if self is LayerKind.MIDDLE:
            return LayerKind.LONG
        return None


LAYER_ORDER = (LayerKind.SHORT, LayerKind.MIDDLE, LayerKind.LONG)


class MemoryOrigin(str, Enum):
    """Where a memory event came from"""
    MARKET_NEWS = "market_news"
    MACRO_INDICATOR = "macro_indicator"
    STRATEGY_DOC = "strategy_doc"
    IMMEDIATE_REFLECTION = "immediate_reflection"
    EXTENDED_REFLECTION = "extended_reflection"
    DEBATE_FEEDBACK = "debate_feedback"
    TRADE_OUTCOME = "trade_outcome"


@dataclass(frozen=True)
class LayerParams:
    """Decay, importance and weighting constants of one layer"""
    stability_days: float
    importance_const: float
    weight_recency: float
    weight_relevancy: float
    weight_importance: float
    promotion_threshold: float
    purge_threshold: float = 20.0

    def __post_init__(self):
        if self.stability_days <= 0:
            raise ValueError("stability_days must be positive")
        if not 0.0 <= self.importance_const <= 1.0:
            raise ValueError("importance_const must be in [0, 1]")
        weight_sum = self.weight_recency + self.weight_relevancy + self.weight_importance
        if abs(weight_sum - 1.0) > 1e-9:
            raise ValueError(f"Layer weights must sum to 1 (got {weight_sum})")
        if self.purge_threshold >= self.promotion_threshold:
            raise ValueError("purge_threshold must be below promotion_threshold")

    def to_dict(self) -> Dict[str, float]:
        return {
            "stability_days": self.stability_days,
            "importance_const": self.importance_const,
            "weight_recency": self.weight_recency,
            "weight_relevancy": self.weight_relevancy,
            "weight_importance": self.weight_importance,
            "promotion_threshold": self.promotion_threshold,
            "purge_threshold": self.purge_threshold,
        }


DEFAULT_LAYER_PARAMS: Dict[LayerKind, LayerParams] = {
    LayerKind.SHORT: LayerParams(3.0, 0.3, 0.5, 0.3, 0.2, promotion_threshold=40.0),
    LayerKind.MIDDLE: LayerParams(90.0, 0.6, 0.3, 0.4, 0.3, promotion_threshold=60.0),
    # Long has no next layer; its promotion threshold is the pin threshold
    LayerKind.LONG: LayerParams(365.0, 0.9, 0.2, 0.4, 0.4, promotion_threshold=80.0),
}


def validate_layer_params(params: Mapping[LayerKind, LayerParams]) -> None:
    """
    Check the cross-layer ordering invariants

    Raises:
        ValueError: If a layer is missing or Q / c are not strictly increasing
    """
    missing = [layer.value for layer in LAYER_ORDER if layer not in params]
    if missing:
        raise ValueError(f"Missing layer parameters: {missing}")

    short, middle, long_ = (params[layer] for layer in LAYER_ORDER)
    if not short.stability_days < middle.stability_days < long_.stability_days:
        raise ValueError("Stability must increase: Q_short < Q_middle < Q_long")
    if not short.importance_const < middle.importance_const < long_.importance_const:
        raise ValueError("Importance must increase: c_short < c_middle < c_long")


@dataclass
class MemoryEvent:
    """One timestamped memory item of an agent"""
    id: str
    agent_id: str
    layer: LayerKind
    text: str
    embedding: EmbeddingVector = field(repr=False, compare=False)
    timestamp: datetime
    origin: MemoryOrigin
    access_count: int = 0
    last_relevancy: float = 0.5
    pinned: bool = False
    source_ref: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        """Serialize without the embedding (rebuilt from text on load)"""
        return {
            "id": self.id,
            "agent_id": self.agent_id,
            "layer": self.layer.value,
            "text": self.text,
            "timestamp": self.timestamp.isoformat(),
            "origin": self.origin.value,
            "access_count": self.access_count,
            "last_relevancy": self.last_relevancy,
            "pinned": self.pinned,
            "source_ref": self.source_ref,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any], embedding: EmbeddingVector) -> "MemoryEvent":
        return cls(
            id=data["id"],
            agent_id=data["agent_id"],
            layer=LayerKind(data["layer"]),
            text=data["text"],
            embedding=embedding,
            timestamp=datetime.fromisoformat(data["timestamp"]),
            origin=MemoryOrigin(data["origin"]),
            access_count=int(data.get("access_count", 0)),
            last_relevancy=float(data.get("last_relevancy", 0.5)),
            pinned=bool(data.get("pinned", False)),
            source_ref=data.get("source_ref"),
        )


@dataclass(frozen=True)
class ScoreBreakdown:
    """Sub-scores and final ranking score of one event"""
    recency: float
    relevancy: float
    importance: float
    bonus: float
    gamma: float
    raw_recency: float
    raw_relevancy: float

    def to_dict(self) -> Dict[str, float]:
        return {
            "recency": self.recency,
            "relevancy": self.relevancy,
            "importance": self.importance,
            "bonus": self.bonus,
            "gamma": self.gamma,
            "raw_recency": self.raw_recency,
            "raw_relevancy": self.raw_relevancy,
        }


@dataclass
class SweepReport:
    """Transitions made by one maintenance sweep"""
    date: str
    agent_id: str
    promoted: List[str] = field(default_factory=list)
    purged: List[str] = field(default_factory=list)
    pinned: List[str] = field(default_factory=list)
    retained: int = 0

    @property
    def promoted_count(self) -> int:
        return len(self.promoted)

    @property
    def purged_count(self) -> int:
        return len(self.purged)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "date": self.date,
            "agent_id": self.agent_id,
            "promoted": list(self.promoted),
            "purged": list(self.purged),
            "pinned": list(self.pinned),
            "retained": self.retained,
        }


# ==================== SCORING ====================

def days_between(later: datetime, earlier: datetime) -> float:
    """Fractional days from earlier to later"""
    return (later - earlier).total_seconds() / SECONDS_PER_DAY


def recency_score(delta_days: float, stability_days: float) -> float:
    """
    Exponential forgetting curve e^(-delta/Q)

    Args:
        delta_days: Prompt time minus event time, in days
        stability_days: Layer stability Q

    Returns:
        Score in (0, 1]

    Raises:
        InvalidTimestamp: If delta_days is negative
    """
    if delta_days < 0:
        raise InvalidTimestamp(
            f"Event postdates the prompt by {-delta_days:.6f} days",
            {"delta_days": delta_days}
        )
    if stability_days <= 0:
        raise ValueError("stability_days must be positive")
    return math.exp(-delta_days / stability_days)


def relevancy_score(event_embedding: EmbeddingVector, prompt_embedding: EmbeddingVector) -> float:
    """
    Cosine similarity of two vectors

    Raises:
        DimensionMismatch: If shapes differ
        DegenerateEmbedding: If either vector has zero norm
    """
    a = np.asarray(event_embedding, dtype=np.float64)
    b = np.asarray(prompt_embedding, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(
            f"Cannot compare vectors of shape {a.shape} and {b.shape}",
            {"left": list(a.shape), "right": list(b.shape)}
        )
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a == 0.0 or norm_b == 0.0:
        raise DegenerateEmbedding("Cosine similarity of a zero-norm vector")
    cosine = float(np.dot(a, b)) / (norm_a * norm_b)
    return min(1.0, max(-1.0, cosine))


def importance_score(layer: LayerKind, params: Mapping[LayerKind, LayerParams]) -> float:
    """Per-layer importance constant c_i"""
    return params[layer].importance_const


def min_max_normalize(values: Sequence[float]) -> List[float]:
    """
    Min-max scale to [0, 1]; a constant list maps to all 1.0

    Raises:
        EmptyCandidateSet: If values is empty
    """
    if len(values) == 0:
        raise EmptyCandidateSet("Cannot normalize an empty candidate set")
    low = min(values)
    high = max(values)
    if high == low:
        return [1.0] * len(values)
    span = high - low
    return [(v - low) / span for v in values]


def counter_bonus(access_count: int) -> float:
    """Add-counter bonus, +5 per access capped at +20"""
    return BONUS_PER_ACCESS * min(max(access_count, 0), MAX_COUNTED_ACCESSES)


def clamp_relevancy(cosine: float) -> float:
    """Map cosine in [-1, 1] onto [0, 1]"""
    return (cosine + 1.0) / 2.0


def score_cohort(cohort: Sequence[MemoryEvent], prompt_embedding: EmbeddingVector,
                 now: datetime, params: Mapping[LayerKind, LayerParams]) -> List[ScoreBreakdown]:
    """
    Prompt-time scores for every member of a single-layer cohort

    Returns:
        One ScoreBreakdown per cohort member, in cohort order
    """
    if not cohort:
        return []

    layer = cohort[0].layer
    if any(event.layer is not layer for event in cohort):
        raise ValueError("Ranking cohort must share one layer")
    layer_params = params[layer]

    raw_recency = [
        recency_score(days_between(now, event.timestamp), layer_params.stability_days)
        for event in cohort
    ]
    raw_relevancy = [
        clamp_relevancy(relevancy_score(event.embedding, prompt_embedding))
        for event in cohort
    ]
    recency_n = min_max_normalize(raw_recency)
    relevancy_n = min_max_normalize(raw_relevancy)
    importance = importance_score(layer, params)

    scores = []
    for i, event in enumerate(cohort):
        bonus = counter_bonus(event.access_count)
        gamma = SCORE_SCALE * (
            layer_params.weight_recency * recency_n[i]
            + layer_params.weight_relevancy * relevancy_n[i]
            + layer_params.weight_importance * importance
        ) + bonus
        scores.append(ScoreBreakdown(
            recency=recency_n[i],
            relevancy=relevancy_n[i],
            importance=importance,
            bonus=bonus,
            gamma=gamma,
            raw_recency=raw_recency[i],
            raw_relevancy=raw_relevancy[i],
        ))
    return scores


def ranking_score(event: MemoryEvent, prompt_embedding: EmbeddingVector, now: datetime,
                  candidates: Sequence[MemoryEvent],
                  params: Mapping[LayerKind, LayerParams] = DEFAULT_LAYER_PARAMS) -> ScoreBreakdown:
    """
    Ranking score of one event within its layer cohort

    Side effect: sets ``event.last_relevancy`` to the clamped raw relevancy.
    """
    index = next((i for i, c in enumerate(candidates) if c.id == event.id), None)
    if index is None:
        raise ValueError(f"Event {event.id} is not part of the cohort")

    score = score_cohort(candidates, prompt_embedding, now, params)[index]
    event.last_relevancy = score.raw_relevancy
    return score


def maintenance_score(event: MemoryEvent, now: datetime,
                      params: Mapping[LayerKind, LayerParams]) -> ScoreBreakdown:
    """Prompt-free score used by the daily sweep"""
    layer_params = params[event.layer]
    recency = recency_score(days_between(now, event.timestamp), layer_params.stability_days)
    importance = importance_score(event.layer, params)
    bonus = counter_bonus(event.access_count)
    gamma = SCORE_SCALE * recency * (
        layer_params.weight_relevancy * event.last_relevancy
        + layer_params.weight_importance * importance
    ) + bonus
    return ScoreBreakdown(
        recency=recency,
        relevancy=event.last_relevancy,
        importance=importance,
        bonus=bonus,
        gamma=gamma,
        raw_recency=recency,
        raw_relevancy=event.last_relevancy,
    )


def ranking_key(event: MemoryEvent, score: ScoreBreakdown) -> Tuple[float, float, str]:
    """Total order: gamma desc, timestamp desc, id asc"""
    return (-score.gamma, -event.timestamp.timestamp(), event.id)


# ==================== ENGINE ====================

class MemoryEngine:
    """
    Retrieval and lifecycle over the memories held in a cognition store

    The store owns the materialized events; every mutation goes through it
    so the append-only log replays to the same state.
    """

    def __init__(self, store, embedder: EmbeddingProvider,
                 params: Optional[Mapping[LayerKind, LayerParams]] = None,
                 audit_path: Optional[Path] = None):
        """
        Initialize MemoryEngine

        Args:
            store: CognitionStore holding the memory events
            embedder: Provider used for prompt embeddings
            params: Per-layer parameters (default: DEFAULT_LAYER_PARAMS)
            audit_path: JSON-lines file receiving sweep reports (optional)
        """
        self.store = store
        self.embedder = embedder
        self.params: Dict[LayerKind, LayerParams] = dict(params or DEFAULT_LAYER_PARAMS)
        validate_layer_params(self.params)
        self.audit_path = audit_path

    def add_memory(self, agent_id: str, layer: LayerKind, origin: MemoryOrigin, text: str,
                   timestamp: datetime, source_ref: Optional[str] = None) -> MemoryEvent:
        """
        Embed and store a new memory event

        Returns:
            Copy of the stored event
        """
        embedding = self.embedder.embed_text(text)
        event = self.store.add_memory(
            agent_id=agent_id,
            layer=layer,
            origin=origin,
            text=text,
            embedding=embedding,
            timestamp=timestamp,
            source_ref=source_ref,
        )
        logger.debug(f"[{agent_id}] +{layer.value} memory {event.id} ({origin.value})")
        return replace(event)

    def rank_layer(self, agent_id: str, layer: LayerKind, prompt_text: str,
                   now: datetime) -> List[Tuple[MemoryEvent, ScoreBreakdown]]:
        """
        Score and order a whole layer without side effects

        Returns:
            (event copy, score) pairs in ranking order
        """
        cohort = self.store.layer_events(agent_id, layer)
        if not cohort:
            return []

        prompt_embedding = self.embedder.embed_text(prompt_text)
        scores = score_cohort(cohort, prompt_embedding, now, self.params)
        ranked = sorted(zip(cohort, scores), key=lambda pair: ranking_key(*pair))
        return [(replace(event), score) for event, score in ranked]

    def retrieve_top_k(self, agent_id: str, layer: LayerKind, prompt_text: str, k: int,
                       now: datetime) -> List[Tuple[MemoryEvent, ScoreBreakdown]]:
        """
        Top-k events of one layer for a prompt

        Increments the access counter of every returned event and records
        the clamped relevancy of every cohort member.

        Args:
            agent_id: Agent owning the memory space
            layer: Layer to search
            prompt_text: Prompt used for relevancy
            k: Number of events (>= 1)
            now: Prompt time

        Returns:
            Up to k (event, score) pairs, best first
        """
        if k < 1:
            raise ValueError("k must be at least 1")

        ranked = self.rank_layer(agent_id, layer, prompt_text, now)
        if not ranked:
            return []

        top = ranked[:k]
        relevancies = {event.id: score.raw_relevancy for event, score in ranked}
        self.store.record_access(agent_id, [event.id for event, _ in top], relevancies, now)

        results = []
        for event, score in top:
            results.append((replace(
                event,
                access_count=event.access_count + 1,
                last_relevancy=relevancies[event.id],
            ), score))
        logger.debug(f"[{agent_id}] retrieved {len(results)}/{len(ranked)} from {layer.value}")
        return results

    def boost(self, agent_id: str, event_ids: Iterable[str], now: datetime) -> List[str]:
        """
        Add-counter boost for events cited by a significant trade outcome

        Returns:
            Ids actually boosted (purged ids are skipped)
        """
        live = [event_id for event_id in dict.fromkeys(event_ids)
                if self.store.get_memory(agent_id, event_id) is not None]
        if live:
            self.store.record_boost(agent_id, live, now)
            logger.debug(f"[{agent_id}] boosted {len(live)} cited memories")
        return live

    def maintenance_sweep(self, agent_id: str, now: datetime) -> SweepReport:
        """
        Daily promotion / pinning / purging pass over all layers

        Args:
            agent_id: Agent owning the memory space
            now: Sweep time (after trading close)

        Returns:
            SweepReport listing every transition
        """
        report = SweepReport(date=now.date().isoformat(), agent_id=agent_id)

        decisions: List[Tuple[str, MemoryEvent, ScoreBreakdown]] = []
        for layer in LAYER_ORDER:
            layer_params = self.params[layer]
            for event in self.store.layer_events(agent_id, layer):
                score = maintenance_score(event, now, self.params)
                if layer.next_layer is not None and score.gamma >= layer_params.promotion_threshold:
                    decisions.append(("promote", event, score))
                elif layer.next_layer is None and score.gamma >= layer_params.promotion_threshold:
                    decisions.append(("pin" if not event.pinned else "keep", event, score))
                elif score.gamma < layer_params.purge_threshold and not event.pinned:
                    decisions.append(("purge", event, score))
                else:
                    decisions.append(("keep", event, score))

        for action, event, score in decisions:
            if action == "promote":
                source = event.layer
                target = source.next_layer
                self.store.move_memory(agent_id, event.id, target, now)
                report.promoted.append(event.id)
                logger.debug(f"[{agent_id}] promoted {event.id} {source.value}->{target.value} "
                             f"(gamma={score.gamma:.2f})")
            elif action == "pin":
                self.store.pin_memory(agent_id, event.id, now)
                report.pinned.append(event.id)
                report.retained += 1
            elif action == "purge":
                self.store.purge_memory(agent_id, event.id, now)
                report.purged.append(event.id)
                logger.debug(f"[{agent_id}] purged {event.id} (gamma={score.gamma:.2f})")
            else:
                report.retained += 1

        logger.info(
            f"[{agent_id}] sweep {report.date}: promoted={report.promoted_count} "
            f"purged={report.purged_count} pinned={len(report.pinned)} retained={report.retained}"
        )
        self._append_audit(report)
        return report

    def _append_audit(self, report: SweepReport) -> None:
        if self.audit_path is None:
            return
        self.audit_path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.audit_path, "a", encoding="utf-8") as f:
            f.write(json.dumps(report.to_dict(), sort_keys=True) + "\n")
