"""
Append-only data warehouse for tradmem

Two JSON-lines logs per run directory:

raw_input.jsonl (Raw Input schema)
    {"id", "kind": "PriceBar"|"NewsItem"|"HoldingRecord", "ticker", "timestamp", "payload"}
    PriceBar payload:      {"frequency", "open", "high", "low", "close", "volume"}
    NewsItem payload:      {"headline", "body"}
    HoldingRecord payload: {"fund", "shares", "direction"}

cognition.jsonl (Agents' Cognition schema)
    {"id", "kind": "Memory"|"Reflection"|"Debate", "agent_id", "timestamp", "body",
     "op", "reflection_flag", "receiver_id"}
    Memory ops: create, access, boost, promote, pin, purge (tombstone)

Records are never rewritten. Materialized state is rebuilt by replaying the
logs; memory embeddings are recomputed from text at load.
"""

import bisect
import json
import logging
import os
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from datetime import date, datetime, timedelta
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Sequence, Set, Tuple

import numpy as np

try:
    from .embedding import EmbeddingProvider, EmbeddingVector, HashingEmbedder
    from .errors import (DimensionMismatch, DuplicateReflection, InvalidRange,
                         RunDirLocked, SchemaViolation)
    from .memory_engine import LayerKind, MemoryEvent, MemoryOrigin
except ImportError:
    from embedding import EmbeddingProvider, EmbeddingVector, HashingEmbedder
    from errors import (DimensionMismatch, DuplicateReflection, InvalidRange,
                        RunDirLocked, SchemaViolation)
    from memory_engine import LayerKind, MemoryEvent, MemoryOrigin

logger = logging.getLogger(__name__)

RAW_LOG_NAME = "raw_input.jsonl"
COGNITION_LOG_NAME = "cognition.jsonl"
LOCK_FILE_NAME = ".lock"


class RawKind(str, Enum):
    """Raw Input record kinds"""
    PRICE_BAR = "PriceBar"
    NEWS_ITEM = "NewsItem"
    HOLDING_RECORD = "HoldingRecord"


class Frequency(str, Enum):
    """Price bar frequency"""
    DAILY = "daily"
    MINUTE = "minute"


class TradeDirection(str, Enum):
    """Fund holding change direction"""
    BUY = "Buy"
    SELL = "Sell"


class CognitionKind(str, Enum):
    """Agents' Cognition record kinds"""
    MEMORY = "Memory"
    REFLECTION = "Reflection"
    DEBATE = "Debate"


class ReflectionFlag(str, Enum):
    """Distinguishes daily from weekly reflections"""
    IMMEDIATE = "Immediate"
    EXTENDED = "Extended"


MEMORY_OPS = ("create", "access", "boost", "promote", "pin", "purge")


@dataclass
class RawRecord:
    """One Raw Input record"""
    kind: RawKind
    ticker: str
    timestamp: datetime
    payload: Dict[str, Any]
    id: Optional[int] = None

    @classmethod
    def price_bar(cls, ticker: str, timestamp: datetime, open: float, high: float, low: float,
                  close: float, volume: int, frequency: Frequency = Frequency.DAILY) -> "RawRecord":
        return cls(RawKind.PRICE_BAR, ticker, timestamp, {
            "frequency": Frequency(frequency).value,
            "open": float(open),
            "high": float(high),
            "low": float(low),
            "close": float(close),
            "volume": int(volume),
        })

    @classmethod
    def news_item(cls, ticker: str, timestamp: datetime, headline: str, body: str) -> "RawRecord":
        return cls(RawKind.NEWS_ITEM, ticker, timestamp, {"headline": headline, "body": body})

    @classmethod
    def holding(cls, ticker: str, timestamp: datetime, fund: str, shares: int,
                direction: TradeDirection) -> "RawRecord":
        return cls(RawKind.HOLDING_RECORD, ticker, timestamp, {
            "fund": fund,
            "shares": int(shares),
            "direction": TradeDirection(direction).value,
        })

    def validate(self) -> None:
        """
        Check type invariants

        Raises:
            SchemaViolation: If the record is malformed
        """
        if not self.ticker:
            raise SchemaViolation("Record has no ticker")
        p = self.payload

        if self.kind is RawKind.PRICE_BAR:
            prices = [p.get(name) for name in ("open", "high", "low", "close")]
            if any(not isinstance(v, (int, float)) or v <= 0 for v in prices):
                raise SchemaViolation(f"{self.ticker}: prices must be positive", {"payload": p})
            o, h, l, c = prices
            if not l <= min(o, c) <= max(o, c) <= h:
                raise SchemaViolation(
                    f"{self.ticker} {self.timestamp.isoformat()}: OHLC out of order "
                    f"(low={l}, open={o}, close={c}, high={h})",
                    {"payload": p}
                )
            if not isinstance(p.get("volume"), int) or p["volume"] < 0:
                raise SchemaViolation(f"{self.ticker}: volume must be a non-negative integer")
            if p.get("frequency") not in {f.value for f in Frequency}:
                raise SchemaViolation(f"Unknown frequency: {p.get('frequency')}")

        elif self.kind is RawKind.HOLDING_RECORD:
            shares = p.get("shares")
            if not isinstance(shares, int) or shares == 0:
                raise SchemaViolation(f"{self.ticker}: holding shares delta must be a non-zero integer")
            direction = p.get("direction")
            if direction not in {d.value for d in TradeDirection}:
                raise SchemaViolation(f"Unknown direction: {direction}")
            if (direction == TradeDirection.BUY.value) != (shares > 0):
                raise SchemaViolation(
                    f"{self.ticker}: direction {direction} inconsistent with shares {shares}",
                    {"payload": p}
                )
            if not p.get("fund"):
                raise SchemaViolation(f"{self.ticker}: holding record has no fund")

        elif self.kind is RawKind.NEWS_ITEM:
            if not p.get("headline"):
                raise SchemaViolation(f"{self.ticker}: news item has no headline")

    def dedupe_key(self) -> Tuple:
        """Identity used to reject re-ingested duplicates"""
        if self.kind is RawKind.PRICE_BAR:
            return (self.kind.value, self.ticker, self.timestamp, self.payload["frequency"])
        if self.kind is RawKind.NEWS_ITEM:
            return (self.kind.value, self.ticker, self.timestamp, self.payload["headline"])
        return (self.kind.value, self.ticker, self.timestamp, self.payload["fund"],
                self.payload["shares"], self.payload["direction"])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "id": self.id,
            "kind": self.kind.value,
            "ticker": self.ticker,
            "timestamp": self.timestamp.isoformat(),
            "payload": self.payload,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RawRecord":
        return cls(
            kind=RawKind(data["kind"]),
            ticker=data["ticker"],
            timestamp=datetime.fromisoformat(data["timestamp"]),
            payload=dict(data["payload"]),
            id=data.get("id"),
        )


@dataclass
class CognitionRecord:
    """One Agents' Cognition record"""
    kind: CognitionKind
    agent_id: str
    timestamp: datetime
    body: Dict[str, Any]
    op: Optional[str] = None
    reflection_flag: Optional[ReflectionFlag] = None
    receiver_id: Optional[str] = None
    id: Optional[int] = None

    def validate(self) -> None:
        """
        Check type invariants

        Raises:
            SchemaViolation: If the record is malformed
        """
        if not self.agent_id:
            raise SchemaViolation("Cognition record has no agent_id")
        if self.kind is CognitionKind.MEMORY and self.op not in MEMORY_OPS:
            raise SchemaViolation(f"Unknown memory op: {self.op}")
        if self.kind is CognitionKind.REFLECTION and self.reflection_flag is None:
            raise SchemaViolation("Reflection records must carry a reflection flag")
        if self.kind is CognitionKind.DEBATE:
            if not self.receiver_id:
                raise SchemaViolation("Debate records must carry a receiver")
            if self.receiver_id == self.agent_id:
                raise SchemaViolation("Debate sender and receiver must differ")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "id": self.id,
            "kind": self.kind.value,
            "agent_id": self.agent_id,
            "timestamp": self.timestamp.isoformat(),
            "body": self.body,
            "op": self.op,
            "reflection_flag": self.reflection_flag.value if self.reflection_flag else None,
            "receiver_id": self.receiver_id,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "CognitionRecord":
        flag = data.get("reflection_flag")
        return cls(
            kind=CognitionKind(data["kind"]),
            agent_id=data["agent_id"],
            timestamp=datetime.fromisoformat(data["timestamp"]),
            body=data.get("body") or {},
            op=data.get("op"),
            reflection_flag=ReflectionFlag(flag) if flag else None,
            receiver_id=data.get("receiver_id"),
            id=data.get("id"),
        )


def _check_range(start: datetime, end: datetime) -> None:
    if start > end:
        raise InvalidRange(
            f"Window start {start.isoformat()} is after end {end.isoformat()}",
            {"from": start.isoformat(), "to": end.isoformat()}
        )


class JsonlLog:
    """
    Append-only JSON-lines file with strictly increasing record ids

    A trailing line that does not decode (interrupted write) is ignored on
    read, so any prefix of complete records loads.
    """

    def __init__(self, path: Path):
        self.path = path
        self.last_id = 0
        self._lock = threading.Lock()

    def read(self) -> List[Dict[str, Any]]:
        """Read all complete records and recover the id sequence"""
        if not self.path.exists():
            return []

        entries = []
        with open(self.path, "r", encoding="utf-8") as f:
            for line_no, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    entry = json.loads(line)
                except json.JSONDecodeError:
                    logger.warning(f"{self.path.name}: ignoring undecodable line {line_no}")
                    break
                entries.append(entry)

        if entries:
            self.last_id = max(self.last_id, int(entries[-1]["id"]))
        logger.debug(f"Read {len(entries)} records from {self.path}")
        return entries

    def next_id(self) -> int:
        return self.last_id + 1

    def write(self, entry: Dict[str, Any]) -> int:
        """Append one entry; its id must be next_id()"""
        with self._lock:
            record_id = int(entry["id"])
            if record_id <= self.last_id:
                raise SchemaViolation(f"Record id {record_id} not after {self.last_id}")
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as f:
                f.write(json.dumps(entry, sort_keys=True, ensure_ascii=False) + "\n")
            self.last_id = record_id
            return record_id


class RawInputStore:
    """Raw Input schema: price bars, news and fund holdings"""

    def __init__(self, log_path: Path):
        """
        Initialize RawInputStore

        Args:
            log_path: Path of raw_input.jsonl
        """
        self.log = JsonlLog(log_path)
        self.records: List[RawRecord] = []
        self._keys: Set[Tuple] = set()
        self._daily: Dict[str, Dict[date, RawRecord]] = {}
        self._daily_dates: Dict[str, List[date]] = {}
        self._loaded = False

    def load(self) -> "RawInputStore":
        """Replay the log into memory"""
        self.records = []
        self._keys = set()
        self._daily = {}
        self._daily_dates = {}
        for entry in self.log.read():
            self._apply(RawRecord.from_dict(entry))
        self._loaded = True
        logger.info(f"Raw store loaded: {len(self.records)} records")
        return self

    def _ensure_loaded(self) -> None:
        if not self._loaded:
            self.load()

    def _apply(self, record: RawRecord) -> None:
        self.records.append(record)
        self._keys.add(record.dedupe_key())
        if record.kind is RawKind.PRICE_BAR and record.payload["frequency"] == Frequency.DAILY.value:
            day = record.timestamp.date()
            bars = self._daily.setdefault(record.ticker, {})
            if day not in bars:
                bisect.insort(self._daily_dates.setdefault(record.ticker, []), day)
            bars[day] = record

    def has(self, record: RawRecord) -> bool:
        """True if an identical record is already stored"""
        self._ensure_loaded()
        return record.dedupe_key() in self._keys

    def append(self, record: RawRecord) -> int:
        """
        Validate and append a record

        Returns:
            New record id

        Raises:
            SchemaViolation: If invariants fail or the record is a duplicate
        """
        self._ensure_loaded()
        record.validate()
        if record.dedupe_key() in self._keys:
            raise SchemaViolation(
                f"Duplicate {record.kind.value} for {record.ticker} at {record.timestamp.isoformat()}",
                {"duplicate": True}
            )
        stored = replace(record, id=self.log.next_id(), payload=dict(record.payload))
        self.log.write(stored.to_dict())
        self._apply(stored)
        return stored.id

    def get(self, record_id: int) -> Optional[RawRecord]:
        self._ensure_loaded()
        index = bisect.bisect_left([r.id for r in self.records], record_id)
        if index < len(self.records) and self.records[index].id == record_id:
            return self.records[index]
        return None

    def query_window(self, kind: RawKind, ticker: Optional[str], start: datetime,
                     end: datetime) -> List[RawRecord]:
        """
        Records of a kind with start <= timestamp < end, chronological

        Args:
            kind: Record kind
            ticker: Ticker filter (None = all tickers)
            start: Inclusive lower bound
            end: Exclusive upper bound
        """
        _check_range(start, end)
        self._ensure_loaded()
        matches = [
            r for r in self.records
            if r.kind is kind and (ticker is None or r.ticker == ticker)
            and start <= r.timestamp < end
        ]
        return sorted(matches, key=lambda r: (r.timestamp, r.id))

    def tickers(self) -> List[str]:
        self._ensure_loaded()
        return sorted(self._daily)

    def close_on(self, ticker: str, day: date) -> Optional[float]:
        """Daily close of a ticker, None if no bar"""
        self._ensure_loaded()
        bar = self._daily.get(ticker, {}).get(day)
        return bar.payload["close"] if bar else None

    def previous_close(self, ticker: str, day: date) -> Optional[Tuple[date, float]]:
        """Latest daily close strictly before day"""
        self._ensure_loaded()
        dates = self._daily_dates.get(ticker, [])
        index = bisect.bisect_left(dates, day)
        if index == 0:
            return None
        prev = dates[index - 1]
        return prev, self._daily[ticker][prev].payload["close"]

    def price_history(self, ticker: str, day: date, sessions: int) -> List[Tuple[date, float]]:
        """Last ``sessions`` daily closes dated <= day, oldest first"""
        self._ensure_loaded()
        dates = self._daily_dates.get(ticker, [])
        end = bisect.bisect_right(dates, day)
        window = dates[max(0, end - sessions):end]
        return [(d, self._daily[ticker][d].payload["close"]) for d in window]

    def trading_days(self, start: date, end: date) -> List[date]:
        """Dates with at least one daily bar, start <= d <= end"""
        self._ensure_loaded()
        days = set()
        for dates in self._daily_dates.values():
            lo = bisect.bisect_left(dates, start)
            hi = bisect.bisect_right(dates, end)
            days.update(dates[lo:hi])
        return sorted(days)

    def on_day(self, kind: RawKind, day: date, ticker: Optional[str] = None) -> List[RawRecord]:
        """Records of a kind dated on one calendar day"""
        start = datetime.combine(day, datetime.min.time())
        return self.query_window(kind, ticker, start, start + timedelta(days=1))


class CognitionStore:
    """
    Agents' Cognition schema: layered memories, reflections, debate records

    Single writer. Readers get copies or snapshots taken between appends.
    """

    def __init__(self, log_path: Path, embedder: Optional[EmbeddingProvider] = None):
        """
        Initialize CognitionStore

        Args:
            log_path: Path of cognition.jsonl
            embedder: Provider used to rebuild memory embeddings at load
        """
        self.log = JsonlLog(log_path)
        self.embedder = embedder or HashingEmbedder()
        self._lock = threading.RLock()
        self._reset()
        self._loaded = False

    def _reset(self) -> None:
        self.records: List[CognitionRecord] = []
        self.memories: Dict[str, Dict[str, MemoryEvent]] = {}
        self.purged: Dict[str, Set[str]] = {}
        self._reflection_keys: Set[Tuple[str, str, str]] = set()

    def load(self) -> "CognitionStore":
        """Replay the log into memory"""
        with self._lock:
            self._reset()
            for entry in self.log.read():
                self._apply(CognitionRecord.from_dict(entry))
            self._loaded = True
        logger.info(
            f"Cognition store loaded: {len(self.records)} records, "
            f"{sum(len(m) for m in self.memories.values())} live memories"
        )
        return self

    def _ensure_loaded(self) -> None:
        if not self._loaded:
            self.load()

    # ==================== APPEND ====================

    def append(self, record: CognitionRecord, embedding: Optional[EmbeddingVector] = None) -> int:
        """
        Validate, persist and apply a cognition record

        Args:
            record: Record without id
            embedding: Precomputed embedding for memory creation (optional)

        Returns:
            New record id

        Raises:
            SchemaViolation: If invariants fail
        """
        with self._lock:
            self._ensure_loaded()
            record.validate()
            stored = replace(record, id=self.log.next_id())
            if stored.kind is CognitionKind.MEMORY and stored.op == "create":
                stored.body = dict(stored.body, id=self._memory_id(stored.id))
            self._check_applicable(stored)
            self.log.write(stored.to_dict())
            self._apply(stored, embedding)
            return stored.id

    @staticmethod
    def _memory_id(record_id: int) -> str:
        # Zero-padded so lexicographic order matches creation order
        return f"mem-{record_id:08d}"

    def _check_applicable(self, record: CognitionRecord) -> None:
        if record.kind is not CognitionKind.MEMORY or record.op == "create":
            if record.kind is CognitionKind.REFLECTION and record.reflection_flag is ReflectionFlag.IMMEDIATE:
                key = self._reflection_key(record)
                if key in self._reflection_keys:
                    raise DuplicateReflection(
                        f"Immediate reflection already stored for {key}",
                        {"agent_id": key[0], "ticker": key[1], "date": key[2]}
                    )
            return

        agent_memories = self.memories.get(record.agent_id, {})
        ids = record.body.get("ids") or [record.body.get("id")]
        missing = [i for i in ids if i not in agent_memories]
        if missing:
            raise SchemaViolation(
                f"Memory op '{record.op}' on unknown or purged events: {missing[:5]}",
                {"agent_id": record.agent_id, "ids": missing}
            )

    @staticmethod
    def _reflection_key(record: CognitionRecord) -> Tuple[str, str, str]:
        return (record.agent_id, str(record.body.get("ticker")), str(record.body.get("date")))

    def _apply(self, record: CognitionRecord, embedding: Optional[EmbeddingVector] = None) -> None:
        self.records.append(record)

        if record.kind is CognitionKind.REFLECTION:
            if record.reflection_flag is ReflectionFlag.IMMEDIATE:
                self._reflection_keys.add(self._reflection_key(record))
            return
        if record.kind is CognitionKind.DEBATE:
            return

        agent_memories = self.memories.setdefault(record.agent_id, {})
        body = record.body

        if record.op == "create":
            event_id = body["id"]
            if event_id in self.purged.get(record.agent_id, set()):
                raise SchemaViolation(f"Purged memory {event_id} cannot reappear")
            if embedding is None:
                embedding = self.embedder.embed_text(body["text"])
            agent_memories[event_id] = MemoryEvent.from_dict(
                dict(body, agent_id=record.agent_id), embedding
            )
        elif record.op == "access":
            for event_id, relevancy in body.get("relevancy", {}).items():
                if event_id in agent_memories:
                    agent_memories[event_id].last_relevancy = float(relevancy)
            for event_id in body["ids"]:
                agent_memories[event_id].access_count += 1
        elif record.op == "boost":
            for event_id in body["ids"]:
                agent_memories[event_id].access_count += 1
        elif record.op == "promote":
            event = agent_memories[body["id"]]
            event.layer = LayerKind(body["to"])
            event.access_count = 0
        elif record.op == "pin":
            agent_memories[body["id"]].pinned = True
        elif record.op == "purge":
            del agent_memories[body["id"]]
            self.purged.setdefault(record.agent_id, set()).add(body["id"])

    # ==================== MEMORY OPERATIONS ====================

    def add_memory(self, agent_id: str, layer: LayerKind, origin: MemoryOrigin, text: str,
                   embedding: EmbeddingVector, timestamp: datetime,
                   source_ref: Optional[str] = None) -> MemoryEvent:
        """Create a memory event; returns the live event"""
        body = {
            "layer": layer.value,
            "text": text,
            "timestamp": timestamp.isoformat(),
            "origin": origin.value,
            "access_count": 0,
            "last_relevancy": 0.5,
            "pinned": False,
            "source_ref": source_ref,
        }
        record_id = self.append(
            CognitionRecord(CognitionKind.MEMORY, agent_id, timestamp, body, op="create"),
            embedding=embedding,
        )
        return self.memories[agent_id][self._memory_id(record_id)]

    def record_access(self, agent_id: str, ids: Sequence[str], relevancies: Dict[str, float],
                      now: datetime) -> int:
        """Retrieval hits (+1 each) and refreshed cohort relevancies"""
        body = {"ids": list(ids), "relevancy": dict(relevancies)}
        return self.append(CognitionRecord(CognitionKind.MEMORY, agent_id, now, body, op="access"))

    def record_boost(self, agent_id: str, ids: Sequence[str], now: datetime) -> int:
        """Add-counter boost (+1 each) from a significant trade outcome"""
        return self.append(CognitionRecord(
            CognitionKind.MEMORY, agent_id, now, {"ids": list(ids)}, op="boost"
        ))

    def move_memory(self, agent_id: str, event_id: str, to_layer: LayerKind, now: datetime) -> int:
        """Promote an event to a longer layer; resets its counter"""
        event = self.get_memory(agent_id, event_id)
        if event is None:
            raise SchemaViolation(f"Unknown memory {event_id}")
        if event.layer.next_layer is not to_layer:
            raise SchemaViolation(
                f"Illegal transition {event.layer.value}->{to_layer.value} for {event_id}"
            )
        body = {"id": event_id, "from": event.layer.value, "to": to_layer.value}
        return self.append(CognitionRecord(CognitionKind.MEMORY, agent_id, now, body, op="promote"))

    def pin_memory(self, agent_id: str, event_id: str, now: datetime) -> int:
        return self.append(CognitionRecord(
            CognitionKind.MEMORY, agent_id, now, {"id": event_id}, op="pin"
        ))

    def purge_memory(self, agent_id: str, event_id: str, now: datetime) -> int:
        """Tombstone an event"""
        return self.append(CognitionRecord(
            CognitionKind.MEMORY, agent_id, now, {"id": event_id}, op="purge"
        ))

    def get_memory(self, agent_id: str, event_id: str) -> Optional[MemoryEvent]:
        self._ensure_loaded()
        return self.memories.get(agent_id, {}).get(event_id)

    def layer_events(self, agent_id: str, layer: LayerKind) -> List[MemoryEvent]:
        """Live events of one layer, in id order"""
        self._ensure_loaded()
        events = self.memories.get(agent_id, {})
        return [events[i] for i in sorted(events) if events[i].layer is layer]

    def agent_ids(self) -> List[str]:
        self._ensure_loaded()
        return sorted(self.memories)

    def similarity_search(self, agent_id: str, layer: LayerKind, query: EmbeddingVector,
                          n: int) -> List[Tuple[MemoryEvent, float]]:
        """
        Exact top-n cosine search over one layer

        Returns:
            (event copy, cosine) pairs; cosine desc, then timestamp desc, then id asc

        Raises:
            DimensionMismatch: If the query dimension differs from the stored vectors
        """
        if n < 1:
            raise ValueError("n must be at least 1")
        events = self.layer_events(agent_id, layer)
        if not events:
            return []

        query = np.asarray(query, dtype=np.float64)
        matrix = np.vstack([e.embedding for e in events])
        if query.shape != (matrix.shape[1],):
            raise DimensionMismatch(
                f"Query dimension {query.shape} does not match index dimension {matrix.shape[1]}"
            )
        query_norm = float(np.linalg.norm(query))
        norms = np.linalg.norm(matrix, axis=1)
        cosines = (matrix @ query) / (norms * query_norm)

        ranked = sorted(
            zip(events, cosines.tolist()),
            key=lambda pair: (-pair[1], -pair[0].timestamp.timestamp(), pair[0].id)
        )
        return [(replace(event), cosine) for event, cosine in ranked[:n]]

    # ==================== REFLECTIONS AND DEBATES ====================

    def add_reflection(self, agent_id: str, flag: ReflectionFlag, body: Dict[str, Any],
                       timestamp: datetime) -> int:
        """
        Store a reflection

        Raises:
            DuplicateReflection: Second immediate reflection for (agent, ticker, date)
        """
        return self.append(CognitionRecord(
            CognitionKind.REFLECTION, agent_id, timestamp, dict(body), reflection_flag=flag
        ))

    def add_debate(self, sender_id: str, receiver_id: str, body: Dict[str, Any],
                   timestamp: datetime) -> int:
        """Store a debate message tagged with its receiver"""
        return self.append(CognitionRecord(
            CognitionKind.DEBATE, sender_id, timestamp, dict(body), receiver_id=receiver_id
        ))

    def query_window(self, kind: CognitionKind, agent_id: Optional[str], start: datetime,
                     end: datetime) -> List[CognitionRecord]:
        """
        Records of a kind with start <= timestamp < end, chronological

        For debate records agent_id matches either sender or receiver.
        """
        _check_range(start, end)
        self._ensure_loaded()
        matches = []
        for record in self.records:
            if record.kind is not kind or not start <= record.timestamp < end:
                continue
            if agent_id is not None and agent_id not in (record.agent_id, record.receiver_id):
                continue
            matches.append(record)
        return sorted(matches, key=lambda r: (r.timestamp, r.id))

    def debates_for_session(self, session_id: str) -> List[CognitionRecord]:
        self._ensure_loaded()
        return [r for r in self.records
                if r.kind is CognitionKind.DEBATE and r.body.get("session_id") == session_id]

    def has_immediate_reflection(self, agent_id: str, ticker: str, day: date) -> bool:
        self._ensure_loaded()
        return (agent_id, ticker, day.isoformat()) in self._reflection_keys

    def snapshot(self) -> Dict[str, Any]:
        """Canonical materialized state, for replay comparisons"""
        self._ensure_loaded()
        return {
            "last_id": self.log.last_id,
            "memories": {
                agent: [events[i].to_dict() for i in sorted(events)]
                for agent, events in sorted(self.memories.items())
            },
            "purged": {agent: sorted(ids) for agent, ids in sorted(self.purged.items())},
            "reflections": [r.to_dict() for r in self.records if r.kind is CognitionKind.REFLECTION],
            "debates": [r.to_dict() for r in self.records if r.kind is CognitionKind.DEBATE],
        }


class Warehouse:
    """Unified storage for one run directory"""

    def __init__(self, run_dir: Path, embedder: Optional[EmbeddingProvider] = None):
        """
        Initialize Warehouse

        Args:
            run_dir: Run directory (created on init)
            embedder: Provider used to rebuild memory embeddings
        """
        self.run_dir = Path(run_dir)
        self.raw = RawInputStore(self.run_dir / RAW_LOG_NAME)
        self.cognition = CognitionStore(self.run_dir / COGNITION_LOG_NAME, embedder)
        self.lock_file = self.run_dir / LOCK_FILE_NAME
        logger.info(f"Warehouse initialized for run dir: {self.run_dir}")

    def init(self) -> "Warehouse":
        """Create the run directory and load both logs"""
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self.raw.load()
        self.cognition.load()
        return self

    @contextmanager
    def exclusive(self) -> Iterator["Warehouse"]:
        """
        Hold the run directory lock for the duration of the block

        Raises:
            RunDirLocked: If another invocation holds the lock
        """
        self.run_dir.mkdir(parents=True, exist_ok=True)
        try:
            fd = os.open(self.lock_file, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise RunDirLocked(
                f"Run directory {self.run_dir} is locked by another invocation",
                {"lock_file": str(self.lock_file)}
            )
        try:
            os.write(fd, str(os.getpid()).encode())
            os.close(fd)
            yield self
        finally:
            try:
                self.lock_file.unlink()
            except FileNotFoundError:
                pass
