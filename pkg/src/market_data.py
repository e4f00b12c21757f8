"""
File-based market data ingestion

Input contract (headers are exact):

    prices.csv      date,ticker,open,high,low,close,volume
    holdings.csv    date,fund,ticker,shares,direction
    news.jsonl      {"timestamp", "ticker", "headline", "body"}
    seed_memories.jsonl  {"timestamp", "agent_id" (or "*"), "origin", "text"}

Row-level problems are collected as rejects and the rest of the file is
ingested. Whole-file problems (missing file, wrong header) raise IngestError.
"""

import json
import logging
from dataclasses import dataclass, field
from datetime import date, datetime, time, timedelta
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np
import pandas as pd
from jsonschema import Draft7Validator

try:
    from .agent import TraderCharacter, assign_layer
    from .errors import IngestError, SchemaViolation, TradmemError
    from .memory_engine import MemoryEngine, MemoryOrigin
    from .storage import Frequency, RawKind, RawRecord, TradeDirection, Warehouse
except ImportError:
    from agent import TraderCharacter, assign_layer
    from errors import IngestError, SchemaViolation, TradmemError
    from memory_engine import MemoryEngine, MemoryOrigin
    from storage import Frequency, RawKind, RawRecord, TradeDirection, Warehouse

logger = logging.getLogger(__name__)

PRICE_HEADER = ["date", "ticker", "open", "high", "low", "close", "volume"]
HOLDINGS_HEADER = ["date", "fund", "ticker", "shares", "direction"]

NEWS_SCHEMA = {
    "type": "object",
    "required": ["timestamp", "ticker", "headline", "body"],
    "properties": {
        "timestamp": {"type": "string", "minLength": 10},
        "ticker": {"type": "string", "minLength": 1},
        "headline": {"type": "string", "minLength": 1},
        "body": {"type": "string"},
    },
}

SEED_SCHEMA = {
    "type": "object",
    "required": ["timestamp", "agent_id", "origin", "text"],
    "properties": {
        "timestamp": {"type": "string", "minLength": 10},
        "agent_id": {"type": "string", "minLength": 1},
        "origin": {"enum": ["macro_indicator", "strategy_doc", "market_news"]},
        "text": {"type": "string", "minLength": 1},
    },
}

ALL_AGENTS = "*"

# First field of a CSV row that had more fields than the header
TOO_MANY_FIELDS = "\x00too-many-fields"


@dataclass
class RejectedRow:
    """One input row that was not ingested"""
    line: int
    category: str
    reason: str

    def to_dict(self) -> Dict[str, Any]:
        return {"line": self.line, "category": self.category, "reason": self.reason}


@dataclass
class IngestResult:
    """Outcome of ingesting one file"""
    path: str
    kind: str
    count: int = 0
    duplicates: int = 0
    rejects: List[RejectedRow] = field(default_factory=list)
    record_ids: List[int] = field(default_factory=list)

    @property
    def rows(self) -> int:
        return self.count + self.duplicates + len(self.rejects)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "path": self.path,
            "kind": self.kind,
            "count": self.count,
            "duplicates": self.duplicates,
            "rejected": len(self.rejects),
            "rejects": [r.to_dict() for r in self.rejects],
        }


def _parse_timestamp(value: str) -> datetime:
    value = value.strip()
    if len(value) == 10:
        return datetime.combine(date.fromisoformat(value), time())
    return datetime.fromisoformat(value)


def _read_csv(path: Path, header: List[str]) -> pd.DataFrame:
    if not path.exists():
        raise IngestError(f"File not found: {path}", details={"path": str(path)})
    width = len(header)

    def flag_overflow(fields: List[str]) -> List[str]:
        # Kept in place so data rows stay at index + 2
        return [TOO_MANY_FIELDS, str(len(fields))] + [""] * (width - 2)

    try:
        df = pd.read_csv(
            path, dtype=str, keep_default_na=False, skipinitialspace=False,
            engine="python", on_bad_lines=flag_overflow
        )
    except (pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as e:
        raise IngestError(f"Cannot parse {path}: {e}", line=1, details={"path": str(path)})
    if list(df.columns) != header:
        raise IngestError(
            f"{path.name}: header must be {','.join(header)}",
            line=1,
            details={"path": str(path), "header": list(df.columns)}
        )
    return df


class DataIngestor:
    """Appends validated input files to a warehouse's raw store"""

    def __init__(self, warehouse: Warehouse):
        self.warehouse = warehouse

    def _store(self, record: RawRecord, line: int, result: IngestResult) -> None:
        raw = self.warehouse.raw
        try:
            record.validate()
        except SchemaViolation as e:
            logger.warning(f"{result.path}:{line} rejected: {e.message}")
            result.rejects.append(RejectedRow(line, e.category, e.message))
            return
        if raw.has(record):
            result.duplicates += 1
            return
        result.record_ids.append(raw.append(record))
        result.count += 1

    def _reject(self, result: IngestResult, error: TradmemError, line: int) -> None:
        logger.warning(f"{result.path}:{line} rejected: {error.message}")
        result.rejects.append(RejectedRow(line, error.category, error.message))

    def _overflowed(self, row, header: List[str], line: int, result: IngestResult) -> bool:
        if row[0] != TOO_MANY_FIELDS:
            return False
        error = IngestError(f"Row has {row[1]} fields, header has {len(header)}", line=line)
        self._reject(result, error, line)
        return True

    def ingest_prices(self, path: Path, frequency: Frequency = Frequency.DAILY) -> IngestResult:
        """
        Ingest an OHLCV CSV file

        Args:
            path: CSV with header date,ticker,open,high,low,close,volume
            frequency: Daily or minute bars

        Returns:
            IngestResult (count = new records)
        """
        path = Path(path)
        frequency = Frequency(frequency)
        df = _read_csv(path, PRICE_HEADER)
        result = IngestResult(path=str(path), kind=RawKind.PRICE_BAR.value)

        for idx, row in enumerate(df.itertuples(index=False)):
            line = idx + 2
            if self._overflowed(row, PRICE_HEADER, line, result):
                continue
            try:
                timestamp = _parse_timestamp(row.date)
                if frequency is Frequency.DAILY and timestamp.time() != time():
                    raise ValueError("daily bars must be dated without a time of day")
                volume = float(row.volume)
                if not volume.is_integer():
                    raise ValueError(f"volume must be an integer: {row.volume}")
                record = RawRecord.price_bar(
                    ticker=row.ticker.strip(),
                    timestamp=timestamp,
                    open=float(row.open),
                    high=float(row.high),
                    low=float(row.low),
                    close=float(row.close),
                    volume=int(volume),
                    frequency=frequency,
                )
            except (ValueError, TypeError, AttributeError) as e:
                self._reject(result, IngestError(f"Malformed price row: {e}", line=line), line)
                continue
            self._store(record, line, result)

        logger.info(
            f"Ingested {result.count} {frequency.value} bars from {path.name} "
            f"({result.duplicates} duplicates, {len(result.rejects)} rejected)"
        )
        return result

    def ingest_holdings(self, path: Path) -> IngestResult:
        """
        Ingest a fund holdings CSV file

        Args:
            path: CSV with header date,fund,ticker,shares,direction
        """
        path = Path(path)
        df = _read_csv(path, HOLDINGS_HEADER)
        result = IngestResult(path=str(path), kind=RawKind.HOLDING_RECORD.value)

        for idx, row in enumerate(df.itertuples(index=False)):
            line = idx + 2
            if self._overflowed(row, HOLDINGS_HEADER, line, result):
                continue
            try:
                direction = TradeDirection(row.direction.strip())
                record = RawRecord.holding(
                    ticker=row.ticker.strip(),
                    timestamp=_parse_timestamp(row.date),
                    fund=row.fund.strip(),
                    shares=int(row.shares),
                    direction=direction,
                )
            except (ValueError, TypeError, AttributeError) as e:
                self._reject(result, IngestError(f"Malformed holdings row: {e}", line=line), line)
                continue
            self._store(record, line, result)

        logger.info(
            f"Ingested {result.count} holding records from {path.name} "
            f"({result.duplicates} duplicates, {len(result.rejects)} rejected)"
        )
        return result

    def ingest_news(self, path: Path) -> IngestResult:
        """
        Ingest a news JSON-lines file

        News memories are delivered to covering agents by a NewsRouter on
        the news item's trading day, never ahead of it.
        """
        path = Path(path)
        if not path.exists():
            raise IngestError(f"File not found: {path}", details={"path": str(path)})
        validator = Draft7Validator(NEWS_SCHEMA)
        result = IngestResult(path=str(path), kind=RawKind.NEWS_ITEM.value)

        with open(path, "r", encoding="utf-8") as f:
            for line, text in enumerate(f, start=1):
                if not text.strip():
                    continue
                try:
                    item = json.loads(text)
                    errors = sorted(validator.iter_errors(item), key=lambda e: list(e.path))
                    if errors:
                        raise ValueError(errors[0].message)
                    record = RawRecord.news_item(
                        ticker=item["ticker"].strip(),
                        timestamp=_parse_timestamp(item["timestamp"]),
                        headline=item["headline"],
                        body=item["body"],
                    )
                except (ValueError, TypeError, AttributeError) as e:
                    self._reject(result, IngestError(f"Malformed news line: {e}", line=line), line)
                    continue
                self._store(record, line, result)

        logger.info(
            f"Ingested {result.count} news items from {path.name} "
            f"({result.duplicates} duplicates, {len(result.rejects)} rejected)"
        )
        return result


class NewsRouter:
    """
    Delivers news items as short-term memories to the agents covering them

    A delivered item is tagged ``news:<raw id>`` so it is delivered at most
    once per agent, also across resumed runs.
    """

    def __init__(self, warehouse: Warehouse, engine: MemoryEngine,
                 characters: Sequence[TraderCharacter], sector_map: Mapping[str, str]):
        self.warehouse = warehouse
        self.engine = engine
        self.characters = sorted(characters, key=lambda c: c.agent_id)
        self.sector_map = dict(sector_map)

    def covering_agents(self, ticker: str) -> List[str]:
        sector = self.sector_map.get(ticker)
        return [c.agent_id for c in self.characters if c.covers(sector)]

    def _delivered(self) -> Dict[str, set]:
        delivered: Dict[str, set] = {}
        for record in self.warehouse.cognition.records:
            if record.op == "create" and (record.body.get("source_ref") or "").startswith("news:"):
                delivered.setdefault(record.agent_id, set()).add(record.body["source_ref"])
        return delivered

    def deliver_until(self, until: datetime, since: Optional[datetime] = None) -> int:
        """
        Deliver every undelivered news item timestamped <= until

        Returns:
            Number of memory events created
        """
        start = since or datetime.min
        end = until + timedelta(microseconds=1)
        items = self.warehouse.raw.query_window(RawKind.NEWS_ITEM, None, start, end)
        delivered = self._delivered()
        created = 0
        for record in items:
            ref = f"news:{record.id}"
            for agent_id in self.covering_agents(record.ticker):
                if ref in delivered.get(agent_id, ()):
                    continue
                self.engine.add_memory(
                    agent_id,
                    assign_layer(MemoryOrigin.MARKET_NEWS),
                    MemoryOrigin.MARKET_NEWS,
                    f"{record.ticker}: {record.payload['headline']}. {record.payload['body']}".strip(),
                    record.timestamp,
                    source_ref=ref,
                )
                delivered.setdefault(agent_id, set()).add(ref)
                created += 1
        if created:
            logger.info(f"Delivered {created} news memories up to {until.isoformat()}")
        return created


def load_seed_memories(path: Path, engine: MemoryEngine, agent_ids: Sequence[str],
                       until: Optional[datetime] = None) -> int:
    """
    Seed agents' memory layers from a JSON-lines file

    ``agent_id`` "*" seeds every agent. The layer follows the origin
    (macro indicators long-term, strategy documents mid-term). Items dated
    after ``until`` are skipped. Seeds already present are not reloaded.

    Returns:
        Number of memory events created
    """
    path = Path(path)
    if not path.exists():
        raise IngestError(f"File not found: {path}", details={"path": str(path)})
    validator = Draft7Validator(SEED_SCHEMA)
    cognition = engine.store
    existing = {
        (r.agent_id, r.body.get("source_ref"))
        for r in cognition.records if r.op == "create"
    }

    created = 0
    with open(path, "r", encoding="utf-8") as f:
        for line, text in enumerate(f, start=1):
            if not text.strip():
                continue
            try:
                item = json.loads(text)
            except json.JSONDecodeError as e:
                raise IngestError(f"Malformed seed line: {e}", line=line)
            errors = list(validator.iter_errors(item))
            if errors:
                raise IngestError(f"Malformed seed line: {errors[0].message}", line=line)

            timestamp = _parse_timestamp(item["timestamp"])
            if until is not None and timestamp > until:
                continue
            origin = MemoryOrigin(item["origin"])
            targets = agent_ids if item["agent_id"] == ALL_AGENTS else [item["agent_id"]]
            ref = f"seed:{path.name}:{line}"
            for agent_id in targets:
                if agent_id not in agent_ids or (agent_id, ref) in existing:
                    continue
                engine.add_memory(agent_id, assign_layer(origin), origin, item["text"],
                                  timestamp, source_ref=ref)
                created += 1

    logger.info(f"Seeded {created} memories from {path.name}")
    return created


# ==================== FIXTURES ====================

FIXTURE_SECTORS = ("tech", "health", "energy")
FIXTURE_FUND = "ARKK"
FIXTURE_START = date(2023, 1, 2)

_UP_HEADLINES = (
    "{t} shares climb as analysts raise earnings outlook",
    "{t} rallies on strong product demand",
    "Investors pile into {t} after upbeat guidance",
)
_DOWN_HEADLINES = (
    "{t} slides as margins come under pressure",
    "{t} falls after cautious management commentary",
    "Analysts cut {t} target on slowing growth",
)
_FLAT_HEADLINES = (
    "{t} trades sideways ahead of sector data",
    "{t} little changed as market awaits rate decision",
)

_MACRO_SEEDS = (
    "Macro indicator: central bank keeps policy rate steady while inflation cools gradually",
    "Macro indicator: unemployment remains low and consumer spending is resilient",
)
_STRATEGY_SEEDS = (
    "Quarterly strategy: favor companies with accelerating revenue and improving margins",
    "Quarterly strategy: trim positions after sharp rallies and rebuild on weakness",
)


def _fixture_tickers(count: int) -> List[str]:
    letters = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"
    return [letters[i % 26] * 3 + (str(i // 26) if i >= 26 else "") for i in range(count)]


def generate_fixtures(out_dir: Path, days: int = 60, tickers: Optional[Sequence[str]] = None,
                      seed: int = 7, start: date = FIXTURE_START) -> Dict[str, Path]:
    """
    Write a synthetic corpus: geometric-Brownian prices, fund holdings,
    news, seed memories and a matching run config

    The same arguments always produce byte-identical files.

    Args:
        out_dir: Destination directory
        days: Number of business days
        tickers: Ticker symbols (default: five generated symbols)
        seed: RNG seed
        start: First calendar day (rolled to a business day)

    Returns:
        Map of file role to path
    """
    if days < 10:
        raise ValueError("fixtures need at least 10 business days")
    tickers = list(tickers) if tickers else _fixture_tickers(5)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(seed)
    calendar = pd.bdate_range(start=start, periods=days)
    sector_map = {t: FIXTURE_SECTORS[i % len(FIXTURE_SECTORS)] for i, t in enumerate(tickers)}

    price_rows = []
    holding_rows = []
    news_lines = []
    for ticker in tickers:
        drift = rng.uniform(-0.0005, 0.0015)
        vol = rng.uniform(0.012, 0.03)
        shocks = rng.normal(drift - 0.5 * vol ** 2, vol, size=days)
        closes = rng.uniform(40.0, 160.0) * np.exp(np.cumsum(shocks))
        opens = np.concatenate([[closes[0] * (1 - shocks[0])], closes[:-1]]) * (1 + rng.normal(0, vol / 4, days))
        highs = np.maximum(opens, closes) * (1 + np.abs(rng.normal(0, vol / 2, days)))
        lows = np.minimum(opens, closes) * (1 - np.abs(rng.normal(0, vol / 2, days)))
        volumes = rng.integers(100_000, 2_000_000, size=days)
        fund_draws = rng.random(days)
        fund_sizes = rng.integers(1, 50, size=days) * 100
        news_draws = rng.random(days)
        headline_picks = rng.integers(0, 3, size=days)

        for i, ts in enumerate(calendar):
            day = ts.date().isoformat()
            price_rows.append([day, ticker, f"{opens[i]:.4f}", f"{highs[i]:.4f}",
                               f"{lows[i]:.4f}", f"{closes[i]:.4f}", str(int(volumes[i]))])

            if fund_draws[i] < 0.3:
                direction = "Buy" if shocks[i] >= 0 else "Sell"
                shares = int(fund_sizes[i]) * (1 if direction == "Buy" else -1)
                holding_rows.append([day, FIXTURE_FUND, ticker, str(shares), direction])

            if news_draws[i] < 0.5:
                if shocks[i] > vol / 2:
                    pool = _UP_HEADLINES
                elif shocks[i] < -vol / 2:
                    pool = _DOWN_HEADLINES
                else:
                    pool = _FLAT_HEADLINES
                headline = pool[int(headline_picks[i]) % len(pool)].format(t=ticker)
                news_lines.append({
                    "timestamp": f"{day}T09:00:00",
                    "ticker": ticker,
                    "headline": headline,
                    "body": f"{ticker} ({sector_map[ticker]}) closed the previous session near "
                            f"{(opens[i]):.2f}.",
                })

    price_rows.sort(key=lambda r: (r[0], r[1]))
    holding_rows.sort(key=lambda r: (r[0], r[2]))
    news_lines.sort(key=lambda n: (n["timestamp"], n["ticker"]))

    paths = {
        "prices": out_dir / "prices.csv",
        "holdings": out_dir / "holdings.csv",
        "news": out_dir / "news.jsonl",
        "seed_memories": out_dir / "seed_memories.jsonl",
        "config": out_dir / "config.json",
    }
    pd.DataFrame(price_rows, columns=PRICE_HEADER).to_csv(paths["prices"], index=False, lineterminator="\n")
    pd.DataFrame(holding_rows, columns=HOLDINGS_HEADER).to_csv(paths["holdings"], index=False, lineterminator="\n")
    with open(paths["news"], "w", encoding="utf-8", newline="\n") as f:
        for item in news_lines:
            f.write(json.dumps(item, sort_keys=True) + "\n")

    seed_day = (calendar[0] - pd.Timedelta(days=1)).date().isoformat()
    with open(paths["seed_memories"], "w", encoding="utf-8", newline="\n") as f:
        for text in _MACRO_SEEDS:
            f.write(json.dumps({"timestamp": f"{seed_day}T08:00:00", "agent_id": ALL_AGENTS,
                                "origin": "macro_indicator", "text": text}, sort_keys=True) + "\n")
        for text in _STRATEGY_SEEDS:
            f.write(json.dumps({"timestamp": f"{seed_day}T08:00:00", "agent_id": ALL_AGENTS,
                                "origin": "strategy_doc", "text": text}, sort_keys=True) + "\n")

    split = int(days * 2 / 3)
    used = set(sector_map.values())

    def scope(*sectors: str) -> List[str]:
        return [s for s in sectors if s in used] or sorted(used)

    config = {
        "run_id": f"fixture-s{seed}",
        "seed": seed,
        "train": {"start": calendar[0].date().isoformat(), "end": calendar[split - 1].date().isoformat()},
        "test": {"start": calendar[split].date().isoformat(), "end": calendar[-1].date().isoformat()},
        "agents": [
            {"agent_id": "seeker", "risk": "Seeking", "sectors": scope("tech", "health"), "initial_cash": 100000.0},
            {"agent_id": "neutral", "risk": "Neutral", "sectors": scope("tech", "energy"), "initial_cash": 100000.0},
            {"agent_id": "averse", "risk": "Averse", "sectors": scope("health", "energy", "tech"), "initial_cash": 100000.0},
        ],
        "sectors": sector_map,
        "k": 3,
        "data": {
            "prices": paths["prices"].name,
            "holdings": paths["holdings"].name,
            "news": paths["news"].name,
            "seed_memories": paths["seed_memories"].name,
        },
    }
    paths["config"].write_text(json.dumps(config, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    logger.info(f"Generated fixtures in {out_dir}: {len(tickers)} tickers x {days} days (seed {seed})")
    return paths
