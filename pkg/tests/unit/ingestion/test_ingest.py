"""Tests for input file ingestion"""

import json
from datetime import date, datetime

import pytest

from src.errors import IngestError
from src.market_data import DataIngestor
from src.storage import Frequency, RawKind


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def ingestor(warehouse):
    return DataIngestor(warehouse)


class TestIngestPrices:
    """OHLCV CSV ingestion"""

    def test_valid_file(self, ingestor, warehouse, write_prices):
        path = write_prices({"AAA": [100, 101, 102], "BBB": [50, 49]})

        result = ingestor.ingest_prices(path)

        assert result.count == 5
        assert result.rejects == []
        assert warehouse.raw.close_on("AAA", date(2024, 1, 4)) == 102.0
        assert warehouse.raw.tickers() == ["AAA", "BBB"]

    def test_reingest_counts_duplicates(self, ingestor, write_prices):
        path = write_prices({"AAA": [100, 101]})
        ingestor.ingest_prices(path)

        again = ingestor.ingest_prices(path)

        assert again.count == 0
        assert again.duplicates == 2

    def test_bad_rows_are_rejected_with_line_numbers(self, ingestor, warehouse, tmp_path):
        path = write_lines(tmp_path / "prices.csv", [
            "date,ticker,open,high,low,close,volume",
            "2024-01-02,AAA,100,101,99,100.5,1000",
            "2024-01-03,AAA,100,99,98,100.5,1000",
            "2024-01-04,AAA,100,101,99,100,lots",
            "2024-01-05T10:00:00,AAA,100,101,99,100,1000",
            "2024-01-08,AAA,100,101,99,100,1000",
        ])

        result = ingestor.ingest_prices(path)

        assert result.count == 2
        assert [(r.line, r.category) for r in result.rejects] == [
            (3, "SchemaViolation"),
            (4, "IngestError"),
            (5, "IngestError"),
        ]
        assert result.rows == 5
        assert len(warehouse.raw.records) == 2

    def test_extra_field_rejects_only_that_row(self, ingestor, warehouse, tmp_path):
        path = write_lines(tmp_path / "prices.csv", [
            "date,ticker,open,high,low,close,volume",
            "2024-01-02,AAA,100,101,99,100.5,1000",
            "2024-01-03,AAA,100,101,99,100.5,1000,extra",
            "2024-01-04,AAA,100,101,99,100",
            "2024-01-05,AAA,100,101,99,101,1000",
        ])

        result = ingestor.ingest_prices(path)

        assert result.count == 2
        assert [(r.line, r.category) for r in result.rejects] == [(3, "IngestError"), (4, "IngestError")]
        assert "8 fields" in result.rejects[0].reason
        assert warehouse.raw.close_on("AAA", date(2024, 1, 5)) == 101.0
        assert warehouse.raw.close_on("AAA", date(2024, 1, 3)) is None

    def test_minute_bars_keep_time_of_day(self, ingestor, warehouse, tmp_path):
        path = write_lines(tmp_path / "minute.csv", [
            "date,ticker,open,high,low,close,volume",
            "2024-01-02T09:31:00,AAA,100,101,99,100.5,10",
        ])

        result = ingestor.ingest_prices(path, Frequency.MINUTE)

        assert result.count == 1
        record = warehouse.raw.records[0]
        assert record.timestamp == datetime(2024, 1, 2, 9, 31)
        assert record.payload["frequency"] == "minute"

    def test_wrong_header(self, ingestor, tmp_path):
        path = write_lines(tmp_path / "prices.csv", ["day,symbol,close", "2024-01-02,AAA,1"])
        with pytest.raises(IngestError) as exc:
            ingestor.ingest_prices(path)
        assert exc.value.line == 1

    def test_missing_file(self, ingestor, tmp_path):
        with pytest.raises(IngestError):
            ingestor.ingest_prices(tmp_path / "absent.csv")


class TestIngestHoldings:
    """Fund holdings CSV ingestion"""

    def test_direction_must_match_sign(self, ingestor, warehouse, tmp_path):
        path = write_lines(tmp_path / "holdings.csv", [
            "date,fund,ticker,shares,direction",
            "2024-01-02,ARKK,AAA,500,Buy",
            "2024-01-03,ARKK,AAA,-200,Sell",
            "2024-01-04,ARKK,AAA,300,Sell",
            "2024-01-05,ARKK,AAA,100,Hold",
        ])

        result = ingestor.ingest_holdings(path)

        assert result.count == 2
        assert [(r.line, r.category) for r in result.rejects] == [(4, "SchemaViolation"), (5, "IngestError")]
        holdings = warehouse.raw.on_day(RawKind.HOLDING_RECORD, date(2024, 1, 3), "AAA")
        assert holdings[0].payload == {"fund": "ARKK", "shares": -200, "direction": "Sell"}

    def test_field_count_mismatch(self, ingestor, tmp_path):
        path = write_lines(tmp_path / "holdings.csv", [
            "date,fund,ticker,shares,direction",
            "2024-01-02,ARKK,AAA,500",
            "2024-01-03,ARKK,AAA,500,Buy,again",
            "2024-01-04,ARKK,AAA,500,Buy",
        ])

        result = ingestor.ingest_holdings(path)

        assert result.count == 1
        assert [r.line for r in result.rejects] == [2, 3]


class TestIngestNews:
    """News JSON-lines ingestion"""

    def test_mixed_lines(self, ingestor, warehouse, tmp_path):
        good = {"timestamp": "2024-01-02T09:00:00", "ticker": "AAA", "headline": "AAA beats", "body": "Strong quarter"}
        path = write_lines(tmp_path / "news.jsonl", [
            json.dumps(good),
            "{not json",
            json.dumps({"timestamp": "2024-01-02T09:00:00", "ticker": "AAA", "body": "no headline"}),
            "",
            json.dumps(dict(good, headline="AAA guides higher")),
            json.dumps(good),
        ])

        result = ingestor.ingest_news(path)

        assert result.count == 2
        assert result.duplicates == 1
        assert [r.line for r in result.rejects] == [2, 3]
        assert all(r.category == "IngestError" for r in result.rejects)
        news = warehouse.raw.on_day(RawKind.NEWS_ITEM, date(2024, 1, 2))
        assert [n.payload["headline"] for n in news] == ["AAA beats", "AAA guides higher"]

    def test_result_dict(self, ingestor, tmp_path):
        path = write_lines(tmp_path / "news.jsonl", ["[1, 2]"])
        summary = ingestor.ingest_news(path).to_dict()
        assert summary["kind"] == "NewsItem"
        assert summary["count"] == 0
        assert summary["rejected"] == 1
