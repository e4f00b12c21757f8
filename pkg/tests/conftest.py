"""Shared fixtures for tests"""

import pytest
from datetime import date, datetime
from pathlib import Path
import sys
import os

import pandas as pd

# Add src and the repository root to path for imports
ROOT = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
sys.path.insert(0, os.path.join(ROOT, 'src'))
sys.path.insert(0, ROOT)

from src.embedding import HashingEmbedder
from src.market_data import PRICE_HEADER, generate_fixtures
from src.memory_engine import MemoryEngine
from src.storage import Warehouse


@pytest.fixture
def run_dir(tmp_path):
    """Empty run directory"""
    path = tmp_path / "run"
    path.mkdir()
    return path


@pytest.fixture
def embedder():
    return HashingEmbedder()


@pytest.fixture
def warehouse(run_dir, embedder):
    """Initialized warehouse on an empty run directory"""
    return Warehouse(run_dir, embedder).init()


@pytest.fixture
def engine(warehouse, embedder):
    """Memory engine with default layer parameters"""
    return MemoryEngine(warehouse.cognition, embedder, audit_path=warehouse.run_dir / "memory_audit.jsonl")


@pytest.fixture
def t0():
    """Decision time used across unit tests"""
    return datetime(2024, 1, 10, 16, 0)


@pytest.fixture
def write_prices(tmp_path):
    """
    Factory writing a daily price CSV

    write_prices({"AAA": [100, 101, ...]}, start=date(2024, 1, 2)) -> Path
    Bars are placed on consecutive business days; open = high = low = close.
    """
    def _write(closes, start=date(2024, 1, 2), name="prices.csv"):
        rows = []
        for ticker, series in sorted(closes.items()):
            days = pd.bdate_range(start=start, periods=len(series))
            for day, close in zip(days, series):
                c = f"{float(close):.4f}"
                rows.append([day.date().isoformat(), ticker, c, c, c, c, "1000"])
        rows.sort(key=lambda r: (r[0], r[1]))
        path = tmp_path / name
        pd.DataFrame(rows, columns=PRICE_HEADER).to_csv(path, index=False, lineterminator="\n")
        return path
    return _write


@pytest.fixture(scope="session")
def fixture_corpus(tmp_path_factory):
    """60-day synthetic corpus (5 tickers, seed 7) shared by integration tests"""
    return generate_fixtures(tmp_path_factory.mktemp("corpus"), days=60, seed=7)
