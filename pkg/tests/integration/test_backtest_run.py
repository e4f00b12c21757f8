"""
Integration tests for a complete train + test run

Runs the rule-based desk over the 60-day synthetic corpus and checks:
1. Portfolios replay from the ledger (no negative cash or shares)
2. Debate message counts match participants and rounds
3. No decision context sees data from its future
4. Two runs of the same config produce identical files
5. The cognition log replays to the live state during a run
"""

import json
from pathlib import Path

import pytest

from src.agent import Phase, PortfolioState, TradeExecution
from src.backtest import Backtester
from src.debate import export_transcripts
from src.errors import ConfigError
from src.models.config import load_run_config
from src.storage import COGNITION_LOG_NAME, CognitionKind, CognitionStore

pytestmark = [pytest.mark.integration, pytest.mark.slow]


def run_desk(fixture_corpus, run_dir):
    config = load_run_config(fixture_corpus["config"])
    backtester = Backtester(config, run_dir, config_dir=fixture_corpus["config"].parent)
    results = {}
    for phase in (Phase.TRAIN, Phase.TEST):
        backtester.prepare(phase)
        results[phase] = backtester.run(phase)
    return backtester, results


@pytest.fixture(scope="module")
def desk_run(fixture_corpus, tmp_path_factory):
    run_dir = tmp_path_factory.mktemp("desk") / "run"
    backtester, results = run_desk(fixture_corpus, run_dir)
    return backtester, results, run_dir


def read_ledger(path: Path):
    with open(path, "r", encoding="utf-8") as f:
        return [TradeExecution.from_dict(json.loads(line)) for line in f if line.strip()]


@pytest.mark.timeout(600)
class TestBacktestRun:
    """Invariants of a finished run"""

    def test_both_phases_complete(self, desk_run):
        backtester, results, run_dir = desk_run
        train, test = results[Phase.TRAIN], results[Phase.TEST]

        assert train.days[-1] < test.days[0]
        assert len(train.days) + len(test.days) == 60
        for name in ("train", "test"):
            assert (run_dir / f"report_{name}.json").exists()
            assert (run_dir / f"checkpoints/{name}_end.json").exists()
        assert (run_dir / "report.json").read_bytes() == (run_dir / "report_test.json").read_bytes()

    def test_ledger_replays_to_portfolio(self, desk_run):
        backtester, results, run_dir = desk_run
        ledger = read_ledger(run_dir / "ledger_test.jsonl")

        for agent_id, agent in backtester.agents.items():
            own = [t for t in ledger if t.agent_id == agent_id]
            replayed = PortfolioState.from_ledger(agent.initial_cash, own)

            assert replayed.cash == pytest.approx(agent.portfolio.cash, abs=1e-6)
            assert replayed.cash >= 0
            for ticker, position in replayed.positions.items():
                assert position.shares >= 0
                assert position.shares == agent.portfolio.shares(ticker)

    def test_report_matches_portfolios(self, desk_run):
        backtester, results, run_dir = desk_run
        report = results[Phase.TEST].report

        assert [m.agent_id for m in report.agents] == sorted(backtester.agents)
        for metrics in report.agents:
            agent = backtester.agents[metrics.agent_id]
            last_day = results[Phase.TEST].days[-1]
            assert metrics.final_value == pytest.approx(agent.value_history[last_day], rel=1e-9)
            assert metrics.trade_count == len(agent.portfolio.ledger)

    def test_debate_conservation(self, desk_run):
        backtester, results, run_dir = desk_run
        sessions = [s for r in results.values() for day in r.day_reports for s in day.debates]

        assert sessions, "the corpus should produce at least one debate"
        for session in sessions:
            n = len(session["participants"])
            assert session["messages"] == n * (n - 1) * session["rounds"]
        stored = [r for r in backtester.warehouse.cognition.records if r.kind is CognitionKind.DEBATE]
        assert len(stored) == sum(s["messages"] for s in sessions)

    def test_no_lookahead(self, desk_run):
        backtester, results, run_dir = desk_run
        for result in results.values():
            assert result.audit["violations"] == 0
            assert result.audit["contexts_checked"] > 0
            assert all(day.lookahead_violations == 0 for day in result.day_reports)
        assert results[Phase.TEST].audit["holdings_in_test"] == 0

    def test_weekly_reflections(self, desk_run):
        backtester, results, run_dir = desk_run
        weekly_days = [d for d in results[Phase.TRAIN].day_reports if d.extended_reflections]
        assert weekly_days
        assert all(d.extended_reflections == sorted(backtester.agents) for d in weekly_days)

    def test_checkpoint(self, desk_run):
        backtester, results, run_dir = desk_run
        snapshot = json.loads((run_dir / "checkpoints" / "test_end.json").read_text(encoding="utf-8"))

        assert snapshot["phase"] == "Test"
        assert snapshot["last_date"] == results[Phase.TEST].days[-1].isoformat()
        assert snapshot["config_hash"] == backtester.config.config_hash()
        assert snapshot["cognition_last_id"] == backtester.warehouse.cognition.log.last_id
        assert sorted(snapshot["agents"]) == sorted(backtester.agents)

    def test_phase_cannot_rerun(self, desk_run):
        backtester, results, run_dir = desk_run
        with pytest.raises(ConfigError):
            backtester.run(Phase.TRAIN)

    def test_cognition_replays_after_run(self, desk_run):
        backtester, results, run_dir = desk_run
        replayed = CognitionStore(run_dir / COGNITION_LOG_NAME, backtester.embedder).load()
        assert replayed.snapshot() == backtester.warehouse.cognition.snapshot()


@pytest.mark.timeout(900)
class TestDeterminism:
    """Same config and data, same bytes"""

    def test_two_runs_identical(self, fixture_corpus, desk_run, tmp_path):
        first, _, first_dir = desk_run
        second_dir = tmp_path / "again"
        second, _ = run_desk(fixture_corpus, second_dir)

        for name in ("ledger_train.jsonl", "ledger_test.jsonl", "report_train.json", "report_train.csv",
                     "report_test.json", "report_test.csv", "audit_train.jsonl", "audit_test.jsonl"):
            assert (first_dir / name).read_bytes() == (second_dir / name).read_bytes(), name

        export_transcripts(first.warehouse.cognition, tmp_path / "first.jsonl")
        export_transcripts(second.warehouse.cognition, tmp_path / "second.jsonl")
        assert (tmp_path / "first.jsonl").read_bytes() == (tmp_path / "second.jsonl").read_bytes()


@pytest.mark.timeout(600)
class TestReplayDuringRun:
    """Replaying the log mid-run reproduces the live memory state"""

    def test_snapshot_every_ten_days(self, fixture_corpus, tmp_path):
        config = load_run_config(fixture_corpus["config"])
        run_dir = tmp_path / "replay"
        backtester = Backtester(config, run_dir, config_dir=fixture_corpus["config"].parent)
        backtester.prepare(Phase.TRAIN)
        days = backtester.warehouse.raw.trading_days(config.train.start, config.train.end)
        weeks = backtester.weekly_buckets(days, config.train.start)

        checked = 0
        for i, day in enumerate(days, start=1):
            backtester.run_day(day, Phase.TRAIN, week=weeks.get(day))
            if i % 10 == 0:
                replayed = CognitionStore(run_dir / COGNITION_LOG_NAME, backtester.embedder).load()
                assert replayed.snapshot() == backtester.warehouse.cognition.snapshot(), day
                checked += 1
        assert checked == len(days) // 10
