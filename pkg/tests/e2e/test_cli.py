"""
End-to-end tests for the tradmem command line

Drives cli.main() the way a user would:
1. Generate fixtures
2. Train, then test, in the same run directory
3. Print reports, query memory, export debate transcripts

Failures must exit 1 with a single JSON error line on stderr.
"""

import json
import logging

import pytest

from src import cli
from src.run_log_manager import RunLogManager

pytestmark = pytest.mark.e2e


def error_line(captured):
    lines = [line for line in captured.err.splitlines() if line.startswith("{")]
    assert len(lines) == 1, captured.err
    return json.loads(lines[0])


class TestFixturesCommand:

    def test_same_seed_same_bytes(self, tmp_path, capsys):
        assert cli.main(["fixtures", "--out", str(tmp_path / "a"), "--days", "20"]) == 0
        assert cli.main(["fixtures", "--out", str(tmp_path / "b"), "--days", "20"]) == 0

        for name in ("prices.csv", "holdings.csv", "news.jsonl", "seed_memories.jsonl", "config.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes(), name
        assert "Fixtures written" in capsys.readouterr().out

    def test_too_few_days(self, tmp_path, capsys):
        assert cli.main(["fixtures", "--out", str(tmp_path), "--days", "5"]) == 1
        assert error_line(capsys.readouterr())["code"] == "ConfigError"


class TestCommandErrors:
    """Exit codes and stderr error lines"""

    def test_missing_config(self, tmp_path, capsys):
        code = cli.main(["train", "--config", str(tmp_path / "absent.json"), "--run-dir", str(tmp_path / "run")])

        assert code == 1
        line = error_line(capsys.readouterr())
        assert line["code"] == "ConfigError"
        assert line["details"]["path"].endswith("absent.json")

    def test_unknown_flag_is_usage_error(self):
        with pytest.raises(SystemExit) as exc:
            cli.main(["report", "--bogus"])
        assert exc.value.code == 2

    def test_no_command(self, capsys):
        assert cli.main([]) == 1

    def test_report_without_run(self, tmp_path, capsys):
        assert cli.main(["report", "--run-dir", str(tmp_path)]) == 1
        assert error_line(capsys.readouterr())["code"] == "ConfigError"

    def test_locked_run_dir(self, tmp_path, capsys):
        run_dir = tmp_path / "run"
        run_dir.mkdir()
        (run_dir / ".lock").write_text("1234", encoding="utf-8")

        code = cli.main(["query", "--run-dir", str(run_dir), "--agent", "seeker",
                         "--layer", "short", "--prompt", "AAA earnings"])

        assert code == 1
        assert error_line(capsys.readouterr())["code"] == "RunDirLocked"

    def test_query_empty_store(self, tmp_path, capsys):
        code = cli.main(["query", "--run-dir", str(tmp_path / "run"), "--agent", "seeker",
                         "--layer", "long", "--prompt", "rates"])

        assert code == 0
        assert "0 events" in capsys.readouterr().out

    def test_ingest_needs_a_file(self, tmp_path, capsys):
        assert cli.main(["ingest", "--run-dir", str(tmp_path)]) == 1

    def test_logs_without_run(self, tmp_path, capsys):
        assert cli.main(["logs", "--run-dir", str(tmp_path), "--phase", "train"]) == 1
        assert error_line(capsys.readouterr())["code"] == "ConfigError"


class TestLogsCommand:
    """Reading a phase log back after the run"""

    @pytest.fixture
    def run_dir(self, tmp_path):
        manager = RunLogManager(tmp_path)
        manager.start_run_logging("train")
        logging.getLogger("src.storage").info("Raw store loaded: 12 records")
        logging.getLogger("src.market_data").warning("prices.csv:3 rejected: high below low")
        logging.getLogger("src.agent").info("alpha bought 10 AAA")
        manager.stop_run_logging("train")
        return tmp_path

    def test_oldest_first(self, run_dir, capsys):
        assert cli.main(["logs", "--run-dir", str(run_dir), "--phase", "train"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert "3 records" in lines[0]
        assert lines[1].endswith("INFO src.storage: Raw store loaded: 12 records")
        assert lines[3].endswith("INFO src.agent: alpha bought 10 AAA")

    def test_level_and_limit(self, run_dir, capsys):
        assert cli.main(["logs", "--run-dir", str(run_dir), "--phase", "train", "--level", "WARNING"]) == 0
        out = capsys.readouterr().out
        assert "1 records" in out
        assert "WARNING src.market_data: prices.csv:3 rejected: high below low" in out

        assert cli.main(["logs", "--run-dir", str(run_dir), "--phase", "train", "--limit", "1"]) == 0
        assert capsys.readouterr().out.splitlines()[1].endswith("alpha bought 10 AAA")

    def test_limit_must_be_positive(self, run_dir, capsys):
        assert cli.main(["logs", "--run-dir", str(run_dir), "--phase", "train", "--limit", "0"]) == 1
        assert error_line(capsys.readouterr())["code"] == "ConfigError"


@pytest.mark.slow
@pytest.mark.timeout(900)
class TestFullFlow:
    """fixtures -> train -> test -> report -> query -> export-debates"""

    def test_full_flow(self, tmp_path, capsys):
        corpus = tmp_path / "corpus"
        run_dir = tmp_path / "runs" / "desk"
        config = str(corpus / "config.json")

        assert cli.main(["fixtures", "--out", str(corpus), "--days", "30", "--seed", "11"]) == 0

        assert cli.main(["train", "--config", config, "--run-dir", str(run_dir)]) == 0
        out = capsys.readouterr().out
        assert "Train complete" in out
        assert "Lookahead violations: 0" in out

        assert cli.main(["test", "--config", config, "--run-dir", str(run_dir)]) == 0
        assert "Test complete" in capsys.readouterr().out

        for name in ("config.json", "report_train.json", "report_test.json", "ledger_test.jsonl",
                     "logs/train.log", "logs/test.log", "checkpoints/test_end.json"):
            assert (run_dir / name).exists(), name
        assert not (run_dir / ".lock").exists()

        # Report to stdout and to a file
        assert cli.main(["report", "--run-dir", str(run_dir)]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["phase"] == "test"
        assert [a["agent_id"] for a in report["agents"]] == ["averse", "neutral", "seeker"]

        csv_out = tmp_path / "report_train.csv"
        assert cli.main(["report", "--run-dir", str(run_dir), "--phase", "train",
                         "--format", "csv", "--out", str(csv_out)]) == 0
        rows = csv_out.read_text(encoding="utf-8").splitlines()
        assert len(rows) == 1 + 3 + 1
        assert rows[-1].split(",")[3] == "aggregate"

        # Query is read-only
        log_before = (run_dir / "cognition.jsonl").read_bytes()
        assert cli.main(["query", "--run-dir", str(run_dir), "--agent", "seeker",
                         "--layer", "long", "--prompt", "interest rates", "--k", "2"]) == 0
        assert "seeker long layer" in capsys.readouterr().out
        assert (run_dir / "cognition.jsonl").read_bytes() == log_before

        # Export debates, full and windowed
        transcripts = tmp_path / "debates.jsonl"
        assert cli.main(["export-debates", "--run-dir", str(run_dir), "--out", str(transcripts)]) == 0
        capsys.readouterr()
        messages = [json.loads(line) for line in transcripts.read_text(encoding="utf-8").splitlines()]
        assert all(m["kind"] == "Debate" for m in messages)

        test_start = json.loads((corpus / "config.json").read_text(encoding="utf-8"))["test"]["start"]
        windowed = tmp_path / "debates_test.jsonl"
        assert cli.main(["export-debates", "--run-dir", str(run_dir), "--out", str(windowed),
                         "--from", test_start]) == 0
        assert len(windowed.read_text(encoding="utf-8").splitlines()) <= len(messages)

        # Phase logs are readable after the run
        assert cli.main(["logs", "--run-dir", str(run_dir), "--phase", "test", "--limit", "5"]) == 0
        assert "5 records" in capsys.readouterr().out

        # A second train on the same run directory is refused
        assert cli.main(["train", "--config", config, "--run-dir", str(run_dir)]) == 1
        assert error_line(capsys.readouterr())["code"] == "ConfigError"
