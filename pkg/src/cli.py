"""Command-line interface for tradmem"""

import sys
import argparse
import logging
from datetime import date, datetime, time
from pathlib import Path
from typing import List, Optional

try:
    from .agent import Phase
    from .backtest import Backtester
    from .backtest.report import load_report, render_report
    from .debate import export_transcripts
    from .embedding import create_embedder
    from .errors import ConfigError, TradmemError
    from .market_data import DataIngestor, generate_fixtures
    from .memory_engine import DEFAULT_LAYER_PARAMS, LAYER_ORDER, LayerKind, MemoryEngine
    from .models.common import ErrorLine
    from .models.config import RunConfig, load_run_config
    from .run_log_manager import RunLogManager
    from .storage import Frequency, Warehouse
except ImportError:
    # For direct execution
    from agent import Phase
    from backtest import Backtester
    from backtest.report import load_report, render_report
    from debate import export_transcripts
    from embedding import create_embedder
    from errors import ConfigError, TradmemError
    from market_data import DataIngestor, generate_fixtures
    from memory_engine import DEFAULT_LAYER_PARAMS, LAYER_ORDER, LayerKind, MemoryEngine
    from models.common import ErrorLine
    from models.config import RunConfig, load_run_config
    from run_log_manager import RunLogManager
    from storage import Frequency, Warehouse

logger = logging.getLogger(__name__)

DEFAULT_RUNS_ROOT = Path("runs")
RUN_CONFIG_SNAPSHOT = "config.json"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tradmem",
        description="tradmem - layered-memory multi-agent trading backtests"
    )
    parser.add_argument('--runs-root', type=Path, default=DEFAULT_RUNS_ROOT,
                        help='Directory holding run directories (default: runs)')
    parser.add_argument('--log-level', default='INFO',
                        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'], help='Console log level')

    subparsers = parser.add_subparsers(dest='command', help='Commands')

    def run_target(sub: argparse.ArgumentParser) -> None:
        group = sub.add_mutually_exclusive_group()
        group.add_argument('--run', help='Run id under --runs-root')
        group.add_argument('--run-dir', type=Path, help='Explicit run directory')

    # Ingest command
    ingest_parser = subparsers.add_parser('ingest', help='Ingest price, holdings or news files')
    run_target(ingest_parser)
    ingest_parser.add_argument('--prices', type=Path, help='Price bars CSV')
    ingest_parser.add_argument('--minute', action='store_true', help='Price file holds minute bars')
    ingest_parser.add_argument('--holdings', type=Path, help='Fund holdings CSV')
    ingest_parser.add_argument('--news', type=Path, help='News JSON-lines')

    # Fixtures command
    fixtures_parser = subparsers.add_parser('fixtures', help='Generate a synthetic corpus and run config')
    fixtures_parser.add_argument('--out', type=Path, default=Path('fixtures'), help='Output directory')
    fixtures_parser.add_argument('--days', type=int, default=60, help='Business days (default: 60)')
    fixtures_parser.add_argument('--tickers', help='Comma-separated tickers (default: AAA..EEE)')
    fixtures_parser.add_argument('--seed', type=int, default=7, help='RNG seed (default: 7)')

    # Train / test commands
    for name, help_text in (('train', 'Run the training phase'), ('test', 'Run the test phase')):
        phase_parser = subparsers.add_parser(name, help=help_text)
        phase_parser.add_argument('--config', type=Path, required=True, help='Run config JSON')
        phase_parser.add_argument('--run-dir', type=Path, help='Run directory (default: <runs-root>/<run_id>)')

    # Query command
    query_parser = subparsers.add_parser('query', help='Rank an agent layer for a prompt (read-only)')
    run_target(query_parser)
    query_parser.add_argument('--agent', required=True, help='Agent id')
    query_parser.add_argument('--layer', required=True, choices=[layer.value for layer in LayerKind],
                              help='Memory layer')
    query_parser.add_argument('--k', type=int, default=5, help='Rows to print (default: 5)')
    query_parser.add_argument('--prompt', required=True, help='Prompt text')
    query_parser.add_argument('--at', help='Prompt time, ISO format (default: newest memory)')

    # Report command
    report_parser = subparsers.add_parser('report', help='Print a run report')
    run_target(report_parser)
    report_parser.add_argument('--format', choices=['csv', 'json'], default='json', help='Output format')
    report_parser.add_argument('--phase', choices=['train', 'test'], help='Phase (default: latest)')
    report_parser.add_argument('--out', type=Path, help='Write to a file instead of stdout')

    # Export debates command
    export_parser = subparsers.add_parser('export-debates', help='Export debate transcripts as JSON-lines')
    run_target(export_parser)
    export_parser.add_argument('--out', type=Path, required=True, help='Output JSON-lines file')
    export_parser.add_argument('--from', dest='date_from', type=date.fromisoformat,
                               help='First date (inclusive)')
    export_parser.add_argument('--to', dest='date_to', type=date.fromisoformat,
                               help='Last date (inclusive)')

    # Logs command
    logs_parser = subparsers.add_parser('logs', help='Print the captured log of a phase')
    run_target(logs_parser)
    logs_parser.add_argument('--phase', choices=['train', 'test'], required=True, help='Phase')
    logs_parser.add_argument('--limit', type=int, default=50, help='Newest records to print (default: 50)')
    logs_parser.add_argument('--level', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'],
                             help='Minimum level (default: all lines)')

    return parser


def resolve_run_dir(args: argparse.Namespace) -> Path:
    if getattr(args, 'run_dir', None):
        return args.run_dir
    if getattr(args, 'run', None):
        return args.runs_root / args.run
    raise ConfigError("Specify --run or --run-dir")


def load_snapshot(run_dir: Path) -> Optional[RunConfig]:
    """Config stored by the last train/test invocation, if any"""
    path = run_dir / RUN_CONFIG_SNAPSHOT
    return load_run_config(path) if path.exists() else None


def open_warehouse(run_dir: Path, config: Optional[RunConfig] = None) -> Warehouse:
    if config is not None:
        embedding = config.embedding
        embedder = create_embedder(embedding.kind, embedding.dimension, embedding.endpoint, embedding.timeout)
    else:
        embedder = create_embedder()
    return Warehouse(run_dir, embedder)


def cmd_ingest(args: argparse.Namespace) -> int:
    if not (args.prices or args.holdings or args.news):
        print("❌ Error: specify --prices, --holdings or --news", file=sys.stderr)
        return 1

    run_dir = resolve_run_dir(args)
    warehouse = open_warehouse(run_dir, load_snapshot(run_dir))
    with warehouse.exclusive():
        warehouse.init()
        ingestor = DataIngestor(warehouse)
        results = []
        if args.prices:
            frequency = Frequency.MINUTE if args.minute else Frequency.DAILY
            results.append(ingestor.ingest_prices(args.prices, frequency))
        if args.holdings:
            results.append(ingestor.ingest_holdings(args.holdings))
        if args.news:
            results.append(ingestor.ingest_news(args.news))

    for result in results:
        print(f"✅ {Path(result.path).name}: {result.count} {result.kind} records "
              f"({result.duplicates} duplicates, {len(result.rejects)} rejected)")
        for reject in result.rejects:
            print(f"  • line {reject.line}: {reject.category}: {reject.reason}")
    return 0


def cmd_fixtures(args: argparse.Namespace) -> int:
    tickers = [t.strip() for t in args.tickers.split(',') if t.strip()] if args.tickers else None
    try:
        paths = generate_fixtures(args.out, days=args.days, tickers=tickers, seed=args.seed)
    except ValueError as e:
        raise ConfigError(str(e), {"days": args.days})
    print(f"✅ Fixtures written to {args.out}")
    for role, path in paths.items():
        print(f"  • {role}: {path}")
    return 0


def cmd_phase(args: argparse.Namespace, phase: Phase) -> int:
    config = load_run_config(args.config)
    run_dir = args.run_dir or args.runs_root / config.run_id
    warehouse = open_warehouse(run_dir, config)

    with warehouse.exclusive():
        warehouse.init()
        (run_dir / RUN_CONFIG_SNAPSHOT).write_text(
            config.model_dump_json(indent=2) + "\n", encoding="utf-8"
        )
        log_manager = RunLogManager(run_dir)
        name = phase.value.lower()
        log_manager.start_run_logging(name)
        try:
            backtester = Backtester(config, run_dir, config_dir=args.config.parent,
                                    warehouse=warehouse, embedder=warehouse.cognition.embedder)
            backtester.prepare(phase)
            result = backtester.run(phase)
            warnings = log_manager.get_recent_logs(name, limit=5, level="WARNING")
        finally:
            log_manager.stop_run_logging(name)

    aggregate = result.report.aggregate
    print(f"✅ {phase.value} complete: {len(result.days)} days "
          f"{result.days[0].isoformat()}..{result.days[-1].isoformat()}")
    print(f"Run directory: {run_dir}")
    print(f"Config hash: {result.report.config_hash}")
    for metrics in list(result.report.agents) + [aggregate]:
        sharpe = f"{metrics.sharpe:.3f}" if metrics.sharpe is not None else "n/a"
        print(f"  • {metrics.agent_id}: return {metrics.cumulative_return:+.4%}, "
              f"volatility {metrics.volatility:.4f}, sharpe {sharpe}, trades {metrics.trade_count}")
    print(f"Lookahead violations: {result.audit['violations']}")
    if warnings:
        print(f"⚠️  Recent warnings (tradmem logs --phase {name} for the full log):")
        for entry in reversed(warnings):
            print(f"  • {entry['logger']}: {entry['message']}")
    return 0


def format_rows(ranked) -> List[str]:
    header = f"{'id':<14} {'layer':<7} {'gamma':>8} {'recency':>8} {'relev':>8} {'import':>8} {'bonus':>6} {'acc':>4}  text"
    lines = [header, "-" * len(header)]
    for event, score in ranked:
        text = event.text if len(event.text) <= 60 else event.text[:57] + "..."
        lines.append(
            f"{event.id:<14} {event.layer.value:<7} {score.gamma:>8.3f} {score.recency:>8.3f} "
            f"{score.relevancy:>8.3f} {score.importance:>8.3f} {score.bonus:>6.1f} "
            f"{event.access_count:>4}  {text}"
        )
    return lines


def cmd_query(args: argparse.Namespace) -> int:
    if args.k < 1:
        raise ConfigError("--k must be at least 1", {"k": args.k})
    run_dir = resolve_run_dir(args)
    config = load_snapshot(run_dir)
    warehouse = open_warehouse(run_dir, config)
    layer = LayerKind(args.layer)

    with warehouse.exclusive():
        warehouse.init()
        engine = MemoryEngine(
            warehouse.cognition,
            warehouse.cognition.embedder,
            config.layer_params() if config else DEFAULT_LAYER_PARAMS,
        )
        if args.at:
            now = datetime.fromisoformat(args.at)
        else:
            stamps = [e.timestamp for lk in LAYER_ORDER
                      for e in warehouse.cognition.layer_events(args.agent, lk)]
            now = max(stamps) if stamps else datetime.combine(date.today(), time())
        ranked = engine.rank_layer(args.agent, layer, args.prompt, now)[:args.k]

    print(f"📋 {args.agent} {layer.value} layer at {now.isoformat()}: {len(ranked)} events")
    for line in format_rows(ranked):
        print(line)
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    run_dir = resolve_run_dir(args)
    name = f"report_{args.phase}.json" if args.phase else "report.json"
    path = run_dir / name
    if not path.exists():
        raise ConfigError(f"No report at {path}", {"path": str(path)})
    text = render_report(load_report(path), args.format)
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(text, encoding="utf-8")
        print(f"✅ Report written to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_export_debates(args: argparse.Namespace) -> int:
    run_dir = resolve_run_dir(args)
    warehouse = open_warehouse(run_dir, load_snapshot(run_dir))
    start = datetime.combine(args.date_from, time()) if args.date_from else None
    end = datetime.combine(args.date_to, time.max) if args.date_to else None
    with warehouse.exclusive():
        warehouse.init()
        count = export_transcripts(warehouse.cognition, args.out, start, end)
    print(f"✅ Exported {count} debate messages to {args.out}")
    return 0


def cmd_logs(args: argparse.Namespace) -> int:
    if args.limit < 1:
        raise ConfigError("--limit must be at least 1", {"limit": args.limit})
    log_manager = RunLogManager(resolve_run_dir(args))
    log_file = log_manager.log_file(args.phase)
    if not log_file.exists():
        raise ConfigError(f"No log at {log_file}", {"path": str(log_file)})

    entries = log_manager.get_recent_logs(args.phase, args.limit, args.level)
    print(f"📋 {args.phase} log: {len(entries)} records from {log_file}")
    for entry in reversed(entries):
        if entry["level"]:
            print(f"[{entry['timestamp']}] {entry['level']} {entry['logger']}: {entry['message']}")
        else:
            print(entry["message"])
    return 0


COMMANDS = {
    'ingest': cmd_ingest,
    'fixtures': cmd_fixtures,
    'train': lambda args: cmd_phase(args, Phase.TRAIN),
    'test': lambda args: cmd_phase(args, Phase.TEST),
    'query': cmd_query,
    'report': cmd_report,
    'export-debates': cmd_export_debates,
    'logs': cmd_logs,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Main CLI entry point"""
    parser = build_parser()
    # Usage errors exit 2 from argparse
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )

    if not args.command:
        parser.print_help()
        return 1

    try:
        return COMMANDS[args.command](args)
    except TradmemError as e:
        logger.error(f"Command failed: {e.category}: {e.message}")
        print(ErrorLine.from_error(e).to_line(), file=sys.stderr)
        return 1
    except Exception as e:
        logger.error(f"Command failed: {e}", exc_info=True)
        print(ErrorLine(error=str(e), code=type(e).__name__).to_line(), file=sys.stderr)
        return 1


if __name__ == '__main__':
    sys.exit(main())
