"""Command line entry point.

One executable, one subcommand per stage: mock-serve, crawl, process,
analyze, prune, gateway, ledger, plus pipeline to run the four data
stages end to end against an in-process mock server under a virtual
clock. Usage errors exit 2 (argparse), runtime failures print a
diagnostic and exit 1.
"""

from __future__ import annotations

import argparse
import logging
import os
import random
import re
import sys
import time

from . import __version__
from .analyzer import BUILTIN_SPECS, analyze, load_regex_specs, read_rows_csv, write_csv, write_rows
from .clock import SystemClock, VirtualClock
from .crawler import CrawlConfig, run_crawl
from .firehose import (
    DEFAULT_APP_KEY,
    DEFAULT_APP_SECRET,
    Credentials,
    FirehoseEngine,
    MockFirehoseServer,
    TweetFactory,
)
from .gateway import CategoryRules, PrivacyGateway, ServiceRegistry, Vault
from .ledger import ComplianceLedger
from .processor import (
    Gazetteer,
    default_gazetteer,
    find_crawl_files,
    load_gazetteer,
    process_file,
    read_processed_file,
)
from .pruner import DEFAULT_LIMIT, ORDERS, PruneConfig, prune

log = logging.getLogger(__name__)

_DURATION_RE = re.compile(r"(\d+)\s*(ms|s|m|h|d)?")
_DURATION_UNITS = {"ms": 1, "s": 1000, "m": 60_000, "h": 3_600_000, "d": 86_400_000}


def parse_duration_ms(text: str) -> int:
    """'500ms', '2s', '15m', '70h', '8d' or a bare millisecond count."""
    m = _DURATION_RE.fullmatch(text.strip())
    if m is None:
        raise ValueError(f"cannot parse duration: {text!r}")
    return int(m.group(1)) * _DURATION_UNITS[m.group(2) or "ms"]


def parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected true or false, got {text!r}")


def _make_clock(args):
    if args.virtual_clock is not None:
        return VirtualClock(start_ms=args.virtual_clock)
    return SystemClock()


def _seed(args) -> int:
    return args.seed if args.seed is not None else 0


def cmd_mock_serve(args) -> int:
    engine = FirehoseEngine(
        seed=_seed(args),
        duplicate_mode=args.duplicate_mode,
        duplicate_window_ms=args.duplicate_window_ms,
        factory=TweetFactory(
            seed=_seed(args),
            empty_location_rate=args.empty_location_rate,
            und_lang_rate=args.und_lang_rate,
            retweet_rate=args.retweet_rate,
        ),
    )
    server = MockFirehoseServer(engine, port=args.port)
    server.start()
    print(f"serving mock search api at {server.url}", flush=True)
    try:
        while True:
            time.sleep(1)
    except KeyboardInterrupt:
        pass
    finally:
        server.stop()
    return 0


def cmd_crawl(args) -> int:
    cfg = CrawlConfig(
        endpoint=args.endpoint,
        creds=Credentials(app_key=args.key, app_secret=args.secret),
        interval_ms=args.interval_ms,
        use_next=args.use_next,
        page_count=args.count,
        duration_ms=parse_duration_ms(args.duration) if args.duration else None,
        max_requests=args.max_requests,
        out_dir=args.out or args.data_dir,
    )
    stats = run_crawl(cfg, _make_clock(args))
    for key, value in vars(stats).items():
        print(f"{key}={value}")
    return 0


def _load_gazetteer_arg(args) -> Gazetteer:
    if args.gazetteer:
        return Gazetteer(load_gazetteer(args.gazetteer))
    return default_gazetteer()


def cmd_process(args) -> int:
    gazetteer = _load_gazetteer_arg(args)
    in_dir = args.in_dir or args.data_dir
    out_dir = args.out or args.data_dir
    files = find_crawl_files(in_dir)
    total_records = 0
    total_skipped = 0
    for path in files:
        records, skipped = process_file(path, gazetteer, out_root=out_dir)
        total_records += len(records)
        total_skipped += skipped
    print(f"files={len(files)}")
    print(f"records={total_records}")
    print(f"skipped={total_skipped}")
    return 0


def cmd_analyze(args) -> int:
    specs = list(BUILTIN_SPECS)
    if args.regex:
        specs.extend(load_regex_specs(args.regex))
    records = []
    for path in args.in_files:
        records.extend(read_processed_file(path))
    out_dir = args.out or os.path.join(args.data_dir, "analysis")
    results = analyze(records, specs)
    for name, rows in results.items():
        path = write_csv(name, rows, out_dir)
        print(f"{name}: {len(rows)} keys -> {path}")
    return 0


def cmd_prune(args) -> int:
    rows = read_rows_csv(args.in_file)
    pruned = prune(rows, PruneConfig(limit=args.limit, order=args.order))
    write_rows(args.out_file, pruned)
    print(f"{len(rows)} -> {len(pruned)} rows -> {args.out_file}")
    return 0


def cmd_gateway(args) -> int:
    records = read_processed_file(args.in_file)
    rules = CategoryRules.load(args.rules) if args.rules else CategoryRules.default()
    out_dir = args.out or args.data_dir
    registry = ServiceRegistry.load(args.registry, base_dir=out_dir)
    clock = _make_clock(args)
    rng = random.Random(args.seed) if args.seed is not None else None
    vault_path = args.vault or os.path.join(args.data_dir, "vault.jsonl")
    ledger_path = args.ledger or os.path.join(args.data_dir, "ledger.jsonl")
    dispatched = 0
    with Vault(vault_path, rng=rng, clock=clock) as vault:
        with ComplianceLedger(ledger_path, clock=clock, fsync=not args.no_fsync) as ledger:
            gw = PrivacyGateway(
                vault, ledger, rules=rules, retention_days=args.retention_days
            )
            for record in records:
                for bundle in gw.pseudonymize(record):
                    gw.dispatch(bundle, registry)
                    dispatched += 1
    print(f"records={len(records)}")
    print(f"bundles_dispatched={dispatched}")
    print(f"vault={vault_path}")
    print(f"ledger={ledger_path}")
    return 0


def cmd_ledger(args) -> int:
    path = args.ledger or os.path.join(args.data_dir, "ledger.jsonl")
    with ComplianceLedger(path, clock=_make_clock(args)) as ledger:
        if args.ledger_cmd == "report":
            print(ledger.transparency_report(args.code), end="")
        else:
            codes = [c.strip() for c in args.codes.split(",") if c.strip()]
            seqs = ledger.record_breach(codes)
            print(f"breach_notices={len(seqs)}")
            print(f"seqs={','.join(str(s) for s in seqs)}")
    return 0


def cmd_pipeline(args) -> int:
    seed = _seed(args)
    start_ms = args.virtual_clock if args.virtual_clock is not None else 0
    clock = VirtualClock(start_ms=start_ms)
    engine = FirehoseEngine(seed=seed)
    with MockFirehoseServer(engine) as server:
        cfg = CrawlConfig(
            endpoint=server.url,
            interval_ms=args.interval_ms,
            use_next=True,
            duration_ms=parse_duration_ms(args.duration),
            out_dir=args.data_dir,
        )
        stats = run_crawl(cfg, clock)
    print(f"crawl: {stats.requests} requests, {stats.tweets_kept} records kept")

    gazetteer = _load_gazetteer_arg(args)
    records = []
    crawl_files = find_crawl_files(args.data_dir)
    for path in crawl_files:
        file_records, _skipped = process_file(path, gazetteer, out_root=args.data_dir)
        records.extend(file_records)
    print(f"process: {len(crawl_files)} files, {len(records)} records")

    specs = list(BUILTIN_SPECS)
    if args.regex:
        specs.extend(load_regex_specs(args.regex))
    analysis_dir = os.path.join(args.data_dir, "analysis")
    pruned_dir = os.path.join(args.data_dir, "pruned")
    results = analyze(records, specs)
    cfg_prune = PruneConfig(limit=args.limit)
    for name, rows in results.items():
        write_csv(name, rows, analysis_dir)
        write_csv(name, prune(rows, cfg_prune), pruned_dir)
    print(f"analyze: {len(results)} analyses -> {analysis_dir}")
    print(f"prune: limit {args.limit} -> {pruned_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tweetpipe",
        description="Crawl, process, analyze and prune tweet data against a mock "
                    "search API, with a pseudonymizing gateway and audit ledger.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--data-dir", default="./data", help="root for data files (default ./data)")
    parser.add_argument("--seed", type=int, default=None, help="deterministic seed")
    parser.add_argument(
        "--virtual-clock", type=int, default=None, metavar="START_MS",
        help="run on a virtual clock starting at START_MS instead of real time",
    )
    parser.add_argument("--verbose", action="store_true", help="log at INFO level")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mock-serve", help="serve the deterministic mock search API")
    p.add_argument("--port", type=int, default=0, help="port to bind (default: ephemeral)")
    p.add_argument("--empty-location-rate", type=float, default=0.15)
    p.add_argument("--und-lang-rate", type=float, default=0.08)
    p.add_argument("--retweet-rate", type=float, default=0.30)
    p.add_argument("--duplicate-mode", action="store_true",
                   help="re-serve recent tweets on fast cursorless polls")
    p.add_argument("--duplicate-window-ms", type=int, default=1000)
    p.set_defaults(func=cmd_mock_serve)

    p = sub.add_parser("crawl", help="run the rate-limited crawl loop")
    p.add_argument("--endpoint", required=True, help="base URL of the search API")
    p.add_argument("--key", default=DEFAULT_APP_KEY)
    p.add_argument("--secret", default=DEFAULT_APP_SECRET)
    p.add_argument("--interval-ms", type=int, default=2000)
    p.add_argument("--use-next", type=parse_bool, default=True, metavar="BOOL",
                   help="follow pagination tokens (default true)")
    p.add_argument("--count", type=int, default=100, help="tweets per request (max 100)")
    p.add_argument("--duration", default=None, help="crawl length, e.g. 500ms, 2s, 15m, 70h, 8d")
    p.add_argument("--max-requests", type=int, default=None)
    p.add_argument("--out", default=None, help="output root (default: --data-dir)")
    p.set_defaults(func=cmd_crawl)

    p = sub.add_parser("process", help="decode crawl files and detect locations")
    p.add_argument("--in", dest="in_dir", default=None, help="crawl tree root (default: --data-dir)")
    p.add_argument("--out", default=None, help="output root (default: --data-dir)")
    p.add_argument("--gazetteer", default=None, help="gazetteer CSV (default: bundled fixture)")
    p.set_defaults(func=cmd_process)

    p = sub.add_parser("analyze", help="run builtin and regex analyses to CSV")
    p.add_argument("--in", dest="in_files", nargs="+", required=True,
                   metavar="FILE.json", help="processed JSON files")
    p.add_argument("--out", default=None, help="CSV directory (default: <data-dir>/analysis)")
    p.add_argument("-regex", dest="regex", default=None, metavar="FILE",
                   help="file of 'name: pattern' analyses")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("prune", help="sort an analysis CSV and keep the top entries")
    p.add_argument("--in", dest="in_file", required=True, metavar="FILE.csv")
    p.add_argument("--out", dest="out_file", required=True, metavar="FILE.csv")
    p.add_argument("--limit", type=int, default=DEFAULT_LIMIT)
    p.add_argument("--order", choices=ORDERS, default="count_desc")
    p.set_defaults(func=cmd_prune)

    p = sub.add_parser("gateway", help="pseudonymize records and dispatch category bundles")
    p.add_argument("--in", dest="in_file", required=True, metavar="FILE.json")
    p.add_argument("--rules", default=None, help="category keyword rules (default: bundled)")
    p.add_argument("--registry", required=True, help="'category: sink' registry file")
    p.add_argument("--out", default=None, help="base dir for directory sinks (default: --data-dir)")
    p.add_argument("--vault", default=None, help="vault file (default: <data-dir>/vault.jsonl)")
    p.add_argument("--ledger", default=None, help="ledger file (default: <data-dir>/ledger.jsonl)")
    p.add_argument("--retention-days", type=int, default=30)
    p.add_argument("--no-fsync", action="store_true",
                   help="skip the per-entry ledger fsync (much faster for bulk feeds, "
                        "at the cost of durability on power loss)")
    p.set_defaults(func=cmd_gateway)

    p = sub.add_parser("ledger", help="query or append to the compliance ledger")
    p.add_argument("--ledger", default=None, help="ledger file (default: <data-dir>/ledger.jsonl)")
    ledger_sub = p.add_subparsers(dest="ledger_cmd", required=True)
    lp = ledger_sub.add_parser("report", help="print a transparency report for one code")
    lp.add_argument("--code", required=True)
    lp.set_defaults(func=cmd_ledger)
    lp = ledger_sub.add_parser("breach", help="record breach notices for affected codes")
    lp.add_argument("--codes", required=True, help="comma-separated pseudonym codes")
    lp.set_defaults(func=cmd_ledger)

    p = sub.add_parser("pipeline", help="crawl, process, analyze and prune against an "
                                        "in-process mock under a virtual clock")
    p.add_argument("--duration", default="15m", help="virtual crawl length (default 15m)")
    p.add_argument("--interval-ms", type=int, default=2000)
    p.add_argument("--limit", type=int, default=DEFAULT_LIMIT, help="prune limit")
    p.add_argument("--gazetteer", default=None)
    p.add_argument("-regex", dest="regex", default=None, metavar="FILE")
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except KeyboardInterrupt:
        return 130
    except Exception as exc:  # CLI boundary: any module error exits 1 with a diagnostic
        print(f"error: {exc}", file=sys.stderr)
        log.debug("unhandled error", exc_info=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
