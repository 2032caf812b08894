"""Command line front-end: ``upcscan ingest`` and ``upcscan detect``."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .chain import MockChainQuery, RpcChainQuery
from .core import InvalidAddress, parse_address
from .datastore import ConflictError, Datastore, IngestError
from .pipeline import analyze, summarize
from .proxy import ProxyConfig
from .upgradeability import DetectorConfig

EXIT_OK, EXIT_INPUT, EXIT_CONFLICT = 0, 2, 3
STORE_ENV = "UPC_SENTINEL_STORE"


def _add_source_flags(p: argparse.ArgumentParser):
    p.add_argument("--traces", type=Path)
    p.add_argument("--contracts", type=Path)
    p.add_argument("--decompiled", type=Path)
    p.add_argument("--loupe", type=Path, help="line-delimited {diamond, selector, facet} records")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="upcscan", description="Detect upgradeable proxy contracts.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    ing = sub.add_parser("ingest", help="load a corpus and print its counts")
    _add_source_flags(ing)
    ing.add_argument("--store-out", type=Path, help="write the merged store to this directory")

    det = sub.add_parser("detect", help="run the three layers over addresses")
    det.add_argument("addresses", nargs="*")
    det.add_argument("--input", type=Path, help="file with one address per line")
    det.add_argument("--out", type=Path, help="report file (stdout when omitted)")
    det.add_argument("--store", type=Path, help=f"store directory (default: ${STORE_ENV})")
    _add_source_flags(det)
    det.add_argument("--rpc-url", help="live node for loupe queries instead of --loupe")
    det.add_argument("--max-depth", type=int, default=3)
    det.add_argument("--include-failed-traces", action="store_true")
    det.add_argument("--strict-nonempty-selector", action="store_true")
    det.add_argument("--deterministic", action="store_true",
                     help="keep timings out of records; write them to <out>.timings.jsonl")
    det.add_argument("--summary-only", action="store_true")
    det.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    return parser


def _ingest_store(args) -> Datastore:
    store = Datastore()
    missing = [f for f in ("traces", "contracts", "decompiled") if getattr(args, f) is None]
    if missing:
        raise FileNotFoundError("missing --" + ", --".join(missing))
    store.ingest(args.traces, args.contracts, args.decompiled)
    return store


def _load_chain(args, store_dir: Path | None):
    if getattr(args, "rpc_url", None):
        return RpcChainQuery(args.rpc_url)
    if args.loupe is not None:
        return MockChainQuery.from_file(args.loupe)
    if store_dir is not None and (store_dir / "loupe.jsonl").exists():
        return MockChainQuery.from_file(store_dir / "loupe.jsonl")
    return MockChainQuery()


def cmd_ingest(args) -> int:
    store = _ingest_store(args)
    if args.store_out is not None:
        store.save(args.store_out)
        if args.loupe is not None:
            MockChainQuery.from_file(args.loupe).save(args.store_out / "loupe.jsonl")
    print(json.dumps(store.summary.as_dict(), sort_keys=True))
    return EXIT_OK


def _read_addresses(args) -> list[str]:
    items = list(args.addresses)
    if args.input is not None:
        with open(args.input, encoding="utf-8") as fh:
            items += [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    if not items:
        raise ValueError("no addresses given")
    return items


def _print_summary(summary: dict, stream):
    c = summary["counts"]
    print(f"{'NonProxy':<30}{c['NonProxy']:>6}", file=stream)
    print(f"{'Proxy/NonUPC':<30}{c['Proxy/NonUPC']:>6}", file=stream)
    print(f"{'UPC':<30}{c['UPC']:>6}", file=stream)
    if c["NotFound"]:
        print(f"{'NotFound':<30}{c['NotFound']:>6}", file=stream)
    for k, v in summary["upc_by_design"].items():
        print(f"  {'design ' + k:<28}{v:>6}", file=stream)
    for k, v in summary["upc_by_pattern"].items():
        print(f"  {'pattern ' + k:<28}{v:>6}", file=stream)


def cmd_detect(args) -> int:
    addresses = [parse_address(a) for a in _read_addresses(args)]
    store_dir = args.store or (Path(os.environ[STORE_ENV]) if os.environ.get(STORE_ENV) else None)
    if args.traces or args.contracts or args.decompiled:
        store = _ingest_store(args)
    elif store_dir is not None:
        store = Datastore.open_dir(store_dir)
    else:
        raise FileNotFoundError(f"no data: pass --store, set ${STORE_ENV}, or give the corpus files")
    chain = _load_chain(args, store_dir)
    config = DetectorConfig(max_depth=args.max_depth,
                            proxy=ProxyConfig(args.include_failed_traces, args.strict_nonempty_selector))

    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        results = list(pool.map(lambda a: analyze(a, store, chain, config), addresses))

    if not args.summary_only:
        lines = [json.dumps(r.record(with_timings=not args.deterministic), sort_keys=True) for r in results]
        if args.out is not None:
            args.out.write_text("".join(ln + "\n" for ln in lines), encoding="utf-8")
        else:
            for ln in lines:
                print(ln)
        if args.deterministic and args.out is not None:
            sidecar = args.out.with_name(args.out.name + ".timings.jsonl")
            with open(sidecar, "w", encoding="utf-8") as fh:
                for r in results:
                    fh.write(json.dumps({"address": r.address.value, "timings": r.timings}) + "\n")
    _print_summary(summarize(results), sys.stderr if args.out is None and not args.summary_only else sys.stdout)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return cmd_ingest(args) if args.command == "ingest" else cmd_detect(args)
    except ConflictError as exc:
        print(f"conflict: {exc}", file=sys.stderr)
        return EXIT_CONFLICT
    except (FileNotFoundError, IngestError, InvalidAddress, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
