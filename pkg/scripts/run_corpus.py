"""Run every manifest address of a fixture store through the pipeline and
compare verdicts and labels with the manifest.

    python3 scripts/run_corpus.py [--store tests/fixtures/corpus]
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

from upcscan.chain import MockChainQuery
from upcscan.core import parse_address
from upcscan.datastore import Datastore
from upcscan.pipeline import analyze

DEFAULT_STORE = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "corpus"


def outcome(result) -> dict:
    upc = result.upc
    return {
        "category": result.category,
        "design": upc.design.value if upc is not None and upc.design is not None else None,
        "pattern": result.label.value.value if result.label is not None else None,
        "flags": sorted(f.value for f in upc.memory.failure_flags) if upc is not None else [],
    }


def run(store_dir: Path) -> tuple[list[tuple[dict, dict]], float]:
    start = time.perf_counter()
    store = Datastore.open_dir(store_dir)
    loupe = store_dir / "loupe.jsonl"
    chain = MockChainQuery.from_file(loupe) if loupe.exists() else MockChainQuery()
    rows = []
    for entry in json.loads((store_dir / "manifest.json").read_text(encoding="utf-8")):
        got = outcome(analyze(parse_address(entry["address"]), store, chain))
        rows.append((entry, got))
    return rows, time.perf_counter() - start


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="check the fixture corpus against its manifest")
    parser.add_argument("--store", type=Path, default=DEFAULT_STORE)
    args = parser.parse_args(argv)
    rows, elapsed = run(args.store)
    misses = 0
    for entry, got in rows:
        want = {k: entry[k] for k in ("category", "design", "pattern")} | {"flags": sorted(entry["flags"])}
        ok = got == want
        misses += not ok
        print(f"{'ok ' if ok else 'BAD'} {entry['family']:<24} {entry['address']}  {got['category']:<13}"
              f" {got['design'] or '-':<8} {got['pattern'] or '-'}")
        if not ok:
            print(f"    expected {want}")
    print(f"{len(rows) - misses}/{len(rows)} agree, {elapsed:.3f}s")
    return 1 if misses else 0


if __name__ == "__main__":
    sys.exit(main())
