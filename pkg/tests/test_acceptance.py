"""Acceptance gate. One test per primary criterion; each records a PASS/FAIL
line that conftest prints in the terminal summary."""

import json
import random
import time
from contextlib import contextmanager
from dataclasses import replace

from conftest import CORPUS, family_dirs, family_entries, listing, manifest, open_family
from oracles import brute_force_proxy, brute_force_upgrade_lines
from upcscan import ir
from upcscan.chain import MockChainQuery
from upcscan.cli import main as cli_main
from upcscan.core import parse_address
from upcscan.datastore import Datastore, DecompileFailure, DecompileStatus
from upcscan.patterns import (
    ERC1822_LOGIC_SLOT, ERC1967_IMPLEMENTATION_SLOT, HashedSlotKind, Pattern, check_eternal, check_erc1822,
    check_hashed_slot, check_inherited, check_transparent, indicator_slot,
)
from upcscan.pipeline import analyze
from upcscan.proxy import ProxyConfig, detect_proxy
from upcscan.upgradeability import (
    Design, GlobalMemory, ImpactVariable, Rank, UpgradeEvidence, Via,
    upgrade_functions_for,
)

RESULTS: list[str] = []


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException as exc:
        line = f"FAIL  {name}: {type(exc).__name__}: {exc}".splitlines()[0]
        RESULTS.append(line)
        print(line)
        raise
    line = f"PASS  {name}"
    RESULTS.append(line)
    print(line)


def _outcome(result):
    upc = result.upc
    return (result.category,
            upc.design.value if upc is not None and upc.design is not None else None,
            result.label.value.value if result.label is not None else None,
            sorted(f.value for f in upc.memory.failure_flags) if upc is not None else [])


def test_fixture_corpus():
    with criterion("fixture corpus: 100% verdict/label agreement, >=18 families, < 10 s"):
        entries = manifest()
        families = {e["family"] for e in entries}
        assert len(families) >= 18
        start = time.perf_counter()
        store = Datastore.open_dir(CORPUS)
        chain = MockChainQuery.from_file(CORPUS / "loupe.jsonl")
        misses = []
        for e in entries:
            got = _outcome(analyze(parse_address(e["address"]), store, chain))
            want = (e["category"], e["design"], e["pattern"], sorted(e["flags"]))
            if got != want:
                misses.append((e["family"], got, want))
        elapsed = time.perf_counter() - start
        assert not misses, misses
        assert elapsed < 10, elapsed
        patterns = {e["pattern"] for e in entries}
        assert {"Transparent", "ERC1967", "UnstructuredStorage", "InheritedStorage", "EternalStorage",
                "ERC1822", "Diamond", "Beacon", "Registry"} <= patterns
        designs = {e["design"] for e in entries}
        assert {"SMUP", "ESUP_V1", "ESUP_V2", "DUP_V1", "DUP_V2", "DUP_V3"} <= designs
        assert {"forwarder", "adapter", "library-delegatecall", "proxy-cycle", "decompile-failure"} <= families


def test_listing_goldens():
    with criterion("listing goldens: Transparent, ERC1967 slot, Inherited, Eternal(6), ERC1822, listing8 SMUP x2"):
        l1 = ir.parse(listing("listing1"))
        [site] = ir.relevant_delegatecalls(l1)
        assert check_transparent(site, l1)
        assert site.target.decl.slot.hashed == "0x360894a13ba1a3210667c828492db98dca3e2076cc3735a920a3ca505d382bbc"
        assert site.target.decl.slot == ERC1967_IMPLEMENTATION_SLOT
        assert check_hashed_slot(site.target.decl.slot) is HashedSlotKind.ERC1967

        assert check_inherited(ir.parse(listing("listing2")), [ir.parse(listing("listing3"))])
        eternal_proxy = ir.parse(listing("listing4"))
        assert indicator_slot(eternal_proxy) == 6
        assert check_eternal(eternal_proxy, [ir.parse(listing("listing5"))])

        l6 = ir.parse(listing("listing6"))
        fn = l6.function("unknown912a9885")
        call = next(s for s in fn.body if isinstance(s, ir.ExternalCall))
        assert call.selector.value == "0x52d1902d"
        assert ERC1822_LOGIC_SLOT.hashed == "0xc5f16f0fcc639fa48a6947836d9850f504798523bf8c9a3a87d5876cf622bcf7"
        line = next(s.line for s in fn.body if isinstance(s, ir.Assignment))
        ev = UpgradeEvidence(fn.signature, line, parse_address("0x" + "42" * 20), Via.DUP, Design.DUP_V1, 0)
        assert check_erc1822(ev, l6, ERC1822_LOGIC_SLOT)

        store, chain = open_family("smup-basic")
        address = parse_address(family_entries("smup-basic")[0]["address"])
        assert store.sources[store.contract(address).bytecode.hash].text == listing("listing8")
        result = analyze(address, store, chain)
        assert result.upc.is_upc and result.upc.design is Design.SMUP
        assert len(result.upc.memory.evidence) == 2
        assert result.label.value is Pattern.ERC1967


def test_proxy_oracle_equivalence():
    with criterion("proxy detector == brute-force pair scan on every fixture trace file (0 discrepancies)"):
        discrepancies = []
        checked = 0
        for root in family_dirs():
            store = Datastore.open_dir(root)
            rows = [json.loads(x) for x in (root / "traces.jsonl").read_text().splitlines()]
            for text in sorted({r["to"] for r in rows} | {r["from"] for r in rows}):
                rec = store.contract(parse_address(text))
                for config in (ProxyConfig(), ProxyConfig(True, False), ProxyConfig(False, True)):
                    status = detect_proxy(parse_address(text), store, config)
                    impls, pairs = brute_force_proxy(root / "traces.jsonl", text, config.include_failed_traces,
                                                     config.strict_nonempty_selector)
                    if rec is None or rec.bytecode.is_empty:
                        impls, pairs = set(), set()
                    got = ({a.value for a in status.implementations},
                           {(p.tx_hash, p.parent_path, p.child_path) for p in status.pairs}, status.is_proxy)
                    if got != (impls, pairs, bool(pairs)):
                        discrepancies.append((root.name, text, config))
                    checked += 1
        assert checked > 50
        assert discrepancies == []


def test_upgrade_function_oracle_equivalence():
    with criterion("upgrade-function finder == brute-force assignment scan on every fixture contract (0 discrepancies)"):
        store = Datastore.open_dir(CORPUS)
        discrepancies, checked = [], 0
        for rec in store.contracts.values():
            try:
                contract = store.get_decompiled(rec.address)
            except DecompileFailure:
                continue
            text = store.sources[rec.bytecode.hash].text
            for decl in contract.storage:
                memory = GlobalMemory()
                upgrade_functions_for(contract, ImpactVariable(decl, Rank.PRIMARY, rec.address), memory)
                if {e.line for e in memory.evidence} != brute_force_upgrade_lines(text, {decl.name}):
                    discrepancies.append((rec.address.value, decl.name))
                checked += 1
        assert checked > 40
        assert discrepancies == []


def test_termination_and_flags():
    with criterion("termination & flags: proxy-cycle NonUPC, 'Failure: Decompiler', 'Failure: Delegate Not Found'"):
        for entry in family_entries("proxy-cycle"):
            store, chain = open_family("proxy-cycle")
            result = analyze(parse_address(entry["address"]), store, chain)
            assert result.proxy.is_proxy and not result.upc.is_upc
            assert any(k[0] == parse_address(entry["address"]) for k in result.upc.memory.visited)
        store, chain = open_family("decompile-failure")
        result = analyze(parse_address(family_entries("decompile-failure")[0]["address"]), store, chain)
        assert not result.upc.is_upc
        assert [f.value for f in result.upc.memory.failure_flags] == ["Failure: Decompiler"]
        store, chain = open_family("delegate-not-found")
        result = analyze(parse_address(family_entries("delegate-not-found")[0]["address"]), store, chain)
        assert not result.upc.is_upc
        assert [f.value for f in result.upc.memory.failure_flags] == ["Failure: Delegate Not Found"]


def _mutate(text: str, rng: random.Random) -> str:
    """Delete one assignment, or insert one assigning a storage variable from a parameter."""
    contract = ir.parse(text)
    lines = text.splitlines()
    assignments = [s for _, s in contract.statements() if isinstance(s, ir.Assignment)]
    if assignments and rng.random() < 0.5:
        victim = rng.choice(assignments)
        del lines[victim.line - 1]
    elif contract.functions and contract.storage:
        fn = rng.choice(contract.functions)
        decl = rng.choice(contract.storage)
        params = sorted(fn.param_names)
        rvalue = rng.choice(params) if params and rng.random() < 0.8 else "0x1234"
        lines.insert(fn.start_line, f"  {decl.name} = {rvalue}")
    return "\n".join(lines) + "\n"


def test_verdict_consistency_under_mutation():
    with criterion("verdict consistency: UPC <=> evidence non-empty over 100 seeded source mutations"):
        rng = random.Random(20240611)
        pool = [e for e in manifest() if e["category"] in ("UPC", "Proxy/NonUPC")]
        stores = {}
        flips = violations = done = 0
        while done < 100:
            entry = rng.choice(pool)
            name = entry["family"]
            if name not in stores:
                stores[name] = open_family(name)
            store, chain = stores[name]
            editable = [k for k, s in store.sources.items() if s.status is DecompileStatus.OK]
            if not editable:
                continue
            key = rng.choice(editable)
            try:
                mutated_text = _mutate(store.sources[key].text, rng)
            except ir.EmptyContract:
                continue
            sources = dict(store.sources)
            sources[key] = replace(sources[key], text=mutated_text)
            mutated = Datastore.from_records(list(store.all_traces()), list(store.contracts.values()),
                                             list(sources.values()))
            address = parse_address(entry["address"])
            before = analyze(address, store, chain)
            after = analyze(address, mutated, chain)
            if after.upc is not None:
                violations += after.upc.is_upc != bool(after.upc.memory.evidence)
                flips += before.upc.is_upc != after.upc.is_upc
            done += 1
        print(f"      {done} mutations, {flips} verdict flips, {violations} violations")
        assert violations == 0
        assert flips > 0


def test_determinism(tmp_path):
    with criterion("determinism: two --deterministic runs over the corpus are byte-identical"):
        addresses = [e["address"] for e in manifest()]
        blobs = []
        for i in range(2):
            out = tmp_path / f"run{i}.jsonl"
            assert cli_main(["detect", *addresses, "--store", str(CORPUS), "--out", str(out),
                             "--deterministic", "--jobs", str(1 + 3 * i)]) == 0
            blobs.append(out.read_bytes())
        assert blobs[0] == blobs[1]
        assert len(blobs[0].splitlines()) == len(addresses)
