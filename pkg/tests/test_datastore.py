import json
import shutil

import pytest

from conftest import CORPUS, FAMILIES, family_entries
from upcscan.core import Bytecode, parse_address
from upcscan.datastore import (
    CallType, ConflictError, ContractNotFound, ContractRecord, Datastore, DecompileFailure,
    DecompileStatus, DecompiledSourceRecord, IngestError, TraceRecord,
)


def _copy(tmp_path, name="smup-basic"):
    dst = tmp_path / name
    shutil.copytree(FAMILIES / name, dst)
    return dst


def test_smup_basic_counts():
    store = Datastore()
    root = FAMILIES / "smup-basic"
    summary = store.ingest(root / "traces.jsonl", root / "contracts.jsonl", root / "decompiled")
    assert summary.as_dict() == {"traces": 3, "contracts": 2, "decompiled": 2}


def test_empty_trace_file(tmp_path):
    root = _copy(tmp_path)
    (root / "traces.jsonl").write_text("")
    assert Datastore.open_dir(root).summary.traces == 0


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        Datastore.open(tmp_path / "nope.jsonl", tmp_path / "nope2.jsonl", tmp_path)


def test_malformed_line_reports_line_number(tmp_path):
    root = _copy(tmp_path)
    with open(root / "traces.jsonl", "a") as fh:
        fh.write("{not json\n")
    with pytest.raises(IngestError) as info:
        Datastore.open_dir(root)
    assert info.value.line == 4


def test_bad_field_is_ingest_error(tmp_path):
    root = _copy(tmp_path)
    row = json.loads((root / "traces.jsonl").read_text().splitlines()[0])
    row["trace_path"] = [5, 0]
    with open(root / "traces.jsonl", "a") as fh:
        fh.write(json.dumps(row) + "\n")
    with pytest.raises(IngestError):
        Datastore.open_dir(root)


def test_conflicting_bytecode(tmp_path):
    root = _copy(tmp_path)
    row = json.loads((root / "contracts.jsonl").read_text().splitlines()[0])
    row["bytecode"] = "0x6001"
    with open(root / "contracts.jsonl", "a") as fh:
        fh.write(json.dumps(row) + "\n")
    with pytest.raises(ConflictError):
        Datastore.open_dir(root)


def test_clone_parsed_once():
    code = Bytecode("0x60016002")
    src = DecompiledSourceRecord(code.hash, "def storage:\n  x is addr at storage 0\n", DecompileStatus.OK)
    a, b = parse_address("0x" + "11" * 20), parse_address("0x" + "22" * 20)
    store = Datastore.from_records(contracts=[ContractRecord(a, code, 0), ContractRecord(b, code, 0)],
                                   sources=[src])
    assert store.get_decompiled(a) is store.get_decompiled(b)
    assert store.parse_count == 1


def test_decompile_failures(corpus_store):
    failed = parse_address(family_entries("decompile-failure")[0]["address"])
    with pytest.raises(DecompileFailure):
        corpus_store.get_decompiled(failed)
    with pytest.raises(ContractNotFound):
        corpus_store.get_decompiled(parse_address("0x" + "99" * 20))
    empty = parse_address(family_entries("empty-bytecode")[0]["address"])
    with pytest.raises(DecompileFailure):
        corpus_store.get_decompiled(empty)


def test_external_calls_to(corpus_store):
    proxy = parse_address(family_entries("multi-impl")[0]["address"])
    rows = list(corpus_store.external_calls_to(proxy))
    assert len(rows) == 4  # three delegations plus one reverted call
    assert all(rec.to == proxy for _, rec in rows)
    assert [r.block_number for _, r in rows] == sorted(r.block_number for _, r in rows)
    assert list(corpus_store.external_calls_to(parse_address("0x" + "e0a1" * 10))) == []


def test_children_of_esup_order(corpus_store):
    proxy = parse_address(family_entries("beacon")[0]["address"])
    tx, root = next(corpus_store.external_calls_to(proxy))
    kids = corpus_store.children_of(tx, root.trace_path)
    assert [k.call_type for k in kids] == [CallType.STATICCALL, CallType.DELEGATECALL]
    assert corpus_store.children_of(tx, kids[0].trace_path) == []


def test_save_round_trip(tmp_path, corpus_store):
    corpus_store.save(tmp_path / "copy")
    again = Datastore.open_dir(tmp_path / "copy")
    assert again.summary == corpus_store.summary


def test_trace_record_json_round_trip():
    line = (CORPUS / "traces.jsonl").read_text().splitlines()[0]
    obj = json.loads(line)
    assert TraceRecord.from_json(obj).to_json() == obj
