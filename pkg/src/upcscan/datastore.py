"""Local stores for traces, contract bytecode and decompiled sources.

File layout (all line-delimited JSON unless noted)::

    traces.jsonl      {tx_hash, trace_path, from, to, call_type, input, output, status, block_number}
    contracts.jsonl   {address, bytecode, created_at}
    decompiled/       <bytecode_hash>.pan (text) or <bytecode_hash>.failed (empty marker)
"""

from __future__ import annotations

import enum
import json
import logging
import threading
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

from . import ir
from .core import Address, Bytecode, InvalidAddress, parse_address, strip_0x

log = logging.getLogger(__name__)


class IngestError(ValueError):
    def __init__(self, message: str, path=None, line: int | None = None):
        where = f"{path}:{line}: " if line is not None else (f"{path}: " if path else "")
        super().__init__(where + message)
        self.path = path
        self.line = line


class ConflictError(ValueError):
    pass


class ContractNotFound(LookupError):
    pass


class DecompileFailure(RuntimeError):
    pass


class CallType(enum.Enum):
    CALL = "CALL"
    DELEGATECALL = "DELEGATECALL"
    STATICCALL = "STATICCALL"
    CALLCODE = "CALLCODE"
    CREATE = "CREATE"


class DecompileStatus(enum.Enum):
    OK = "OK"
    DECOMPILE_FAILED = "DECOMPILE_FAILED"


@dataclass(frozen=True)
class TraceRecord:
    tx_hash: str
    trace_path: tuple[int, ...]
    from_: Address
    to: Address
    call_type: CallType
    input: str
    output: str
    status: bool
    block_number: int

    @classmethod
    def from_json(cls, obj: dict) -> "TraceRecord":
        path = obj["trace_path"]
        if not isinstance(path, list) or not all(isinstance(i, int) and i >= 0 for i in path):
            raise ValueError("trace_path must be a list of non-negative integers")
        block = obj["block_number"]
        if not isinstance(block, int) or block < 0:
            raise ValueError("block_number must be a non-negative integer")
        status = obj["status"]
        if not isinstance(status, bool):
            status = bool(int(status))
        return cls(
            tx_hash=_hash32(obj["tx_hash"]),
            trace_path=tuple(path),
            from_=parse_address(obj["from"]),
            to=parse_address(obj["to"]),
            call_type=CallType(str(obj["call_type"]).upper()),
            input=_hexdata(obj["input"]),
            output=_hexdata(obj["output"]),
            status=status,
            block_number=block,
        )

    def to_json(self) -> dict:
        return {
            "tx_hash": self.tx_hash,
            "trace_path": list(self.trace_path),
            "from": self.from_.value,
            "to": self.to.value,
            "call_type": self.call_type.value,
            "input": self.input,
            "output": self.output,
            "status": self.status,
            "block_number": self.block_number,
        }

    @property
    def parent_path(self) -> tuple[int, ...] | None:
        return self.trace_path[:-1] if self.trace_path else None


@dataclass(frozen=True)
class ContractRecord:
    address: Address
    bytecode: Bytecode
    created_at: int


@dataclass(frozen=True)
class DecompiledSourceRecord:
    bytecode_hash: str
    text: str
    status: DecompileStatus


@dataclass(frozen=True)
class IngestSummary:
    traces: int = 0
    contracts: int = 0
    decompiled: int = 0

    def as_dict(self) -> dict:
        return {"traces": self.traces, "contracts": self.contracts, "decompiled": self.decompiled}


def _hash32(text: str) -> str:
    body = strip_0x(str(text)).lower()
    if len(body) != 64 or any(c not in "0123456789abcdef" for c in body):
        raise ValueError(f"expected a 32-byte hex value: {text!r}")
    return "0x" + body


def _hexdata(text) -> str:
    body = strip_0x(str(text or "")).lower()
    if any(c not in "0123456789abcdef" for c in body):
        raise ValueError(f"not hex data: {text!r}")
    return "0x" + body


def _read_jsonl(path: Path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise IngestError(f"malformed JSON ({exc.msg})", path, lineno) from None


class Datastore:
    """In-memory indexes over the three corpora.

    Written once by :meth:`ingest` (or :meth:`from_records`), read-only after.
    Parsed decompiled sources are memoized per bytecode hash, so clones that
    share bytecode are parsed once.
    """

    def __init__(self):
        self._traces: list[TraceRecord] = []
        self._tx_order: dict[str, tuple[int, int]] = {}
        self._by_tx: dict[str, dict[tuple[int, ...], TraceRecord]] = defaultdict(dict)
        self._children: dict[tuple[str, tuple[int, ...]], list[TraceRecord]] = defaultdict(list)
        self._by_to: dict[Address, list[TraceRecord]] = defaultdict(list)
        self.contracts: dict[Address, ContractRecord] = {}
        self.sources: dict[str, DecompiledSourceRecord] = {}
        self._parsed: dict[str, ir.DecompiledContract | Exception] = {}
        self._lock = threading.Lock()
        self.parse_count = 0

    # -- ingest --------------------------------------------------------------

    @classmethod
    def open(cls, traces_path, contracts_path, decompiled_dir) -> "Datastore":
        store = cls()
        store.ingest(traces_path, contracts_path, decompiled_dir)
        return store

    @classmethod
    def open_dir(cls, root) -> "Datastore":
        root = Path(root)
        return cls.open(root / "traces.jsonl", root / "contracts.jsonl", root / "decompiled")

    @classmethod
    def from_records(cls, traces=(), contracts=(), sources=()) -> "Datastore":
        """Build a store directly from records (tests, generated corpora)."""
        store = cls()
        for rec in contracts:
            store._add_contract(rec)
        for rec in sources:
            store.sources[rec.bytecode_hash] = rec
        for rec in traces:
            store._add_trace(rec)
        store._finish()
        return store

    def ingest(self, traces_path, contracts_path, decompiled_dir) -> IngestSummary:
        traces_path, contracts_path, decompiled_dir = map(Path, (traces_path, contracts_path, decompiled_dir))
        for p in (traces_path, contracts_path):
            if not p.is_file():
                raise FileNotFoundError(p)
        if not decompiled_dir.is_dir():
            raise FileNotFoundError(decompiled_dir)

        for lineno, obj in _read_jsonl(contracts_path):
            try:
                rec = ContractRecord(
                    address=parse_address(obj["address"]),
                    bytecode=Bytecode(obj.get("bytecode") or "0x"),
                    created_at=int(obj.get("created_at", 0)),
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise IngestError(f"bad contract record: {exc}", contracts_path, lineno) from None
            self._add_contract(rec)

        for f in sorted(decompiled_dir.iterdir()):
            if f.suffix not in (".pan", ".failed"):
                continue
            try:
                key = _hash32(f.stem)
            except ValueError:
                raise IngestError(f"decompiled file name is not a bytecode hash: {f.name}") from None
            if f.suffix == ".pan":
                rec = DecompiledSourceRecord(key, f.read_text(encoding="utf-8"), DecompileStatus.OK)
            else:
                rec = DecompiledSourceRecord(key, "", DecompileStatus.DECOMPILE_FAILED)
            if key in self.sources and self.sources[key].status is DecompileStatus.OK:
                continue  # a real source wins over a failure marker
            self.sources[key] = rec

        n_traces = 0
        for lineno, obj in _read_jsonl(traces_path):
            try:
                rec = TraceRecord.from_json(obj)
            except (KeyError, TypeError, ValueError, InvalidAddress) as exc:
                raise IngestError(f"bad trace record: {exc}", traces_path, lineno) from None
            try:
                self._add_trace(rec)
            except IngestError as exc:
                raise IngestError(str(exc), traces_path, lineno) from None
            n_traces += 1
        self._finish()
        summary = IngestSummary(n_traces, len(self.contracts), len(self.sources))
        log.info("ingested %s", summary)
        return summary

    def _add_contract(self, rec: ContractRecord):
        known = self.contracts.get(rec.address)
        if known is not None and known.bytecode.hex != rec.bytecode.hex:
            raise ConflictError(f"{rec.address} listed twice with different bytecode")
        self.contracts[rec.address] = rec

    def _add_trace(self, rec: TraceRecord):
        tx = self._by_tx[rec.tx_hash]
        if rec.trace_path in tx:
            raise IngestError(f"duplicate trace path {list(rec.trace_path)} in {rec.tx_hash}")
        if rec.tx_hash not in self._tx_order:
            self._tx_order[rec.tx_hash] = (rec.block_number, len(self._tx_order))
        tx[rec.trace_path] = rec
        self._traces.append(rec)

    def _finish(self):
        self._children.clear()
        self._by_to.clear()
        for tx_hash, tx in self._by_tx.items():
            for path, rec in tx.items():
                if path:
                    if path[:-1] not in tx:
                        raise IngestError(f"trace {list(path)} in {tx_hash} has no parent trace")
                    self._children[(tx_hash, path[:-1])].append(rec)
                self._by_to[rec.to].append(rec)
        for recs in self._children.values():
            recs.sort(key=lambda r: r.trace_path)
        for recs in self._by_to.values():
            recs.sort(key=lambda r: (self._tx_order[r.tx_hash], r.trace_path))

    @property
    def summary(self) -> IngestSummary:
        return IngestSummary(len(self._traces), len(self.contracts), len(self.sources))

    # -- queries -------------------------------------------------------------

    def contract(self, address: Address) -> ContractRecord | None:
        return self.contracts.get(address)

    def all_traces(self):
        return iter(self._traces)

    def external_calls_to(self, address: Address):
        """Every trace addressed to ``address``, grouped by transaction, in path order."""
        for rec in self._by_to.get(address, ()):
            yield rec.tx_hash, rec

    def children_of(self, tx_hash: str, trace_path) -> list[TraceRecord]:
        return list(self._children.get((tx_hash, tuple(trace_path)), ()))

    def trace(self, tx_hash: str, trace_path) -> TraceRecord | None:
        return self._by_tx.get(tx_hash, {}).get(tuple(trace_path))

    def get_decompiled(self, address: Address) -> ir.DecompiledContract:
        """Parsed decompiled source for ``address``.

        Raises :class:`ContractNotFound` for unknown addresses and
        :class:`DecompileFailure` when no usable source exists.
        """
        rec = self.contracts.get(address)
        if rec is None:
            raise ContractNotFound(str(address))
        key = rec.bytecode.hash
        cached = self._parsed.get(key)
        if cached is None:
            with self._lock:
                cached = self._parsed.get(key)
                if cached is None:
                    cached = self._parse(rec)
                    self._parsed[key] = cached
        if isinstance(cached, Exception):
            raise DecompileFailure(str(cached))
        return cached

    def _parse(self, rec: ContractRecord):
        src = self.sources.get(rec.bytecode.hash)
        if rec.bytecode.is_empty:
            return DecompileFailure(f"{rec.address} has no bytecode")
        if src is None or src.status is DecompileStatus.DECOMPILE_FAILED:
            return DecompileFailure(f"no decompiled source for {rec.address}")
        self.parse_count += 1
        try:
            return ir.parse(src.text)
        except ir.EmptyContract as exc:
            return DecompileFailure(f"{rec.address}: {exc}")

    # -- persistence ---------------------------------------------------------

    def save(self, root) -> None:
        """Write the store as a directory readable by :meth:`open_dir`."""
        root = Path(root)
        (root / "decompiled").mkdir(parents=True, exist_ok=True)
        with open(root / "traces.jsonl", "w", encoding="utf-8") as fh:
            for rec in self._traces:
                fh.write(json.dumps(rec.to_json()) + "\n")
        with open(root / "contracts.jsonl", "w", encoding="utf-8") as fh:
            for rec in self.contracts.values():
                fh.write(json.dumps({"address": rec.address.value, "bytecode": rec.bytecode.hex,
                                     "created_at": rec.created_at}) + "\n")
        for key, src in self.sources.items():
            if src.status is DecompileStatus.OK:
                (root / "decompiled" / f"{key}.pan").write_text(src.text, encoding="utf-8")
            else:
                (root / "decompiled" / f"{key}.failed").write_text("", encoding="utf-8")
