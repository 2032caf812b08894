"""Layer 1: decide from traces whether a contract is an active proxy."""

from __future__ import annotations

from dataclasses import dataclass

from .core import Address
from .datastore import CallType, Datastore, TraceRecord


@dataclass(frozen=True)
class ProxyConfig:
    include_failed_traces: bool = False
    strict_nonempty_selector: bool = False


@dataclass(frozen=True)
class DelegationPair:
    tx_hash: str
    parent_path: tuple[int, ...]
    child_path: tuple[int, ...]
    implementation: Address


@dataclass(frozen=True)
class ProxyStatus:
    address: Address
    is_proxy: bool
    implementations: frozenset[Address] = frozenset()
    pairs: tuple[DelegationPair, ...] = ()
    note: str | None = None
    found: bool = True

    @property
    def witness(self) -> tuple[str, tuple[int, ...], tuple[int, ...]] | None:
        if not self.pairs:
            return None
        p = self.pairs[0]
        return p.tx_hash, p.parent_path, p.child_path

    def ordered_implementations(self) -> list[Address]:
        """Implementations in first-delegation order."""
        seen: dict[Address, None] = {}
        for p in self.pairs:
            seen.setdefault(p.implementation, None)
        return list(seen)


def selectors_match(parent_input: str, child_input: str, strict_nonempty: bool = False) -> bool:
    """Property #2 on calldata: same leading 4 bytes, or both calls empty."""
    a, b = parent_input[2:], child_input[2:]
    if not a and not b:
        return not strict_nonempty
    if not a or not b:
        return False
    return a[:8] == b[:8]


def is_delegation(parent: TraceRecord, child: TraceRecord, address: Address,
                  config: ProxyConfig = ProxyConfig()) -> bool:
    if child.call_type is not CallType.DELEGATECALL or child.from_ != address:
        return False
    if not config.include_failed_traces and not (parent.status and child.status):
        return False
    return selectors_match(parent.input, child.input, config.strict_nonempty_selector)


def detect_proxy(address: Address, store: Datastore, config: ProxyConfig = ProxyConfig()) -> ProxyStatus:
    rec = store.contract(address)
    if rec is None:
        return ProxyStatus(address, False, note="NotFound: no bytecode record", found=False)
    if rec.bytecode.is_empty:
        return ProxyStatus(address, False, note="empty bytecode")
    pairs = []
    for tx_hash, parent in store.external_calls_to(address):
        if not config.include_failed_traces and not parent.status:
            continue
        for child in store.children_of(tx_hash, parent.trace_path):
            if is_delegation(parent, child, address, config):
                pairs.append(DelegationPair(tx_hash, parent.trace_path, child.trace_path, child.to))
    if not pairs:
        return ProxyStatus(address, False, note="no delegation observed in traces")
    return ProxyStatus(address, True, frozenset(p.implementation for p in pairs), tuple(pairs))


__all__ = ["DelegationPair", "ProxyConfig", "ProxyStatus", "detect_proxy", "selectors_match"]
