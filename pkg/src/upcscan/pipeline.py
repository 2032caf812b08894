"""Run the three layers for one address and flatten the result into a
JSON-ready report record."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .core import Address
from .datastore import Datastore
from .patterns import PatternLabel, classify
from .proxy import ProxyStatus, detect_proxy
from .upgradeability import DetectorConfig, UpcReport, detect_upc


@dataclass
class Analysis:
    address: Address
    proxy: ProxyStatus
    upc: UpcReport | None = None
    label: PatternLabel | None = None
    timings: dict[str, float] = field(default_factory=dict)

    @property
    def category(self) -> str:
        """Bucket for the summary table."""
        if not self.proxy.found:
            return "NotFound"
        if not self.proxy.is_proxy:
            return "NonProxy"
        if self.upc is None or not self.upc.is_upc:
            return "Proxy/NonUPC"
        return "UPC"

    def record(self, with_timings: bool = True) -> dict:
        p = self.proxy
        witness = None
        if p.witness:
            tx, parent, child = p.witness
            witness = {"tx_hash": tx, "parent": list(parent), "child": list(child)}
        out = {
            "address": self.address.value,
            "layer1": {
                "is_proxy": p.is_proxy,
                "implementations": [a.value for a in sorted(p.implementations)],
                "witness": witness,
                "note": p.note,
            },
            "layer2": None,
            "layer3": None,
        }
        if self.upc is not None:
            r = self.upc
            out["layer2"] = {
                "verdict": r.verdict.value,
                "design": r.design.value if r.design else None,
                "failure_flags": sorted(f.value for f in r.memory.failure_flags),
                "evidence": [e.as_dict() for e in r.memory.evidence],
                "hardcoded_implementations": [a.value for a in r.hardcoded],
                "notes": list(r.memory.notes),
            }
        if self.label is not None:
            out["layer3"] = {"pattern": self.label.value.value, "design": self.label.design.value}
        if with_timings:
            out["timings"] = dict(self.timings)
        return out


def analyze(address: Address, store: Datastore, chain, config: DetectorConfig = DetectorConfig()) -> Analysis:
    t0 = time.perf_counter()
    status = detect_proxy(address, store, config.proxy)
    t1 = time.perf_counter()
    result = Analysis(address, status, timings={"layer1": t1 - t0})
    if not status.is_proxy:
        return result
    result.upc = detect_upc(address, status, store, chain, config)
    t2 = time.perf_counter()
    result.timings["layer2"] = t2 - t1
    if result.upc.is_upc:
        result.label = classify(result.upc, store)
        result.timings["layer3"] = time.perf_counter() - t2
    return result


def summarize(results) -> dict:
    counts = {"NonProxy": 0, "Proxy/NonUPC": 0, "NotFound": 0, "UPC": 0}
    by_design: dict[str, int] = {}
    by_pattern: dict[str, int] = {}
    for r in results:
        counts[r.category] += 1
        if r.category == "UPC":
            d = r.upc.design.value
            by_design[d] = by_design.get(d, 0) + 1
            key = f"{r.label.design.family}/{r.label.value.value}"
            by_pattern[key] = by_pattern.get(key, 0) + 1
    return {"counts": counts, "upc_by_design": dict(sorted(by_design.items())),
            "upc_by_pattern": dict(sorted(by_pattern.items()))}
