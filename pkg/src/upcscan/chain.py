"""Answers the one live-chain question the detectors ask: which facet a
Diamond routes a selector to (``facetAddress(bytes4)`` on the loupe)."""

from __future__ import annotations

import json
import logging
import urllib.error
import urllib.request
from pathlib import Path

from .core import ZERO_ADDRESS, Address, Selector, parse_address, selector_of

log = logging.getLogger(__name__)

FACET_ADDRESS = selector_of("facetAddress(bytes4)")


class QueryError(RuntimeError):
    pass


class MockChainQuery:
    """File-backed loupe answers; any unknown (diamond, selector) pair is 0x0."""

    def __init__(self, entries: dict[tuple[Address, Selector], Address] | None = None):
        self.entries = dict(entries or {})

    @classmethod
    def from_file(cls, path) -> "MockChainQuery":
        entries = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                    key = (parse_address(obj["diamond"]), Selector.parse(obj["selector"]))
                    entries[key] = parse_address(obj["facet"])
                except (KeyError, ValueError) as exc:
                    raise ValueError(f"{path}:{lineno}: bad loupe record: {exc}") from None
        return cls(entries)

    def facet_address(self, diamond: Address, selector: Selector) -> Address:
        return self.entries.get((diamond, selector), ZERO_ADDRESS)

    def save(self, path) -> None:
        with open(Path(path), "w", encoding="utf-8") as fh:
            for (diamond, sel), facet in sorted(self.entries.items()):
                fh.write(json.dumps({"diamond": diamond.value, "selector": sel.value,
                                     "facet": facet.value}) + "\n")


class RpcChainQuery:
    """Live adapter: ``eth_call`` against a JSON-RPC endpoint."""

    def __init__(self, url: str, timeout: float = 10.0):
        self.url = url
        self.timeout = timeout

    def facet_address(self, diamond: Address, selector: Selector) -> Address:
        data = FACET_ADDRESS.value + selector.value[2:].ljust(64, "0")
        payload = {"jsonrpc": "2.0", "id": 1, "method": "eth_call",
                   "params": [{"to": diamond.value, "data": data}, "latest"]}
        req = urllib.request.Request(self.url, data=json.dumps(payload).encode(),
                                     headers={"Content-Type": "application/json"})
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                body = json.loads(resp.read())
        except (urllib.error.URLError, OSError, ValueError) as exc:
            raise QueryError(f"{self.url}: {exc}") from exc
        if "error" in body:
            # a reverting call means no loupe facet answers the query
            return ZERO_ADDRESS
        result = body.get("result") or "0x"
        word = result[2:].rjust(64, "0")[-40:]
        return parse_address("0x" + word)


def facet_address_or_zero(chain, diamond: Address, selector: Selector) -> Address:
    try:
        return chain.facet_address(diamond, selector)
    except QueryError as exc:
        log.warning("loupe query failed, treating as 0x0: %s", exc)
        return ZERO_ADDRESS
