"""Primitive values shared by every analysis layer: addresses, selectors,
storage slots, bytecode and the keccak-256 helper behind them."""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from Crypto.Hash import keccak


class InvalidAddress(ValueError):
    pass


class InvalidSignature(ValueError):
    pass


class InvalidSelector(ValueError):
    pass


def keccak256(data: bytes) -> bytes:
    h = keccak.new(digest_bits=256)
    h.update(data)
    return h.digest()


def strip_0x(text: str) -> str:
    return text[2:] if text[:2] in ("0x", "0X") else text


def hex_to_bytes(text: str) -> bytes:
    body = strip_0x(text.strip())
    if len(body) % 2:
        body = "0" + body
    return bytes.fromhex(body)


_HEX40 = re.compile(r"[0-9a-fA-F]{40}")


@dataclass(frozen=True, order=True)
class Address:
    value: str

    def __post_init__(self):
        body = self.value[2:] if self.value.startswith("0x") else None
        if body is None or not _HEX40.fullmatch(body) or body != body.lower():
            raise InvalidAddress(f"not a normalized address: {self.value!r}")

    @property
    def hex(self) -> str:
        """The 40 hex characters without the 0x prefix."""
        return self.value[2:]

    def is_zero(self) -> bool:
        return self.value == ZERO_ADDRESS.value

    def __str__(self):
        return self.value


def parse_address(text) -> Address:
    if isinstance(text, Address):
        return text
    if not isinstance(text, str):
        raise InvalidAddress(f"expected a string, got {type(text).__name__}")
    body = text.strip()
    if body[:2] not in ("0x", "0X") or not _HEX40.fullmatch(body[2:]):
        raise InvalidAddress(f"not a 20-byte hex address: {text!r}")
    return Address("0x" + body[2:].lower())


ZERO_ADDRESS = Address("0x" + "0" * 40)


@dataclass(frozen=True, order=True)
class Selector:
    value: str

    def __post_init__(self):
        if not re.fullmatch(r"0x[0-9a-f]{8}", self.value):
            raise InvalidSelector(f"not a 4-byte selector: {self.value!r}")

    @classmethod
    def parse(cls, text: str) -> "Selector":
        body = strip_0x(text.strip()).lower()
        if not re.fullmatch(r"[0-9a-f]{1,8}", body):
            raise InvalidSelector(f"not a 4-byte selector: {text!r}")
        return cls("0x" + body.zfill(8))

    @classmethod
    def from_calldata(cls, calldata: str) -> "Selector | None":
        body = strip_0x(calldata).lower()
        if len(body) < 8:
            return None
        return cls("0x" + body[:8])

    def __str__(self):
        return self.value


# canonical signature: name(type,type,...) with no spaces or parameter names
_SIG = re.compile(r"[A-Za-z_$][A-Za-z0-9_$]*\((.*)\)")
_TYPE = re.compile(r"[a-z][a-z0-9]*(\[[0-9]*\])*")


def _valid_types(params: str) -> bool:
    """Check a comma separated type list, allowing nested tuples."""
    if params == "":
        return True
    depth, start = 0, 0
    parts = []
    for i, ch in enumerate(params):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth < 0:
                return False
        elif ch == "," and depth == 0:
            parts.append(params[start:i])
            start = i + 1
    if depth:
        return False
    parts.append(params[start:])
    for part in parts:
        if part.startswith("("):
            m = re.fullmatch(r"\((.*)\)((\[[0-9]*\])*)", part)
            if not m or not _valid_types(m.group(1)):
                return False
        elif not _TYPE.fullmatch(part):
            return False
    return True


def selector_of(signature: str) -> Selector:
    """Return the 4-byte ABI selector of a canonical function signature."""
    if not isinstance(signature, str):
        raise InvalidSignature(f"expected text, got {type(signature).__name__}")
    m = _SIG.fullmatch(signature)
    if not m or not _valid_types(m.group(1)):
        raise InvalidSignature(f"not a canonical signature: {signature!r}")
    return Selector("0x" + keccak256(signature.encode()).hex()[:8])


@dataclass(frozen=True)
class StorageSlot:
    """Either a compiler-assigned integer index or a hashed 32-byte key.

    ``offset`` is the bit offset inside the slot (Panoramix ``offset 160``).
    """

    index: int | None = None
    hashed: str | None = None
    offset: int = 0

    def __post_init__(self):
        if (self.index is None) == (self.hashed is None):
            raise ValueError("a slot is either an integer index or a hashed key")
        if self.index is not None and self.index < 0:
            raise ValueError("slot index must be non-negative")
        if self.hashed is not None and not re.fullmatch(r"0x[0-9a-f]{64}", self.hashed):
            raise ValueError(f"hashed slot must carry 64 hex characters: {self.hashed!r}")
        if self.offset < 0:
            raise ValueError("offset must be non-negative")

    @classmethod
    def integer(cls, index: int, offset: int = 0) -> "StorageSlot":
        return cls(index=index, offset=offset)

    @classmethod
    def of_hash(cls, key: str, offset: int = 0) -> "StorageSlot":
        return cls(hashed="0x" + strip_0x(key).lower().zfill(64), offset=offset)

    @property
    def is_hashed(self) -> bool:
        return self.hashed is not None

    @property
    def value(self) -> int:
        return self.index if self.index is not None else int(self.hashed, 16)

    def same_slot(self, other: "StorageSlot") -> bool:
        """Same storage word, offsets ignored."""
        return self.index == other.index and self.hashed == other.hashed

    def __str__(self):
        base = str(self.index) if self.index is not None else self.hashed
        return f"{base}+{self.offset}" if self.offset else base


@dataclass(frozen=True)
class Bytecode:
    hex: str
    hash: str = field(init=False)

    def __post_init__(self):
        body = strip_0x(self.hex).lower()
        if len(body) % 2 or not re.fullmatch(r"[0-9a-f]*", body):
            raise ValueError("bytecode must be an even-length hex string")
        object.__setattr__(self, "hex", "0x" + body)
        object.__setattr__(self, "hash", "0x" + keccak256(bytes.fromhex(body)).hex())

    @property
    def is_empty(self) -> bool:
        return self.hex == "0x"

    def contains_address(self, address: Address) -> bool:
        return hex_contains_address(self.hex, address)


def hex_contains_address(data: str, address: Address) -> bool:
    """True when the 20 address bytes occur, byte-aligned, inside hex data."""
    body = strip_0x(data).lower()
    at = body.find(address.hex)
    while at != -1:
        if at % 2 == 0:
            return True
        at = body.find(address.hex, at + 1)
    return False
