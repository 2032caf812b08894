import pytest
from hypothesis import given, strategies as st

from oracles import keccak256 as ref_keccak, selector as ref_selector
from upcscan.core import (
    Address, Bytecode, InvalidAddress, InvalidSelector, InvalidSignature, Selector, StorageSlot,
    ZERO_ADDRESS, hex_contains_address, keccak256, parse_address, selector_of,
)

# frozen from the pure-python sponge in oracles.py before the package existed
DIAMOND_CUT = "0x1f931c1c"
PROXIABLE_UUID = "0x52d1902d"
PROXIABLE_SLOT = "c5f16f0fcc639fa48a6947836d9850f504798523bf8c9a3a87d5876cf622bcf7"
ERC1967_IMPL = 0x360894a13ba1a3210667c828492db98dca3e2076cc3735a920a3ca505d382bbc


def test_oracle_known_vectors():
    assert ref_keccak(b"").hex() == "c5d2460186f7233c927e7db2dcc703c0e500b653ca82273b7bfad8045d85a470"
    assert ref_selector("transfer(address,uint256)") == "0xa9059cbb"


@given(st.binary(max_size=400))
def test_keccak_matches_oracle(data):
    assert keccak256(data) == ref_keccak(data)


def test_frozen_selectors():
    assert selector_of("diamondCut((address,uint8,bytes4[])[],address,bytes)").value == DIAMOND_CUT
    assert selector_of("proxiableUUID()").value == PROXIABLE_UUID
    assert selector_of("upgradeTo(address)").value == "0x3659cfe6"
    assert selector_of("facetAddress(bytes4)").value == "0xcdffacc6"


def test_slot_constants():
    assert keccak256(b"PROXIABLE").hex() == PROXIABLE_SLOT
    implementation = int.from_bytes(ref_keccak(b"eip1967.proxy.implementation"), "big") - 1
    assert implementation == ERC1967_IMPL


@pytest.mark.parametrize("sig", ["", "transfer", "transfer(address, uint256)", "f(uint256", "(uint256)",
                                 "f((uint256)", "f(Address)"])
def test_selector_of_rejects_non_canonical(sig):
    with pytest.raises(InvalidSignature):
        selector_of(sig)


@given(st.text(alphabet="abcdefghijklmnopqrstuvwxyz_", min_size=1, max_size=12),
       st.lists(st.sampled_from(["uint256", "address", "bytes", "bool", "bytes4[]", "(address,uint8)"]),
                max_size=4))
def test_selector_of_matches_oracle(name, types):
    sig = f"{name}({','.join(types)})"
    assert selector_of(sig).value == ref_selector(sig)


def test_selector_parse_and_calldata():
    assert Selector.parse("52d1902d") == Selector("0x52d1902d")
    assert Selector.parse("0x0") == Selector("0x00000000")
    assert Selector.from_calldata("0xa9059cbb" + "00" * 64) == Selector("0xa9059cbb")
    assert Selector.from_calldata("0x1234") is None
    with pytest.raises(InvalidSelector):
        Selector.parse("0x123456789")


def test_parse_address():
    a = parse_address("0xABCDEF0123456789abcdef0123456789ABCDEF01")
    assert a.value == "0xabcdef0123456789abcdef0123456789abcdef01"
    assert a.hex == a.value[2:]
    assert ZERO_ADDRESS.is_zero() and not a.is_zero()
    for bad in ["0x1234", "abcdef0123456789abcdef0123456789abcdef01", "0x" + "g" * 40, 42]:
        with pytest.raises(InvalidAddress):
            parse_address(bad)
    with pytest.raises(InvalidAddress):
        Address("0xABCDEF0123456789abcdef0123456789ABCDEF01")


@given(st.binary(min_size=20, max_size=20), st.booleans())
def test_parse_address_idempotent(raw, upper):
    text = "0x" + (raw.hex().upper() if upper else raw.hex())
    once = parse_address(text)
    assert parse_address(once.value) == once
    assert parse_address(once) is once


def test_storage_slot():
    s = StorageSlot.of_hash("0x360894a13ba1a3210667c828492db98dca3e2076cc3735a920a3ca505d382bbc")
    assert s.is_hashed and s.value == ERC1967_IMPL
    assert StorageSlot.of_hash("0x1").hashed == "0x" + "0" * 63 + "1"
    assert StorageSlot.integer(2) != StorageSlot.integer(2, 160)
    assert StorageSlot.integer(2).same_slot(StorageSlot.integer(2, 160))
    assert not StorageSlot.integer(2).same_slot(StorageSlot.of_hash("0x2"))
    with pytest.raises(ValueError):
        StorageSlot()
    with pytest.raises(ValueError):
        StorageSlot(index=1, hashed="0x" + "0" * 64)


def test_bytecode_hash_and_containment():
    impl = parse_address("0x" + "ab" * 20)
    code = Bytecode("0x73" + impl.hex + "5af4")
    assert code.hash == "0x" + ref_keccak(bytes.fromhex(code.hex[2:])).hex()
    assert code.contains_address(impl)
    assert not Bytecode("0x6080").contains_address(impl)
    assert Bytecode("0x").is_empty
    # half-byte shifted occurrences are not real embeddings
    assert not hex_contains_address("0x7" + impl.hex + "0", impl)
    with pytest.raises(ValueError):
        Bytecode("0x123")
