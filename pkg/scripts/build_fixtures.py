"""Generate the fixture corpus under tests/fixtures.

Each family directory holds traces.jsonl, contracts.jsonl, decompiled/,
an optional loupe.jsonl and manifest.json. corpus/ merges every family into
one store directory. listings/ holds the decompiled texts used as goldens.

Run from the repository root:  python3 scripts/build_fixtures.py
"""

from __future__ import annotations

import argparse
import json
import shutil
from pathlib import Path

from upcscan import ir
from upcscan.core import Bytecode, keccak256, selector_of

ROOT = Path(__file__).resolve().parent.parent
OUT = ROOT / "tests" / "fixtures"

ERC1967_IMPL = "0x360894a13ba1a3210667c828492db98dca3e2076cc3735a920a3ca505d382bbc"
ERC1967_ADMIN = "0xb53127684a568b3173ae13b9f8a6016e243e63b6e8ee1178d6a717850b5d6103"
PROXIABLE = "0xc5f16f0fcc639fa48a6947836d9850f504798523bf8c9a3a87d5876cf622bcf7"
ZOS_IMPL = "0x" + keccak256(b"org.zeppelinos.proxy.implementation").hex()
DIAMOND_STORAGE = "0x" + keccak256(b"diamond.standard.diamond.storage").hex()
BEACON_SLOT = "0x" + (int.from_bytes(keccak256(b"eip1967.proxy.beacon"), "big") - 1).to_bytes(32, "big").hex()

TRANSFER = selector_of("transfer(address,uint256)").value
BALANCE_OF = selector_of("balanceOf(address)").value
IMPLEMENTATION = selector_of("implementation()").value
GET_IMPLEMENTATION = selector_of("getImplementation()").value
WITHDRAW = selector_of("withdraw(uint256)").value
DIAMOND_CUT = selector_of("diamondCut((address,uint8,bytes4[])[],address,bytes)").value

USER = "0x" + "e0a1" * 10


# -- decompiled text snippets ------------------------------------------------

def fallback(target: str, guard: str | None = None, pre: str = "") -> str:
    lines = ["def _fallback() payable: # default function"]
    if pre:
        lines.append(pre.rstrip("\n"))
    if guard:
        lines += [f"  if caller == {guard}:", "      revert with 0, 'admin cannot fallback'"]
    lines += [
        f"  delegate {target} with:",
        "     funct call.data[0 len 4]",
        "     gas gas_remaining wei",
        "     args call.data[4 len calldata.size - 4]",
        "  if not delegate.return_code:",
        "      revert with ext_call.return_data[0 len return_data.size]",
        "  return ext_call.return_data[0 len return_data.size]",
    ]
    return "\n".join(lines) + "\n"


def storage(*decls: str) -> str:
    return "def storage:\n" + "".join(f"  {d}\n" for d in decls) + "\n"


TOKEN_BODY = """
def balanceOf(address _owner):
  require calldata.size - 4 >= 32
  return balances[_owner]

def transfer(address _to, uint256 _value):
  require calldata.size - 4 >= 64
  require _value <= balances[caller]
  balances[caller] -= _value
  balances[_to] += _value
  return 1
"""

LISTING_1 = f"""def storage:
  stor3608 is addr at storage {ERC1967_IMPL}
[...]
def _fallback() payable: # default function
  if caller == addr(storB531.field_0):
      revert with 0x8c[...]00, 32, 66, 0x74[...]65, mem[230 len 30]
  delegate uint256(stor3608.field_0) with:
     funct call.data[0 len 4]
     gas gas_remaining wei
     args call.data[4 len calldata.size - 4]
  if not delegate.return_code:
     revert with ext_call.return_data[0 len return_data.size]
  return ext_call.return_data[0 len return_data.size]
[...]
"""

LISTING_2 = """def storage:
  owner is addr at storage 0
  adminAddress is addr at storage 1
  implementationAddress is addr at storage 2




[...]
"""

LISTING_3 = """def storage:
  owner is addr at storage 0
  adminAddress is addr at storage 1
  implementationAddress is addr at storage 2
  stor3 is mapping of uint8 at storage 3
  stor4 is mapping of uint8 at storage 4
  stor5 is mapping of uint8 at storage 5
  [...]
[...]
"""

LISTING_4 = """def storage:
  upgradeabilityOwner is addr at storage 6
  version is uint256 at storage 7
  implementationAddress is addr at storage 8

[...]
"""

LISTING_5 = """def storage:
 deployedABlock is mapping of uint256 at storage 0
 unknown871c0760 is mapping of addr at storage 2
 stor4 is mapping of uint8 at storage 4

[...]
"""

LISTING_6 = f"""
def unknown912a9885(addr _param1) payable:
  [...]
  if not caller:
    revert with [...]
  [...]
  static call _param1.0x52d1902d with:
    gas gas_remaining wei
  [...]
  if ext_call.return_data[0] != {PROXIABLE}:
    revert with 0, 'Not compatible'
  unknownabd108baAddress = _param1
  [...]
"""

# the abbreviated slots of the printed listing are expanded to the full
# ERC-1967 implementation and admin slots
LISTING_8 = f"""# Panoramix decompiler.

def storage:
  stor3608 is uint128 at storage {ERC1967_IMPL} offset 160
  stor3608 is addr at storage {ERC1967_IMPL}
  stor3608 is uint256 at storage {ERC1967_IMPL}
  storB531 is uint128 at storage {ERC1967_ADMIN} offset 160
  storB531 is addr at storage {ERC1967_ADMIN}

def admin():
  [...]

def implementation():
  [...]

def _fallback() payable:
  [...]
  delegate uint256(stor3608.field_0) with:
     funct call.data[0 len 4]
       gas gas_remaining wei
      args call.data[4 len calldata.size - 4]
  if not delegate.return_code:
      revert with ext_call.return_data[0 len return_data.size]
  return ext_call.return_data[0 len return_data.size]

def upgradeTo(address _implementation):
  require calldata.size - 4 >= 32
  [...]
  addr(stor3608.field_0) = _implementation
  [...]

def upgradeToAndCall(address _implementation, bytes _data) payable:
  require calldata.size - 4 >= 64
  [...]
  addr(stor3608.field_0) = _implementation
  [...]

def changeAdmin(address _admin):
  require calldata.size - 4 >= 32
  [...]
  addr(storB531.field_0) = _admin_
  [...]
"""

LISTINGS = {"listing1": LISTING_1, "listing2": LISTING_2, "listing3": LISTING_3,
            "listing4": LISTING_4, "listing5": LISTING_5, "listing6": LISTING_6,
            "listing8": LISTING_8}

TOKEN_IMPL = storage("balances is mapping of uint256 at storage 0",
                     "totalSupply is uint256 at storage 1") + TOKEN_BODY


# -- family builder ----------------------------------------------------------

class Family:
    def __init__(self, index: int, name: str):
        self.index = index
        self.name = name
        self.contracts: list[dict] = []
        self.sources: dict[str, str | None] = {}
        self.traces: list[dict] = []
        self.loupe: list[dict] = []
        self.expect: list[dict] = []
        self._tx = 0

    def addr(self, role: int) -> str:
        return "0x" + f"{self.index:04x}" + "0" * 32 + f"{role:04x}"

    def contract(self, role: int, source: str | None, bytecode: str | None = None) -> str:
        """Register a contract. ``source=None`` writes a decompile-failure marker."""
        address = self.addr(role)
        if bytecode is None:
            seed = keccak256(f"{self.name}/{role}".encode()).hex()
            bytecode = "0x6080604052" + seed + seed[::-1]
        self.contracts.append({"address": address, "bytecode": bytecode, "created_at": self.index * 100})
        code = Bytecode(bytecode)
        if not code.is_empty:
            self.sources[code.hash[2:]] = source
        return address

    def tx(self, root: "Call", status: bool = True):
        self._tx += 1
        tx_hash = "0x" + keccak256(f"{self.name}/tx{self._tx}".encode()).hex()
        block = 1_000_000 + self.index * 100 + self._tx

        def emit(call: Call, path: list[int]):
            self.traces.append({
                "tx_hash": tx_hash, "trace_path": path, "from": call.frm, "to": call.to,
                "call_type": call.kind, "input": call.input, "output": call.output,
                "status": status if not path else call.status, "block_number": block,
            })
            for i, child in enumerate(call.children):
                emit(child, path + [i])

        emit(root, [])
        return tx_hash

    def expects(self, address: str, category: str, design: str | None = None,
                pattern: str | None = None, flags: tuple[str, ...] = ()):
        self.expect.append({"family": self.name, "address": address, "category": category,
                            "design": design, "pattern": pattern, "flags": list(flags)})

    def write(self, root: Path):
        d = root / self.name
        (d / "decompiled").mkdir(parents=True, exist_ok=True)
        _write_jsonl(d / "traces.jsonl", self.traces)
        _write_jsonl(d / "contracts.jsonl", self.contracts)
        for key, text in sorted(self.sources.items()):
            if text is None:
                (d / "decompiled" / f"{key}.failed").write_text("", encoding="utf-8")
            else:
                (d / "decompiled" / f"{key}.pan").write_text(text, encoding="utf-8")
        if self.loupe:
            _write_jsonl(d / "loupe.jsonl", self.loupe)
        (d / "manifest.json").write_text(json.dumps(self.expect, indent=2) + "\n", encoding="utf-8")


class Call:
    def __init__(self, frm, to, input="0x", output="0x", kind="CALL", children=(), status=True):
        self.frm, self.to, self.input, self.output = frm, to, input, output
        self.kind, self.children, self.status = kind, list(children), status


def word(address: str) -> str:
    return address[2:].rjust(64, "0")


def calldata(selector: str, *args: str) -> str:
    return selector + "".join(args)


def delegated(user: str, proxy: str, impl: str, data: str, output: str = "0x" + "0" * 63 + "1") -> Call:
    """A user call into ``proxy`` forwarded unchanged to ``impl``."""
    return Call(user, proxy, data, output, children=[
        Call(proxy, impl, data, output, kind="DELEGATECALL")])


def _write_jsonl(path: Path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, sort_keys=True) + "\n")


# -- the families ------------------------------------------------------------

def smup_basic(f: Family):
    proxy = f.contract(1, LISTING_8)
    impl = f.contract(2, TOKEN_IMPL)
    f.tx(delegated(USER, proxy, impl, calldata(TRANSFER, word(USER), "0" * 63 + "5")))
    f.tx(Call(USER, impl, calldata(BALANCE_OF, word(USER)), "0x" + "0" * 64))
    f.expects(proxy, "UPC", "SMUP", "ERC1967")
    f.expects(impl, "NonProxy")


def transparent(f: Family):
    src = storage(f"stor3608 is addr at storage {ERC1967_IMPL}",
                  f"storB531 is addr at storage {ERC1967_ADMIN}")
    src += fallback("uint256(stor3608.field_0)", guard="addr(storB531.field_0)")
    src += """
def upgradeTo(address _implementation):
  require caller == addr(storB531.field_0)
  addr(stor3608.field_0) = _implementation
"""
    proxy = f.contract(1, src)
    impl = f.contract(2, TOKEN_IMPL)
    f.tx(delegated(USER, proxy, impl, calldata(BALANCE_OF, word(USER))))
    f.expects(proxy, "UPC", "SMUP", "Transparent")


def unstructured(f: Family):
    src = storage(f"stor7050 is addr at storage {ZOS_IMPL}",
                  "owner is addr at storage 0")
    src += fallback("addr(stor7050.field_0)")
    src += """
def upgradeTo(address _newImplementation):
  require caller == owner
  addr(stor7050.field_0) = _newImplementation
"""
    proxy = f.contract(1, src)
    impl = f.contract(2, TOKEN_IMPL)
    f.tx(delegated(USER, proxy, impl, calldata(TRANSFER, word(USER), "0" * 64)))
    f.expects(proxy, "UPC", "SMUP", "UnstructuredStorage")


def inherited(f: Family):
    src = LISTING_2.replace("[...]\n", "") + fallback("addr(implementationAddress)") + """
def upgradeTo(address _newImplementation):
  require caller == adminAddress
  implementationAddress = _newImplementation
"""
    impl_src = LISTING_3.replace("  [...]\n[...]\n", "\n") + TOKEN_BODY.replace("balances", "stor3")
    proxy = f.contract(1, src)
    impl = f.contract(2, impl_src)
    f.tx(delegated(USER, proxy, impl, calldata(BALANCE_OF, word(USER))))
    f.expects(proxy, "UPC", "SMUP", "InheritedStorage")


def eternal(f: Family):
    src = LISTING_4.replace("[...]\n", "") + fallback("addr(implementationAddress)") + """
def upgradeTo(uint256 _version, address _implementation):
  require caller == upgradeabilityOwner
  version = _version
  implementationAddress = _implementation
"""
    impl_src = LISTING_5.replace("[...]\n", "") + """
def deployedAt(uint256 _key):
  return deployedABlock[_key]
"""
    proxy = f.contract(1, src)
    impl = f.contract(2, impl_src)
    f.tx(delegated(USER, proxy, impl, calldata(selector_of("deployedAt(uint256)").value, "0" * 64)))
    f.expects(proxy, "UPC", "SMUP", "EternalStorage")


def erc1822(f: Family):
    proxy_src = storage(f"storC5F1 is addr at storage {PROXIABLE}") + fallback("addr(storC5F1.field_0)")
    impl_src = storage(f"storC5F1 is addr at storage {PROXIABLE}",
                       "owner is addr at storage 0",
                       "balances is mapping of uint256 at storage 1") + f"""
def proxiableUUID():
  return {PROXIABLE}

def updateCode(address _newCode):
  require caller == owner
  static call _newCode.0x52d1902d with:
    gas gas_remaining wei
  if ext_call.return_data[0] != {PROXIABLE}:
    revert with 0, 'Not compatible'
  addr(storC5F1.field_0) = _newCode
""" + TOKEN_BODY
    proxy = f.contract(1, proxy_src)
    impl = f.contract(2, impl_src)
    f.tx(delegated(USER, proxy, impl, calldata(BALANCE_OF, word(USER))))
    f.expects(proxy, "UPC", "DUP_V1", "ERC1822")


def diamond(f: Family):
    proxy_src = storage(
        f"selectorToFacet is mapping of struct at storage {DIAMOND_STORAGE}",
        "owner is addr at storage 0")
    proxy_src += fallback("addr(selectorToFacet[Mask(32, 224, call.data[0 len 4])].field_0)",
                          pre="  require selectorToFacet[Mask(32, 224, call.data[0 len 4])].field_0")
    proxy = f.contract(1, proxy_src)
    facet = f.contract(2, TOKEN_IMPL)
    cut_facet = f.contract(3, storage(f"selectorToFacet is mapping of struct at storage {DIAMOND_STORAGE}") + """
def diamondCut(array _diamondCut, address _init, bytes _calldata):
  require caller == owner
  selectorToFacet[_init].field_0 = _init
""")
    f.tx(delegated(USER, proxy, facet, calldata(TRANSFER, word(USER), "0" * 64)))
    f.loupe.append({"diamond": proxy, "selector": DIAMOND_CUT, "facet": cut_facet})
    f.expects(proxy, "UPC", "DUP_V3", "Diamond")


def beacon_source() -> str:
    return storage("owner is addr at storage 0", "implementation is addr at storage 1") + """
def implementation():
  return implementation

def upgradeTo(address newImplementation):
  require caller == owner
  implementation = newImplementation
"""


def esup_proxy_source(getter: str) -> str:
    return storage(f"storA3F0 is addr at storage {BEACON_SLOT}") + f"""
def _fallback() payable:
  static call addr(storA3F0.field_0).{getter} with:
     gas gas_remaining wei
  if not ext_call.success:
      revert with ext_call.return_data[0 len return_data.size]
  delegate ext_call.return_data[12 len 20] with:
     funct call.data[0 len 4]
     gas gas_remaining wei
     args call.data[4 len calldata.size - 4]
  if not delegate.return_code:
      revert with ext_call.return_data[0 len return_data.size]
  return ext_call.return_data[0 len return_data.size]
"""


def esup_tx(f: Family, proxy, dep, impl, getter_sel: str, data: str, dep_children=()):
    f.tx(Call(USER, proxy, data, "0x" + "0" * 64, children=[
        Call(proxy, dep, getter_sel, "0x" + word(impl), kind="STATICCALL", children=dep_children),
        Call(proxy, impl, data, "0x" + "0" * 64, kind="DELEGATECALL"),
    ]))


def beacon(f: Family):
    proxy = f.contract(1, esup_proxy_source("implementation()"))
    bcn = f.contract(2, beacon_source())
    impl = f.contract(3, TOKEN_IMPL)
    esup_tx(f, proxy, bcn, impl, IMPLEMENTATION, calldata(BALANCE_OF, word(USER)))
    f.expects(proxy, "UPC", "ESUP_V1", "Beacon")
    f.expects(bcn, "NonProxy")


def registry(f: Family):
    proxy = f.contract(1, esup_proxy_source("getImplementation()"))
    reg = f.contract(2, storage("owner is addr at storage 0",
                                "versions is mapping of addr at storage 1",
                                "currentVersion is uint256 at storage 2") + """
def getImplementation():
  return versions[currentVersion]

def addVersion(uint256 _version, address _implementation):
  require caller == owner
  versions[_version] = _implementation
  currentVersion = _version
""")
    impl = f.contract(3, TOKEN_IMPL)
    esup_tx(f, proxy, reg, impl, GET_IMPLEMENTATION, calldata(TRANSFER, word(USER), "0" * 64))
    f.expects(proxy, "UPC", "ESUP_V1", "Registry")


def esup_v2(f: Family):
    proxy = f.contract(1, esup_proxy_source("implementation()"))
    # the beacon is itself a proxy; its logic holds the getter and the upgrade function
    bcn = f.contract(2, storage(f"stor3608 is addr at storage {ERC1967_IMPL}") + fallback("addr(stor3608.field_0)"))
    bcn_logic = f.contract(3, beacon_source())
    impl = f.contract(4, TOKEN_IMPL)
    esup_tx(f, proxy, bcn, impl, IMPLEMENTATION, calldata(BALANCE_OF, word(USER)), dep_children=[
        Call(bcn, bcn_logic, IMPLEMENTATION, "0x" + word(impl), kind="DELEGATECALL")])
    f.expects(proxy, "UPC", "ESUP_V2", "Beacon")
    f.expects(bcn, "Proxy/NonUPC")


def esup_fallback(f: Family):
    proxy = f.contract(1, storage("provider is addr at storage 0") + """
def _fallback() payable:
  static call addr(provider).0x0 with:
     gas gas_remaining wei
  delegate ext_call.return_data[12 len 20] with:
     funct call.data[0 len 4]
     gas gas_remaining wei
     args call.data[4 len calldata.size - 4]
  return ext_call.return_data[0 len return_data.size]
""")
    provider = f.contract(2, storage("current is addr at storage 0", "owner is addr at storage 1") + """
def _fallback() payable:
  return current

def unknown55f6c1b8(addr _param1):
  require caller == owner
  current = _param1
""")
    impl = f.contract(3, TOKEN_IMPL)
    esup_tx(f, proxy, provider, impl, "0x", calldata(BALANCE_OF, word(USER)))
    f.expects(proxy, "UPC", "ESUP_V1", "Beacon")


def dup_v2(f: Family):
    proxy = f.contract(1, storage("owner is addr at storage 0", "logic is addr at storage 1")
                       + fallback("addr(logic)"))
    # the first implementation is a proxy too, declaring the slot but never writing it
    inner = f.contract(2, storage("owner is addr at storage 0", "logic is addr at storage 1")
                       + fallback("addr(logic)"))
    leaf = f.contract(3, storage("owner is addr at storage 0", "logic is addr at storage 1",
                                 "balances is mapping of uint256 at storage 2") + """
def setLogic(address _logic):
  require caller == owner
  logic = _logic
""")
    data = calldata(BALANCE_OF, word(USER))
    f.tx(delegated(USER, proxy, inner, data))
    f.tx(delegated(USER, inner, leaf, data))
    f.expects(proxy, "UPC", "DUP_V2", "NonPattern")
    f.expects(inner, "UPC", "DUP_V1", "NonPattern")


def governed_upgrade(f: Family):
    proxy = f.contract(1, storage("implementation is addr at storage 0",
                                  "pendingImplementation is addr at storage 1",
                                  "owner is addr at storage 2") + fallback("addr(implementation)") + """
def proposeUpgrade(address _newImplementation):
  require caller == owner
  pendingImplementation = _newImplementation

def acceptUpgrade():
  require caller == owner
  implementation = pendingImplementation
""")
    impl = f.contract(2, TOKEN_IMPL)
    f.tx(delegated(USER, proxy, impl, calldata(BALANCE_OF, word(USER))))
    f.expects(proxy, "UPC", "SMUP", "NonPattern")


def registry_pull(f: Family):
    proxy = f.contract(1, storage("registry is addr at storage 0", "implementation is addr at storage 1")
                       + fallback("addr(implementation)") + f"""
def sync():
  static call addr(registry).getImplementation() with:
     gas gas_remaining wei
  require ext_call.success
  implementation = addr(ext_call.return_data[0])
""")
    reg = f.contract(2, storage("latest is addr at storage 0") + """
def getImplementation():
  return latest
""")
    impl = f.contract(3, TOKEN_IMPL)
    f.tx(delegated(USER, proxy, impl, calldata(TRANSFER, word(USER), "0" * 64)))
    f.tx(Call(USER, proxy, selector_of("sync()").value, "0x", children=[
        Call(proxy, reg, GET_IMPLEMENTATION, "0x" + word(impl), kind="STATICCALL")]))
    f.expects(proxy, "UPC", "SMUP", "NonPattern")


def multi_impl(f: Family):
    proxy_decls = ("owner is addr at storage 0", "implementation is addr at storage 1")
    proxy = f.contract(1, storage(*proxy_decls) + fallback("addr(implementation)") + """
def upgradeTo(address _implementation):
  require caller == owner
  implementation = _implementation
""")
    # only the third implementation keeps the proxy layout as its prefix
    v1 = f.contract(2, TOKEN_IMPL)
    v2 = f.contract(3, storage("owner is addr at storage 0", "balances is mapping of uint256 at storage 1")
                    + TOKEN_BODY)
    v3 = f.contract(4, storage(*proxy_decls, "balances is mapping of uint256 at storage 2") + TOKEN_BODY)
    for impl in (v1, v2, v3):
        f.tx(delegated(USER, proxy, impl, calldata(BALANCE_OF, word(USER))))
    # a reverted delegation only counts with --include-failed-traces
    reverted = f.contract(5, TOKEN_IMPL)
    data = calldata(TRANSFER, word(USER), "f" * 64)
    f.tx(Call(USER, proxy, data, "0x", children=[
        Call(proxy, reverted, data, "0x", kind="DELEGATECALL", status=False)]), status=False)
    f.expects(proxy, "UPC", "SMUP", "InheritedStorage")


def packed_slot(f: Family):
    proxy = f.contract(1, storage("implementation is addr at storage 0",
                                  "stor0 is uint256 at storage 0",
                                  "paused is uint8 at storage 0 offset 160") + fallback("addr(implementation)") + """
def unknown3659cfe6(addr _param1):
  require caller == 0xe0a1e0a1e0a1e0a1e0a1e0a1e0a1e0a1e0a1e0a1
  stor0 = _param1
""")
    impl = f.contract(2, TOKEN_IMPL)
    f.tx(delegated(USER, proxy, impl, calldata(BALANCE_OF, word(USER))))
    f.expects(proxy, "UPC", "SMUP", "NonPattern")


def selector_proxy(f: Family):
    proxy = f.contract(1, storage("owner is addr at storage 0", "token is addr at storage 1") + """
def transfer(addr _to, uint256 _value):
  delegate addr(token) with:
     funct 0xa9059cbb
     gas gas_remaining wei
     args _to, _value
  return ext_call.return_data[0 len 32]

def setToken(address _token):
  require caller == owner
  token = _token
""")
    impl = f.contract(2, TOKEN_IMPL)
    f.tx(delegated(USER, proxy, impl, calldata(TRANSFER, word(USER), "0" * 64)))
    f.expects(proxy, "UPC", "SMUP", "NonPattern")


def forwarder(f: Family):
    impl_addr = f.addr(2)
    code = "0x363d3d373d3d3d363d73" + impl_addr[2:] + "5af43d82803e903d91602b57fd5bf3"
    proxy = f.contract(1, storage("unused is uint256 at storage 0") + fallback(f"0x{impl_addr[2:]}"), code)
    impl = f.contract(2, TOKEN_IMPL)
    f.tx(delegated(USER, proxy, impl, calldata(TRANSFER, word(USER), "0" * 64)))
    f.expects(proxy, "Proxy/NonUPC")


def adapter(f: Family):
    src = storage("standardSigs is mapping of uint256 at storage 3") + """
def _fallback() payable:
  require standardSigs[Mask(32, 224, call.data[0 len 4])]
  delegate this.address with:
     funct Mask(32, 224, standardSigs[Mask(32, 224, call.data[0 len 4])])
     gas gas_remaining wei
     args call.data[4 len calldata.size - 4]
  require delegate.return_code
""" + TOKEN_BODY
    adp = f.contract(1, src)
    presigned = selector_of("transferPreSigned(bytes,address,uint256,uint256,uint256)").value
    f.tx(Call(USER, adp, calldata(presigned, "0" * 64), "0x", children=[
        Call(adp, adp, calldata(TRANSFER, word(USER), "0" * 64), "0x", kind="DELEGATECALL")]))
    f.expects(adp, "NonProxy")


def library_delegatecall(f: Family):
    vault = f.contract(1, storage("balances is mapping of uint256 at storage 0") + """
def withdraw(uint256 _amount):
  require balances[caller] >= _amount
  delegate 0x0000000000000000000000000000000000000000 with:
     funct 0xb3c5c9a1
     args caller, _amount
""")
    lib = f.contract(2, """
def unknownb3c5c9a1(addr _param1, uint256 _param2):
  call _param1 with:
     value _param2 wei
""")
    f.tx(Call(USER, vault, calldata(WITHDRAW, "0" * 63 + "1"), "0x", children=[
        Call(vault, lib, calldata("0xb3c5c9a1", word(USER), "0" * 63 + "1"), "0x", kind="DELEGATECALL")]))
    f.expects(vault, "NonProxy")


def proxy_cycle(f: Family):
    src = storage("target is addr at storage 0") + fallback("addr(target)")
    a = f.contract(1, src)
    b = f.contract(2, src + "\n# clone with a different constructor argument\n")
    data = calldata(BALANCE_OF, word(USER))
    f.tx(delegated(USER, a, b, data))
    f.tx(delegated(USER, b, a, data))
    f.expects(a, "Proxy/NonUPC")
    f.expects(b, "Proxy/NonUPC")


def decompile_failure(f: Family):
    proxy = f.contract(1, None)
    impl = f.contract(2, TOKEN_IMPL)
    f.tx(delegated(USER, proxy, impl, calldata(BALANCE_OF, word(USER))))
    f.expects(proxy, "Proxy/NonUPC", flags=("Failure: Decompiler",))


def delegate_not_found(f: Family):
    # the decompiled text lost the delegate statement
    proxy = f.contract(1, storage("implementation is addr at storage 0") + """
def _fallback() payable:
  [...]
  return ext_call.return_data[0 len return_data.size]

def upgradeTo(address _implementation):
  implementation = _implementation
""")
    impl = f.contract(2, TOKEN_IMPL)
    f.tx(delegated(USER, proxy, impl, calldata(BALANCE_OF, word(USER))))
    f.expects(proxy, "Proxy/NonUPC", flags=("Failure: Delegate Not Found",))


def non_upgradeable(f: Family):
    proxy = f.contract(1, storage("implementation is addr at storage 0", "initialized is uint8 at storage 1")
                       + fallback("addr(implementation)") + """
def initialize():
  require not initialized
  implementation = 0x00000000000000000000000000000000deadbeef
  initialized = 1
""")
    impl = f.contract(2, TOKEN_IMPL)
    f.tx(delegated(USER, proxy, impl, calldata(BALANCE_OF, word(USER))))
    f.expects(proxy, "Proxy/NonUPC")


def empty_bytecode(f: Family):
    ghost = f.contract(1, None, bytecode="0x")
    impl = f.contract(2, TOKEN_IMPL)
    f.tx(delegated(USER, ghost, impl, calldata(BALANCE_OF, word(USER))))
    f.expects(ghost, "NonProxy")


FAMILIES = [
    ("smup-basic", smup_basic), ("transparent", transparent), ("unstructured", unstructured),
    ("inherited", inherited), ("eternal", eternal), ("erc1822", erc1822), ("diamond", diamond),
    ("beacon", beacon), ("registry", registry), ("esup-v2", esup_v2), ("esup-fallback", esup_fallback),
    ("dup-v2", dup_v2), ("governed-upgrade", governed_upgrade), ("registry-pull", registry_pull),
    ("multi-impl", multi_impl), ("packed-slot", packed_slot), ("selector-proxy", selector_proxy),
    ("forwarder", forwarder), ("adapter", adapter), ("library-delegatecall", library_delegatecall),
    ("proxy-cycle", proxy_cycle), ("decompile-failure", decompile_failure),
    ("delegate-not-found", delegate_not_found), ("non-upgradeable-storage", non_upgradeable),
    ("empty-bytecode", empty_bytecode),
]


def build(out: Path = OUT) -> list[Family]:
    families = []
    for i, (name, fn) in enumerate(FAMILIES, start=1):
        fam = Family(i, name)
        fn(fam)
        families.append(fam)

    fam_root = out / "families"
    corpus = out / "corpus"
    listings = out / "listings"
    for d in (fam_root, corpus, listings):
        if d.exists():
            shutil.rmtree(d)
    for fam in families:
        fam.write(fam_root)

    merged = Family(0, "corpus")
    for fam in families:
        merged.contracts += fam.contracts
        merged.sources.update(fam.sources)
        merged.traces += fam.traces
        merged.loupe += fam.loupe
        merged.expect += fam.expect
    merged.write(out)

    listings.mkdir(parents=True)
    for name, text in LISTINGS.items():
        (listings / f"{name}.pan").write_text(text, encoding="utf-8")
    pin_statement_kinds(out)
    return families


def pin_statement_kinds(out: Path):
    """Record per-source statement kind counts so parser drift shows up in review."""
    pinned = {}
    for path in sorted(out.glob("listings/*.pan")) + sorted(out.glob("corpus/decompiled/*.pan")):
        contract = ir.parse(path.read_text(encoding="utf-8"))
        counts = contract.statement_counts()
        total = sum(counts.values())
        pinned[path.relative_to(out).as_posix()] = {
            "counts": dict(sorted(counts.items())),
            "other_fraction": round(counts.get("Other", 0) / total, 4) if total else 0.0,
        }
    (out / "statement_kinds.json").write_text(json.dumps(pinned, indent=2) + "\n", encoding="utf-8")


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, default=OUT)
    args = parser.parse_args(argv)
    families = build(args.out)
    print(f"wrote {len(families)} families to {args.out}")


if __name__ == "__main__":
    main()
