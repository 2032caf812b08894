"""Layer 3: label a detected UPC with the most specific upgradeability pattern
inside its reference design, or NonPattern."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass

from . import ir
from .core import Selector, StorageSlot
from .datastore import ContractNotFound, Datastore, DecompileFailure
from .upgradeability import Design, ImpactVariable, UpcReport, UpgradeEvidence, Via

ERC1967_IMPLEMENTATION_SLOT = StorageSlot.of_hash(
    "0x360894a13ba1a3210667c828492db98dca3e2076cc3735a920a3ca505d382bbc")
ERC1822_LOGIC_SLOT = StorageSlot.of_hash(
    "0xc5f16f0fcc639fa48a6947836d9850f504798523bf8c9a3a87d5876cf622bcf7")
PROXIABLE_UUID_SELECTOR = Selector("0x52d1902d")


class Pattern(enum.Enum):
    TRANSPARENT = "Transparent"
    ERC1967 = "ERC1967"
    UNSTRUCTURED_STORAGE = "UnstructuredStorage"
    INHERITED_STORAGE = "InheritedStorage"
    ETERNAL_STORAGE = "EternalStorage"
    ERC1822 = "ERC1822"
    DIAMOND = "Diamond"
    BEACON = "Beacon"
    REGISTRY = "Registry"
    NON_PATTERN = "NonPattern"


class HashedSlotKind(enum.Enum):
    ERC1967 = "ERC1967"
    UNSTRUCTURED_STORAGE = "UnstructuredStorage"
    NOT_HASHED = "NotHashed"


class ExternalKind(enum.Enum):
    BEACON = "Beacon"
    REGISTRY = "Registry"
    NEITHER = "Neither"


ALLOWED = {
    "SMUP": {Pattern.TRANSPARENT, Pattern.ERC1967, Pattern.UNSTRUCTURED_STORAGE,
             Pattern.INHERITED_STORAGE, Pattern.ETERNAL_STORAGE, Pattern.NON_PATTERN},
    "DUP": {Pattern.ERC1822, Pattern.DIAMOND, Pattern.NON_PATTERN},
    "ESUP": {Pattern.BEACON, Pattern.REGISTRY, Pattern.NON_PATTERN},
}


class ContractMisuse(ValueError):
    """A check was called on a report outside its reference design."""


@dataclass(frozen=True)
class PatternLabel:
    value: Pattern
    design: Design

    def __post_init__(self):
        if self.value not in ALLOWED[self.design.family]:
            raise ContractMisuse(f"{self.value.value} is not a {self.design.family} pattern")


def check_transparent(site: ir.DelegatecallSite, contract: ir.DecompiledContract | None = None) -> bool:
    return ir.caller_guard_before(site)


def check_hashed_slot(primary: ImpactVariable | StorageSlot) -> HashedSlotKind:
    slot = primary if isinstance(primary, StorageSlot) else primary.slot
    if not slot.is_hashed:
        return HashedSlotKind.NOT_HASHED
    if slot.same_slot(ERC1967_IMPLEMENTATION_SLOT):
        return HashedSlotKind.ERC1967
    return HashedSlotKind.UNSTRUCTURED_STORAGE


def _layout(x) -> tuple[ir.StorageDecl, ...]:
    return x.storage if isinstance(x, ir.DecompiledContract) else tuple(x)


def check_inherited(proxy_layout, impl_layouts) -> bool:
    """The proxy layout is a consistent prefix of some implementation layout."""
    proxy = _layout(proxy_layout)
    ints = [d.slot.index for d in proxy if not d.slot.is_hashed]
    top = max(ints) if ints else -1
    for impl in map(_layout, impl_layouts):
        shared = all(any(i.slot == p.slot and i.value_type is p.value_type for i in impl) for p in proxy)
        if not shared:
            continue
        extras = [i for i in impl if not any(i.slot == p.slot and i.value_type is p.value_type for p in proxy)]
        if all(e.slot.is_hashed or e.slot.index > top for e in extras):
            return True
    return False


def indicator_slot(proxy_layout) -> int | None:
    ints = [d.slot.index for d in _layout(proxy_layout) if not d.slot.is_hashed]
    return min(ints) if ints else None


def check_eternal(proxy_layout, impl_layouts) -> bool:
    """Slots below the proxy's first integer slot hold only mappings in some implementation."""
    indicator = indicator_slot(proxy_layout)
    if indicator is None or indicator == 0:
        return False
    for impl in map(_layout, impl_layouts):
        below = [d for d in impl if not d.slot.is_hashed and d.slot.index < indicator]
        if all(d.value_type is ir.ValueKind.MAPPING for d in below):
            return True
    return False


_COMPARE_CONST = re.compile(r"(==|!=)\s*(0x[0-9a-fA-F]+|\d+)|(0x[0-9a-fA-F]+|\d+)\s*(==|!=)")


def check_erc1822(evidence: UpgradeEvidence, impl_contract: ir.DecompiledContract, proxy_slot: StorageSlot) -> bool:
    """The upgrade function calls ``proxiableUUID()`` on the new address and
    compares the answer with the proxy's implementation slot."""
    if evidence.line is None:
        return False
    fn = impl_contract.function_at(evidence.line)
    if fn is None:
        return False
    params = fn.param_names
    calls_uuid = any(
        isinstance(s, ir.ExternalCall) and s.static and s.selector == PROXIABLE_UUID_SELECTOR
        and ir.strip_casts(s.callee_expr) in params
        for s in fn.body)
    if not calls_uuid:
        return False
    for s in fn.body:
        if "return_data" not in s.text:
            continue
        for m in _COMPARE_CONST.finditer(s.text):
            literal = m.group(2) or m.group(3)
            value = int(literal, 16) if literal.lower().startswith("0x") else int(literal)
            if value == proxy_slot.value:
                return True
    return False


def check_beacon_or_registry(target_fn_return_var: ImpactVariable) -> ExternalKind:
    kind = target_fn_return_var.value_type
    if kind is ir.ValueKind.ADDR:
        return ExternalKind.BEACON
    if kind in (ir.ValueKind.MAPPING, ir.ValueKind.ARRAY):
        return ExternalKind.REGISTRY
    return ExternalKind.NEITHER


def check_diamond(report: UpcReport) -> bool:
    if report.design is None or report.design.family != "DUP":
        raise ContractMisuse("the Diamond check applies to DUP reports only")
    return any(e.via is Via.DIAMOND_LOUPE for e in report.memory.evidence)


def _decompiled(store: Datastore, address) -> ir.DecompiledContract | None:
    try:
        return store.get_decompiled(address)
    except (ContractNotFound, DecompileFailure):
        return None


def classify(report: UpcReport, store: Datastore) -> PatternLabel:
    if not report.is_upc or report.design is None:
        raise ContractMisuse("only UPC reports can be classified")
    design = report.design
    family = design.family
    evidence = [e for e in report.memory.evidence if e.design.family == family]

    if family == "SMUP":
        first = evidence[0]
        analysis = next((a for a in report.sites if a.site.line == first.delegatecall_site_line), None)
        if analysis is not None and check_transparent(analysis.site):
            return PatternLabel(Pattern.TRANSPARENT, design)
        primary = analysis.primary if analysis is not None else first.primary
        hashed = check_hashed_slot(primary)
        if hashed is HashedSlotKind.ERC1967:
            return PatternLabel(Pattern.ERC1967, design)
        if hashed is HashedSlotKind.UNSTRUCTURED_STORAGE:
            return PatternLabel(Pattern.UNSTRUCTURED_STORAGE, design)
        proxy = _decompiled(store, report.address)
        impls = [c for c in (_decompiled(store, a) for a in report.implementations) if c is not None]
        if proxy is not None and check_inherited(proxy, impls):
            return PatternLabel(Pattern.INHERITED_STORAGE, design)
        if proxy is not None and check_eternal(proxy, impls):
            return PatternLabel(Pattern.ETERNAL_STORAGE, design)
        return PatternLabel(Pattern.NON_PATTERN, design)

    if family == "DUP":
        for ev in evidence:
            if ev.via is not Via.DUP or ev.primary is None:
                continue
            impl = _decompiled(store, ev.host)
            if impl is not None and check_erc1822(ev, impl, ev.primary.slot):
                return PatternLabel(Pattern.ERC1822, design)
        if check_diamond(report):
            return PatternLabel(Pattern.DIAMOND, design)
        return PatternLabel(Pattern.NON_PATTERN, design)

    # ESUP: classify on the variable the getter actually returned
    primary = evidence[0].primary
    kind = check_beacon_or_registry(primary) if primary is not None else ExternalKind.NEITHER
    if kind is ExternalKind.BEACON:
        return PatternLabel(Pattern.BEACON, design)
    if kind is ExternalKind.REGISTRY:
        return PatternLabel(Pattern.REGISTRY, design)
    return PatternLabel(Pattern.NON_PATTERN, design)
