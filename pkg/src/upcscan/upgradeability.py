"""Layer 2: decide whether an active proxy is upgradeable.

Three detectors share one :class:`GlobalMemory`:

* SMUP: the implementation variable and its upgrade function live in the proxy.
* ESUP: the proxy fetches the implementation address from an external
  contract (a beacon or registry) that owns the upgrade function. Variant 2
  is when that external contract is itself a proxy.
* DUP: the proxy keeps the implementation slot, but the upgrade function
  lives in an implementation contract that declares the same slot. Variant 2
  recurses into implementations that are proxies themselves; variant 3 is
  the Diamond loupe probe.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

from . import ir
from .chain import facet_address_or_zero
from .core import Address, Bytecode, Selector, StorageSlot, hex_contains_address, selector_of
from .datastore import CallType, ContractNotFound, Datastore, DecompileFailure
from .proxy import ProxyConfig, ProxyStatus, detect_proxy

log = logging.getLogger(__name__)

DIAMOND_CUT_SIGNATURE = "diamondCut((address,uint8,bytes4[])[],address,bytes)"
DIAMOND_CUT_SELECTOR = selector_of(DIAMOND_CUT_SIGNATURE)


class Design(enum.Enum):
    SMUP = "SMUP"
    ESUP_V1 = "ESUP_V1"
    ESUP_V2 = "ESUP_V2"
    DUP_V1 = "DUP_V1"
    DUP_V2 = "DUP_V2"
    DUP_V3 = "DUP_V3"

    @property
    def family(self) -> str:
        return self.value.split("_")[0]


class Via(enum.Enum):
    SMUP = "SMUP"
    ESUP = "ESUP"
    DUP = "DUP"
    DIAMOND_LOUPE = "DiamondLoupe"


class Failure(enum.Enum):
    DECOMPILER = "Failure: Decompiler"
    DELEGATE_NOT_FOUND = "Failure: Delegate Not Found"


class Rank(enum.Enum):
    PRIMARY = "Primary"
    SECONDARY = "Secondary"
    TERTIARY = "Tertiary"


class Verdict(enum.Enum):
    UPC = "UPC"
    NON_UPC = "NonUPC"


@dataclass(frozen=True)
class DetectorConfig:
    max_depth: int = 3
    proxy: ProxyConfig = ProxyConfig()


@dataclass(frozen=True)
class ImpactVariable:
    decl: ir.StorageDecl
    rank: Rank
    host: Address

    @property
    def name(self) -> str:
        return self.decl.name

    @property
    def slot(self) -> StorageSlot:
        return self.decl.slot

    @property
    def value_type(self) -> ir.ValueKind:
        return self.decl.value_type


@dataclass(frozen=True)
class UpgradeEvidence:
    function: str
    line: int | None
    host: Address
    via: Via
    design: Design
    delegatecall_site_line: int
    variable: ImpactVariable | None = None
    primary: ImpactVariable | None = None

    def as_dict(self) -> dict:
        return {"function": self.function, "line": self.line, "host": self.host.value,
                "via": self.via.value, "design": self.design.value,
                "variable": self.variable.name if self.variable else None}


@dataclass
class GlobalMemory:
    evidence: list[UpgradeEvidence] = field(default_factory=list)
    failure_flags: set[Failure] = field(default_factory=set)
    visited: set[tuple[Address, str]] = field(default_factory=set)
    notes: list[str] = field(default_factory=list)

    def record(self, ev: UpgradeEvidence) -> bool:
        key = (ev.host, ev.line, ev.function, ev.via)
        if any((e.host, e.line, e.function, e.via) == key for e in self.evidence):
            return False
        self.evidence.append(ev)
        return True

    def note(self, text: str):
        if text not in self.notes:
            log.debug(text)
            self.notes.append(text)


@dataclass
class SiteAnalysis:
    site: ir.DelegatecallSite
    primary: ImpactVariable | None = None
    impact_vars: list[ImpactVariable] = field(default_factory=list)
    dependencies: list[Address] = field(default_factory=list)
    evidence_found: int = 0


@dataclass
class UpcReport:
    address: Address
    verdict: Verdict
    design: Design | None
    memory: GlobalMemory
    sites: list[SiteAnalysis] = field(default_factory=list)
    implementations: list[Address] = field(default_factory=list)
    hardcoded: list[Address] = field(default_factory=list)

    @property
    def is_upc(self) -> bool:
        return self.verdict is Verdict.UPC


def hardcoded_implementations(bytecode: Bytecode, impls) -> tuple[list[Address], list[Address]]:
    """Split implementations into (literal in the proxy bytecode, everything else)."""
    hardcoded, dynamic = [], []
    for impl in impls:
        (hardcoded if bytecode.contains_address(impl) else dynamic).append(impl)
    return hardcoded, dynamic


def auxiliary_impact_variables(contract: ir.DecompiledContract, primary: ImpactVariable) -> list[ImpactVariable]:
    """Secondary variables share the primary's slot; tertiary ones are storage
    variables assigned into a primary or secondary variable."""
    secondary = [ImpactVariable(d, Rank.SECONDARY, primary.host) for d in contract.storage
                 if d != primary.decl and d.slot.same_slot(primary.slot)]
    direct = [primary.decl] + [v.decl for v in secondary]
    tertiary: list[ImpactVariable] = []
    for _, stmt in contract.statements():
        if not isinstance(stmt, ir.Assignment):
            continue
        if not any(ir.lvalue_matches(stmt.lvalue, d) for d in direct):
            continue
        source = ir.pick_decl(contract, stmt.rvalue)
        if source is None or source in direct or any(t.decl == source for t in tertiary):
            continue
        tertiary.append(ImpactVariable(source, Rank.TERTIARY, primary.host))
    return secondary + tertiary


def is_upgrade_assignment(assignment: ir.Assignment, function: ir.FunctionDef) -> bool:
    """The rvalue is a parameter of the function, or the result of a call."""
    core = ir.strip_casts(assignment.rvalue)
    if core in function.param_names:
        return True
    if "ext_call.return_data" in core:
        return any(isinstance(s, ir.ExternalCall) and s.line < assignment.line for s in function.body)
    return False


def upgrade_functions_for(contract: ir.DecompiledContract, var: ImpactVariable, memory: GlobalMemory, *,
                          via: Via = Via.SMUP, design: Design = Design.SMUP, site_line: int = 0,
                          primary: ImpactVariable | None = None) -> int:
    appended = 0
    for assignment in ir.assignments_to(contract, var.decl):
        fn = contract.function_at(assignment.line)
        if fn is None or not is_upgrade_assignment(assignment, fn):
            continue
        ev = UpgradeEvidence(fn.signature, assignment.line, var.host, via, design, site_line,
                             variable=var, primary=primary or var)
        appended += memory.record(ev)
    return appended


def returned_variable(contract: ir.DecompiledContract, fn: ir.FunctionDef) -> ir.StorageDecl | None:
    for stmt in fn.body:
        if isinstance(stmt, ir.Return) and stmt.expr:
            decl = ir.pick_decl(contract, stmt.expr)
            if decl is not None:
                return decl
    return None


class _Analysis:
    def __init__(self, address: Address, status: ProxyStatus, store: Datastore, chain,
                 config: DetectorConfig):
        self.address = address
        self.status = status
        self.store = store
        self.chain = chain
        self.config = config
        self.memory = GlobalMemory()
        self._proxy_cache: dict[Address, ProxyStatus] = {address: status}
        self.dynamic: list[Address] = []

    def proxy_status_of(self, address: Address) -> ProxyStatus:
        if address not in self._proxy_cache:
            self._proxy_cache[address] = detect_proxy(address, self.store, self.config.proxy)
        return self._proxy_cache[address]

    def decompile(self, address: Address) -> ir.DecompiledContract | None:
        try:
            return self.store.get_decompiled(address)
        except (DecompileFailure, ContractNotFound) as exc:
            self.memory.failure_flags.add(Failure.DECOMPILER)
            self.memory.note(f"decompile failed for {address}: {exc}")
            return None

    def report(self, sites=(), hardcoded=()) -> UpcReport:
        ev = self.memory.evidence
        return UpcReport(self.address, Verdict.UPC if ev else Verdict.NON_UPC,
                         ev[0].design if ev else None, self.memory, list(sites),
                         list(self.dynamic), list(hardcoded))

    def run(self) -> UpcReport:
        rec = self.store.contract(self.address)
        impls = self.status.ordered_implementations()
        hardcoded, self.dynamic = hardcoded_implementations(rec.bytecode, impls)
        if not self.dynamic:
            self.memory.note("forwarder: every implementation is hard-coded in the proxy bytecode")
            return self.report(hardcoded=hardcoded)
        contract = self.decompile(self.address)
        if contract is None:
            return self.report(hardcoded=hardcoded)
        sites = ir.relevant_delegatecalls(contract)
        if not sites:
            self.memory.failure_flags.add(Failure.DELEGATE_NOT_FOUND)
            return self.report(hardcoded=hardcoded)

        self.memory.visited.update({(self.address, "dup"), (self.address, "esup")})
        analyses = []
        for site in sites:
            analysis = SiteAnalysis(site)
            before = len(self.memory.evidence)
            if isinstance(site.target, ir.StorageTarget):
                self.smup_analyze_site(site, contract, analysis)
            elif isinstance(site.target, ir.ExternalFetch):
                self.esup_detect(site, analysis)
            else:
                self.memory.note(f"line {site.line}: delegatecall target is a hard-coded address")
            analysis.evidence_found = len(self.memory.evidence) - before
            analyses.append(analysis)
        return self.report(analyses, hardcoded)

    # -- storage-managed delegation targets ---------------------------------

    def smup_analyze_site(self, site: ir.DelegatecallSite, contract: ir.DecompiledContract,
                          analysis: SiteAnalysis):
        primary = ImpactVariable(site.target.decl, Rank.PRIMARY, self.address)
        impact_vars = [primary] + auxiliary_impact_variables(contract, primary)
        analysis.primary, analysis.impact_vars = primary, impact_vars
        found = sum(upgrade_functions_for(contract, v, self.memory, via=Via.SMUP, design=Design.SMUP,
                                          site_line=site.line, primary=primary)
                    for v in impact_vars)
        if not found:
            self.dup_detect(impact_vars, self.dynamic, site.line)

    # -- delegate-managed upgrade targets ----------------------------------

    def dup_detect(self, impact_vars: list[ImpactVariable], impls, site_line: int, depth: int = 0):
        primary = impact_vars[0]
        if depth == 0 and primary.value_type is ir.ValueKind.MAPPING:
            facet = facet_address_or_zero(self.chain, self.address, DIAMOND_CUT_SELECTOR)
            if not facet.is_zero():
                self.memory.record(UpgradeEvidence(DIAMOND_CUT_SIGNATURE, None, facet, Via.DIAMOND_LOUPE,
                                                   Design.DUP_V3, site_line, primary=primary))
                return
        if depth >= self.config.max_depth:
            self.memory.note(f"DUP recursion stopped at depth {depth}")
            return
        design = Design.DUP_V1 if depth == 0 else Design.DUP_V2
        for impl in impls:
            if (impl, "dup") in self.memory.visited:
                continue
            self.memory.visited.add((impl, "dup"))
            contract = self.decompile(impl)
            if contract is None:
                continue
            found = 0
            for var in impact_vars:
                for decl in contract.decls_at(var.slot):
                    impl_primary = ImpactVariable(decl, Rank.PRIMARY, impl)
                    for v in [impl_primary] + auxiliary_impact_variables(contract, impl_primary):
                        found += upgrade_functions_for(contract, v, self.memory, via=Via.DUP, design=design,
                                                       site_line=site_line, primary=impl_primary)
            if not found:
                status = self.proxy_status_of(impl)
                if status.is_proxy:
                    self.dup_detect(impact_vars, status.ordered_implementations(), site_line, depth + 1)

    # -- externally fetched delegation targets ------------------------------

    def target_dependencies(self) -> list[tuple[Address, Selector | None]]:
        """The trace right before each delegation whose output carries the
        implementation address names the contract that supplied it."""
        found: dict[tuple[Address, Selector | None], None] = {}
        for pair in self.status.pairs:
            siblings = [t for t in self.store.children_of(pair.tx_hash, pair.parent_path)
                        if t.trace_path < pair.child_path]
            target = None
            for t in reversed(siblings):
                if hex_contains_address(t.output, pair.implementation):
                    target = t
                    break
            if target is None:
                calls = [t for t in siblings if t.call_type in (CallType.CALL, CallType.STATICCALL)]
                if not calls:
                    continue
                target = calls[-1]
                self.memory.note(f"low confidence: no preceding trace returns {pair.implementation} "
                                 f"in {pair.tx_hash}; using nearest call to {target.to}")
            found.setdefault((target.to, Selector.from_calldata(target.input)), None)
        return list(found)

    def esup_detect(self, site: ir.DelegatecallSite, analysis: SiteAnalysis):
        deps = self.target_dependencies()
        if not deps:
            self.memory.note(f"line {site.line}: no target dependency found in traces")
        for dep, selector in deps:
            if dep not in analysis.dependencies:
                analysis.dependencies.append(dep)
            self._esup_resolve(site, analysis, dep, selector, 0)

    def _esup_resolve(self, site, analysis, host: Address, selector: Selector | None, depth: int):
        if depth >= self.config.max_depth:
            self.memory.note(f"ESUP recursion stopped at depth {depth}")
            return
        if (host, "esup") in self.memory.visited:
            return
        self.memory.visited.add((host, "esup"))
        contract = self.decompile(host)
        if contract is None:
            return
        fn = contract.function_by_selector(selector) if selector else None
        if fn is None:
            status = self.proxy_status_of(host)
            if status.is_proxy:
                for impl in status.ordered_implementations():
                    self._esup_resolve(site, analysis, impl, selector, depth + 1)
                return
            fn = contract.function("_fallback")
            if fn is None:
                self.memory.note(f"{host}: target function not found and no fallback")
                return
        decl = returned_variable(contract, fn)
        if decl is None:
            self.memory.note(f"{host}: {fn.name} returns no storage variable")
            return
        primary = ImpactVariable(decl, Rank.PRIMARY, host)
        if analysis.primary is None:
            analysis.primary = primary
        design = Design.ESUP_V1 if depth == 0 else Design.ESUP_V2
        for v in [primary] + auxiliary_impact_variables(contract, primary):
            analysis.impact_vars.append(v)
            upgrade_functions_for(contract, v, self.memory, via=Via.ESUP, design=design,
                                  site_line=site.line, primary=primary)


def detect_upc(address: Address, proxy_status: ProxyStatus, store: Datastore, chain,
               config: DetectorConfig = DetectorConfig()) -> UpcReport:
    if not proxy_status.is_proxy:
        raise ValueError(f"{address} is not a proxy; layer 2 needs an active proxy")
    return _Analysis(address, proxy_status, store, chain, config).run()
