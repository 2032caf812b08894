"""Parser for Panoramix-style decompiled contracts.

The grammar is deliberately shallow. A source has a ``def storage:`` block of
``<name> is <type> at storage <slot> [offset N]`` lines and a series of
``def name(params):`` blocks. Function bodies become a flat, line-numbered
list of statements; anything the detectors do not consume is kept as
:class:`Other` so the parser never drops or rejects a line.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass

from .core import Address, InvalidSignature, Selector, StorageSlot, parse_address, selector_of


class EmptyContract(ValueError):
    """Decompiled text with neither storage declarations nor functions."""


class ValueKind(enum.Enum):
    ADDR = "Addr"
    UINT = "Uint"
    MAPPING = "Mapping"
    ARRAY = "Array"
    STRUCT = "Struct"
    OTHER = "Other"


@dataclass(frozen=True)
class StorageDecl:
    name: str
    slot: StorageSlot
    value_type: ValueKind
    line: int
    element_type: ValueKind | None = None  # value kind of a mapping/array
    type_text: str = ""


# -- statements --------------------------------------------------------------


@dataclass(frozen=True)
class Delegatecall:
    line: int
    text: str
    target_expr: str
    selector_expr: str | None
    args_expr: str | None


@dataclass(frozen=True)
class ExternalCall:
    line: int
    text: str
    callee_expr: str
    selector: Selector | None
    static: bool
    function_text: str = ""


@dataclass(frozen=True)
class Assignment:
    line: int
    text: str
    lvalue: str
    rvalue: str


@dataclass(frozen=True)
class CallerGuard:
    line: int
    text: str
    operator: str
    compared_to: str


@dataclass(frozen=True)
class Return:
    line: int
    text: str
    expr: str


@dataclass(frozen=True)
class Revert:
    line: int
    text: str


@dataclass(frozen=True)
class Other:
    line: int
    text: str


Statement = Delegatecall | ExternalCall | Assignment | CallerGuard | Return | Revert | Other


@dataclass(frozen=True)
class FunctionDef:
    name: str
    params: tuple[tuple[str, str], ...]
    body: tuple[Statement, ...]
    start_line: int
    end_line: int
    payable: bool = False
    selector: Selector | None = None

    @property
    def param_names(self) -> set[str]:
        return {name for _, name in self.params}

    @property
    def signature(self) -> str:
        """Canonical text form, e.g. ``upgradeTo(address)``."""
        return f"{self.name}({','.join(_canonical_type(t) for t, _ in self.params)})"

    def contains_line(self, line: int) -> bool:
        return self.start_line <= line <= self.end_line


@dataclass(frozen=True, eq=False)
class DecompiledContract:
    storage: tuple[StorageDecl, ...]
    functions: tuple[FunctionDef, ...]
    raw_lines: tuple[str, ...]

    def decls_named(self, name: str) -> list[StorageDecl]:
        return [d for d in self.storage if d.name == name]

    def decls_at(self, slot: StorageSlot, *, exact_offset: bool = True) -> list[StorageDecl]:
        if exact_offset:
            return [d for d in self.storage if d.slot == slot]
        return [d for d in self.storage if d.slot.same_slot(slot)]

    @property
    def storage_names(self) -> set[str]:
        return {d.name for d in self.storage}

    def function(self, name: str) -> FunctionDef | None:
        for fn in self.functions:
            if fn.name == name:
                return fn
        return None

    def function_by_selector(self, selector: Selector) -> FunctionDef | None:
        for fn in self.functions:
            if fn.selector == selector:
                return fn
        return None

    def function_at(self, line: int) -> FunctionDef | None:
        for fn in self.functions:
            if fn.contains_line(line):
                return fn
        return None

    def statements(self):
        for fn in self.functions:
            for stmt in fn.body:
                yield fn, stmt

    def statement_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for _, stmt in self.statements():
            kind = type(stmt).__name__
            counts[kind] = counts.get(kind, 0) + 1
        return counts


# -- expression helpers ------------------------------------------------------

_CAST = re.compile(r"(?:addr|address|uint\d*|int\d*|bytes\d*|bool)\((.*)\)", re.S)
_MASK = re.compile(r"Mask\(\s*\d+\s*,\s*\d+\s*,\s*(.*)\)", re.S)
_IDENT = re.compile(r"[A-Za-z_]\w*")
_FIELD = re.compile(r"\.field_(\d+)")
_RAW_STOR = re.compile(r"stor\[(0x[0-9a-fA-F]+|\d+)\]")


def _balanced(text: str) -> bool:
    depth = 0
    for ch in text:
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
            if depth < 0:
                return False
    return depth == 0


def strip_casts(expr: str) -> str:
    """Peel type casts and ``Mask(n, m, x)`` wrappers off an expression."""
    expr = expr.strip()
    while True:
        for pattern in (_CAST, _MASK):
            m = pattern.fullmatch(expr)
            if m and _balanced(m.group(1)):
                expr = m.group(1).strip()
                break
        else:
            return expr


def base_identifier(expr: str) -> str | None:
    core = strip_casts(expr)
    m = _IDENT.match(core)
    return m.group(0) if m else None


def field_offset(expr: str) -> int | None:
    m = _FIELD.search(strip_casts(expr))
    return int(m.group(1)) if m else None


def raw_slot_ref(expr: str) -> StorageSlot | None:
    """Slot of a ``stor[0x...]`` style reference, when present."""
    m = _RAW_STOR.fullmatch(strip_casts(expr))
    if not m:
        return None
    return _slot_from_literal(m.group(1))


_SLOT_LIMIT = 2 ** 64


def _slot_from_literal(text: str, offset: int = 0) -> StorageSlot:
    value = int(text, 16) if text.lower().startswith("0x") else int(text)
    if value >= _SLOT_LIMIT:
        return StorageSlot.of_hash(hex(value), offset)
    return StorageSlot.integer(value, offset)


_TYPE_ALIASES = {"addr": "address", "uint": "uint256", "int": "int256"}


def _canonical_type(t: str) -> str:
    t = t.strip()
    return _TYPE_ALIASES.get(t, t)


def _value_kind(type_text: str) -> ValueKind:
    t = type_text.strip()
    if t.startswith("mapping"):
        return ValueKind.MAPPING
    if t.startswith("array"):
        return ValueKind.ARRAY
    if t.startswith("struct"):
        return ValueKind.STRUCT
    if t in ("addr", "address"):
        return ValueKind.ADDR
    if re.fullmatch(r"u?int\d*", t):
        return ValueKind.UINT
    return ValueKind.OTHER


def _element_kind(type_text: str) -> ValueKind | None:
    m = re.match(r"(?:mapping|array) of (.+)", type_text.strip())
    return _value_kind(m.group(1)) if m else None


# -- parsing -----------------------------------------------------------------

_STORAGE_LINE = re.compile(
    r"(?P<name>[A-Za-z_]\w*) is (?P<type>.+?) at storage (?P<slot>0x[0-9a-fA-F]+|\d+)"
    r"(?: offset (?P<offset>\d+))?"
)
_DEF = re.compile(r"def\s+(?P<name>[A-Za-z_]\w*)\s*\((?P<params>.*)\)\s*(?P<mods>[\w\s]*):")
_UNKNOWN_NAME = re.compile(r"unknown([0-9a-fA-F]{8})")
_CALL = re.compile(
    r"(?P<static>static\s+)?call\s+(?P<callee>.+)\.(?P<fn>0x[0-9a-fA-F]{1,8}|[A-Za-z_]\w*\(.*\))"
    r"\s*(?:with:)?"
)
_GUARD_LEFT = re.compile(r"\bcaller\s*(==|!=)\s*(.+)")
_GUARD_RIGHT = re.compile(r"(.+?)\s*(==|!=)\s*caller\b")
_KEYWORDS = ("if ", "elif ", "else", "require ", "while ", "for ", "return", "revert",
             "log ", "call ", "static call", "delegate ", "stop", "selfdestruct", "create")
_CONTINUATION = ("funct ", "gas ", "args ", "value ", "wei", "funct:", "args:")


def _strip_comment(line: str) -> str:
    if line.lstrip().startswith("#"):
        return ""
    at = line.find(" #")
    if at != -1 and line.count("'", 0, at) % 2 == 0:
        line = line[:at]
    return line.rstrip()


def _indent(line: str) -> int:
    return len(line) - len(line.lstrip(" "))


def _split_params(text: str) -> tuple[tuple[str, str], ...]:
    text = text.strip()
    if not text:
        return ()
    params = []
    for i, part in enumerate(p.strip() for p in text.split(",")):
        bits = part.split()
        if len(bits) >= 2:
            params.append((bits[0], bits[-1]))
        elif bits:
            params.append((bits[0], f"_param{i + 1}"))
    return tuple(params)


def _function_selector(name: str, params) -> Selector | None:
    m = _UNKNOWN_NAME.fullmatch(name)
    if m:
        return Selector("0x" + m.group(1).lower())
    if name == "_fallback":
        return None
    try:
        return selector_of(f"{name}({','.join(_canonical_type(t) for t, _ in params)})")
    except InvalidSignature:
        return None


def _call_selector(fn_text: str) -> Selector | None:
    if fn_text.lower().startswith("0x"):
        return Selector.parse(fn_text)
    m = re.fullmatch(r"([A-Za-z_]\w*)\((.*)\)", fn_text)
    if not m:
        return None
    params = _split_params(m.group(2))
    try:
        return selector_of(f"{m.group(1)}({','.join(_canonical_type(t) for t, _ in params)})")
    except InvalidSignature:
        return None


def _classify(text: str, line: int, continuation: list[str]) -> Statement:
    if text.startswith("delegate ") or text == "delegate":
        target = text[len("delegate"):].strip()
        if target.endswith("with:"):
            target = target[: -len("with:")].strip()
        selector_expr = args_expr = None
        for extra in continuation:
            if extra.startswith("funct"):
                selector_expr = extra[len("funct"):].lstrip(": ").strip()
            elif extra.startswith("args"):
                args_expr = extra[len("args"):].lstrip(": ").strip()
        full = " ".join([text, *continuation])
        return Delegatecall(line, full, target, selector_expr, args_expr)

    m = _CALL.fullmatch(text)
    if m:
        full = " ".join([text, *continuation])
        return ExternalCall(line, full, m.group("callee").strip(), _call_selector(m.group("fn")),
                            bool(m.group("static")), m.group("fn"))

    cond = None
    for kw in ("if ", "elif ", "require ", "while "):
        if text.startswith(kw):
            cond = text[len(kw):].rstrip(":").strip()
            break
    if cond is not None:
        m = _GUARD_LEFT.search(cond)
        if m:
            return CallerGuard(line, text, m.group(1), m.group(2).strip())
        m = _GUARD_RIGHT.search(cond)
        if m and m.group(1).strip():
            return CallerGuard(line, text, m.group(2), m.group(1).strip())
        return Other(line, text)

    if text == "return" or text.startswith("return "):
        return Return(line, text, text[len("return"):].strip())
    if text.startswith("revert"):
        return Revert(line, text)

    if " = " in text and not text.startswith(_KEYWORDS):
        lvalue, rvalue = text.split(" = ", 1)
        lvalue = lvalue.strip()
        if lvalue and not re.search(r"[=!<>]$", lvalue) and _balanced(lvalue):
            return Assignment(line, text, lvalue, rvalue.strip())
    return Other(line, text)


def _parse_body(lines: list[tuple[int, str]]) -> tuple[Statement, ...]:
    body: list[Statement] = []
    i = 0
    while i < len(lines):
        lineno, raw = lines[i]
        text = raw.strip()
        indent = _indent(raw)
        i += 1
        continuation: list[str] = []
        folds = text.startswith("delegate") or bool(_CALL.fullmatch(text))
        if folds and text.endswith("with:"):
            while i < len(lines):
                nxt = lines[i][1]
                if _indent(nxt) > indent and nxt.strip().startswith(_CONTINUATION):
                    continuation.append(nxt.strip())
                    i += 1
                else:
                    break
        body.append(_classify(text, lineno, continuation))
    return tuple(body)


def parse(text: str) -> DecompiledContract:
    """Parse decompiled source text into a :class:`DecompiledContract`."""
    raw_lines = tuple(text.splitlines())
    storage: list[StorageDecl] = []
    functions: list[FunctionDef] = []
    section = None  # "storage" | FunctionDef header match
    header = None
    body_lines: list[tuple[int, str]] = []

    def close():
        if header is None:
            return
        m, lineno = header
        params = _split_params(m.group("params"))
        name = m.group("name")
        end = body_lines[-1][0] if body_lines else lineno
        functions.append(FunctionDef(
            name=name, params=params, body=_parse_body(body_lines), start_line=lineno,
            end_line=end, payable="payable" in m.group("mods"),
            selector=_function_selector(name, params)))

    for lineno, raw in enumerate(raw_lines, start=1):
        line = _strip_comment(raw.replace("\t", "    "))
        if not line.strip():
            continue
        if _indent(line) == 0:
            if line.startswith("def storage"):
                close()
                header, body_lines, section = None, [], "storage"
                continue
            m = _DEF.match(line)
            if m:
                close()
                header, body_lines, section = (m, lineno), [], "function"
                continue
            if section == "function" and line.strip() == "[...]":
                body_lines.append((lineno, line))
            continue
        if section == "storage":
            m = _STORAGE_LINE.fullmatch(line.strip())
            if m:
                type_text = m.group("type")
                storage.append(StorageDecl(
                    name=m.group("name"),
                    slot=_slot_from_literal(m.group("slot"), int(m.group("offset") or 0)),
                    value_type=_value_kind(type_text),
                    element_type=_element_kind(type_text),
                    line=lineno,
                    type_text=type_text))
        elif section == "function":
            body_lines.append((lineno, line))
    close()

    if not storage and not functions:
        raise EmptyContract("decompiled text has no storage declarations and no functions")
    return DecompiledContract(tuple(storage), tuple(functions), raw_lines)


# -- delegatecall sites ------------------------------------------------------


class SelectorMode(enum.Enum):
    CALLDATA_FORWARDED = "CalldataForwarded"
    HARDCODED_MATCHING = "HardcodedMatching"


CALLDATA_SELECTOR_FORMS = ("call.data[0 len 4]", "call.data[return_data.size len 4]")


@dataclass(frozen=True)
class StorageTarget:
    decl: StorageDecl


@dataclass(frozen=True)
class ExternalFetch:
    call: ExternalCall


@dataclass(frozen=True)
class HardcodedTarget:
    address: Address


Target = StorageTarget | ExternalFetch | HardcodedTarget


@dataclass(frozen=True)
class DelegatecallSite:
    function: FunctionDef
    statement: Delegatecall
    target: Target
    selector_mode: SelectorMode
    selector: Selector | None = None  # set for HardcodedMatching

    @property
    def line(self) -> int:
        return self.statement.line


def _normalize(expr: str) -> str:
    return re.sub(r"\s+", " ", expr.strip())


def selector_mode_of(stmt: Delegatecall, function: FunctionDef) -> tuple[SelectorMode, Selector | None] | None:
    """Property #2 at the decompiled level: calldata-forwarded selector, or a
    hard-coded selector identical to the enclosing function's own."""
    if stmt.selector_expr is None:
        return None
    expr = strip_casts(_normalize(stmt.selector_expr))
    if expr in CALLDATA_SELECTOR_FORMS:
        return SelectorMode.CALLDATA_FORWARDED, None
    if re.fullmatch(r"0x[0-9a-fA-F]{1,8}", expr):
        sel = Selector.parse(expr)
        if function.selector is not None and sel == function.selector:
            return SelectorMode.HARDCODED_MATCHING, sel
    return None


def pick_decl(contract: DecompiledContract, expr: str) -> StorageDecl | None:
    """Resolve a storage reference expression to its declaration."""
    slot = raw_slot_ref(expr)
    if slot is not None:
        found = contract.decls_at(slot, exact_offset=False)
        return found[0] if found else None
    name = base_identifier(expr)
    if name is None:
        return None
    candidates = contract.decls_named(name)
    if not candidates:
        return None
    offset = field_offset(expr) or 0
    at_offset = [d for d in candidates if d.slot.offset == offset] or candidates
    for d in at_offset:
        if d.value_type is ValueKind.ADDR:
            return d
    return at_offset[0]


def _resolve_target(contract: DecompiledContract, fn: FunctionDef, stmt: Delegatecall,
                    expr: str | None = None, hops: int = 0) -> Target | None:
    expr = stmt.target_expr if expr is None else expr
    core = strip_casts(expr)
    if re.fullmatch(r"0x[0-9a-fA-F]{40}", core):
        return HardcodedTarget(parse_address(core))
    before = [s for s in fn.body if s.line < stmt.line]
    if "return_data" in core or core.startswith("ext_call"):
        calls = [s for s in before if isinstance(s, ExternalCall)]
        return ExternalFetch(calls[-1]) if calls else None
    decl = pick_decl(contract, expr)
    if decl is not None:
        return StorageTarget(decl)
    # local temporaries: follow the latest assignment to the identifier once
    name = base_identifier(expr)
    if name and hops < 2:
        for s in reversed(before):
            if isinstance(s, Assignment) and base_identifier(s.lvalue) == name:
                return _resolve_target(contract, fn, stmt, s.rvalue, hops + 1)
    return None


def relevant_delegatecalls(contract: DecompiledContract) -> list[DelegatecallSite]:
    """Delegatecall statements that forward the caller's selector, in source order."""
    sites = []
    for fn, stmt in contract.statements():
        if not isinstance(stmt, Delegatecall):
            continue
        mode = selector_mode_of(stmt, fn)
        if mode is None:
            continue
        target = _resolve_target(contract, fn, stmt)
        if target is None:
            continue
        sites.append(DelegatecallSite(fn, stmt, target, mode[0], mode[1]))
    return sites


def lvalue_matches(lvalue: str, decl: StorageDecl, contract: DecompiledContract | None = None) -> bool:
    """True when an assignment target refers to ``decl``.

    Accepted forms: ``name``, ``name.field_k``, ``addr(name.field_k)``,
    ``uintN(name.field_k)``, ``name[key]`` and raw ``stor[slot]``.
    """
    slot = raw_slot_ref(lvalue)
    if slot is not None:
        return slot.same_slot(decl.slot)
    core = strip_casts(lvalue)
    m = re.fullmatch(r"([A-Za-z_]\w*)((?:\.field_\d+)|(?:\[.*\](?:\.field_\d+)?))?", core)
    return bool(m) and m.group(1) == decl.name


def assignments_to(contract: DecompiledContract, variable) -> list[Assignment]:
    """Every assignment whose lvalue resolves to ``variable``.

    ``variable`` may be a :class:`StorageDecl` or anything with ``name`` and
    ``slot`` attributes.
    """
    decl = variable if isinstance(variable, StorageDecl) else _as_decl(variable)
    return [s for _, s in contract.statements()
            if isinstance(s, Assignment) and lvalue_matches(s.lvalue, decl)]


def _as_decl(variable) -> StorageDecl:
    return StorageDecl(variable.name, variable.slot, getattr(variable, "value_type", ValueKind.OTHER), 0)


def caller_guard_before(site: DelegatecallSite) -> bool:
    return any(isinstance(s, CallerGuard) and s.line < site.line for s in site.function.body)


def assignment_function(contract: DecompiledContract, assignment: Assignment) -> FunctionDef:
    fn = contract.function_at(assignment.line)
    assert fn is not None, "assignments only appear inside function bodies"
    return fn


__all__ = [
    "Assignment", "CallerGuard", "DecompiledContract", "Delegatecall", "DelegatecallSite",
    "EmptyContract", "ExternalCall", "ExternalFetch", "FunctionDef", "HardcodedTarget", "Other",
    "Return", "Revert", "SelectorMode", "Statement", "StorageDecl", "StorageTarget", "ValueKind",
    "assignments_to", "base_identifier", "caller_guard_before", "parse", "pick_decl",
    "relevant_delegatecalls", "strip_casts",
]
