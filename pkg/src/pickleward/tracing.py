"""Static analysis of pickle programs without executing them.

The tracer abstractly interprets opcode streams: strings and resolved
global names flow through the stack and memo, everything else collapses to
an opaque value. That is enough to report which names a program imports,
invokes, and allocates, and to notice when a callee or a STACK_GLOBAL
operand was computed at runtime and therefore cannot be named statically.

The scanner layered on top matches the traced names against a denylist.
It is the fast triage tool, and it is honest about its own limits: names
that only materialize at runtime are reported as dynamic markers, not
resolved, so a scan verdict of clean is weaker than a restricted load.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import PolicyFileError
from .opcodes import OpcodeStream, classify, parse_programs
from .policy import QualifiedName

TRACE_SCHEMA = "pickleward-trace/1"
DENYLIST_SCHEMA = "pickleward-denylist/1"

MATCH_EXACT = "exact"
MATCH_MODULE_PREFIX = "module-prefix"


@dataclass(frozen=True)
class TraceReport:
    """Names and markers a static pass extracted from every program in a
    file, trailing programs included."""

    imports: frozenset[QualifiedName]
    invocations: frozenset[QualifiedName]
    allocations: frozenset[QualifiedName]
    forbidden_opcodes: tuple[tuple[str, int], ...]
    dynamic_invocations: tuple[int, ...]
    dynamic_imports: tuple[int, ...]
    has_trailing_programs: bool

    @property
    def has_dynamic_markers(self) -> bool:
        return bool(self.dynamic_invocations or self.dynamic_imports)


_OPAQUE = ("opaque",)
_MARK = ("mark",)


class _AbstractStack:
    """Stack that never underflows: missing operands become opaque."""

    __slots__ = ("items",)

    def __init__(self):
        self.items: list = []

    def push(self, value) -> None:
        self.items.append(value)

    def pop(self):
        if not self.items:
            return _OPAQUE
        value = self.items.pop()
        return _OPAQUE if value is _MARK else value

    def top(self):
        if not self.items or self.items[-1] is _MARK:
            return _OPAQUE
        return self.items[-1]

    def pop_to_mark(self) -> list:
        segment = []
        while self.items:
            value = self.items.pop()
            if value is _MARK:
                return list(reversed(segment))
            segment.append(value)
        return list(reversed(segment))


class _Tracer:
    def __init__(self):
        self.imports: set[QualifiedName] = set()
        self.invocations: set[QualifiedName] = set()
        self.allocations: set[QualifiedName] = set()
        self.forbidden: list[tuple[str, int]] = []
        self.dynamic_invocations: list[int] = []
        self.dynamic_imports: list[int] = []

    def run(self, stream: OpcodeStream) -> None:
        stack = _AbstractStack()
        memo: dict[int, object] = {}
        for op in stream.opcodes:
            self._step(op, stack, memo)

    def _name(self, module: str, attr: str, offset: int) -> tuple:
        try:
            qname = QualifiedName(module, attr)
        except ValueError:
            # Not a name Python's import system could ever resolve. Keep
            # the stream traceable and record that something unnameable
            # flowed through an import site.
            self.dynamic_imports.append(offset)
            return _OPAQUE
        self.imports.add(qname)
        return ("global", qname)

    def _step(self, op, stack: _AbstractStack, memo: dict) -> None:
        mn = op.mnemonic
        if mn in ("PROTO", "FRAME", "STOP"):
            if mn == "STOP":
                stack.pop()
            return
        if mn == "MARK":
            stack.push(_MARK)
        elif mn == "POP":
            stack.pop()
        elif mn == "POP_MARK":
            stack.pop_to_mark()
        elif mn == "DUP":
            stack.push(stack.top())
        elif mn in ("STRING", "BINSTRING", "SHORT_BINSTRING", "UNICODE",
                    "BINUNICODE", "BINUNICODE8", "SHORT_BINUNICODE"):
            stack.push(("str", op.arg) if isinstance(op.arg, str)
                       else _OPAQUE)
        elif mn == "GLOBAL":
            module, attr = op.arg
            stack.push(self._name(module, attr, op.offset))
        elif mn == "STACK_GLOBAL":
            attr = stack.pop()
            module = stack.pop()
            if (isinstance(module, tuple) and module[0] == "str"
                    and isinstance(attr, tuple) and attr[0] == "str"):
                stack.push(self._name(module[1], attr[1], op.offset))
            else:
                self.dynamic_imports.append(op.offset)
                stack.push(_OPAQUE)
        elif mn == "REDUCE":
            stack.pop()
            callee = stack.pop()
            if isinstance(callee, tuple) and callee[0] == "global":
                self.invocations.add(callee[1])
            else:
                self.dynamic_invocations.append(op.offset)
            stack.push(_OPAQUE)
        elif mn == "NEWOBJ":
            stack.pop()
            self._allocate(stack.pop(), op.offset)
            stack.push(_OPAQUE)
        elif mn == "NEWOBJ_EX":
            stack.pop()
            stack.pop()
            self._allocate(stack.pop(), op.offset)
            stack.push(_OPAQUE)
        elif mn == "BUILD":
            stack.pop()
        elif mn == "INST":
            stack.pop_to_mark()
            module, attr = op.arg
            ref = self._name(module, attr, op.offset)
            if isinstance(ref, tuple) and ref[0] == "global":
                self.invocations.add(ref[1])
            else:
                self.dynamic_invocations.append(op.offset)
            self.forbidden.append((mn, op.offset))
            stack.push(_OPAQUE)
        elif mn == "OBJ":
            segment = stack.pop_to_mark()
            cls = segment[0] if segment else _OPAQUE
            if isinstance(cls, tuple) and cls[0] == "global":
                self.invocations.add(cls[1])
            else:
                self.dynamic_invocations.append(op.offset)
            self.forbidden.append((mn, op.offset))
            stack.push(_OPAQUE)
        elif mn in ("EXT1", "EXT2", "EXT4"):
            self.forbidden.append((mn, op.offset))
            stack.push(_OPAQUE)
        elif mn == "NEXT_BUFFER":
            self.forbidden.append((mn, op.offset))
            stack.push(_OPAQUE)
        elif mn == "READONLY_BUFFER":
            self.forbidden.append((mn, op.offset))
        elif mn in ("TUPLE", "LIST", "FROZENSET"):
            stack.pop_to_mark()
            stack.push(_OPAQUE)
        elif mn == "DICT":
            stack.pop_to_mark()
            stack.push(_OPAQUE)
        elif mn in ("TUPLE1", "TUPLE2", "TUPLE3"):
            for _ in range(int(mn[-1])):
                stack.pop()
            stack.push(_OPAQUE)
        elif mn in ("APPEND", "SETITEM"):
            stack.pop()
            if mn == "SETITEM":
                stack.pop()
        elif mn in ("APPENDS", "SETITEMS", "ADDITEMS"):
            stack.pop_to_mark()
        elif mn in ("GET", "BINGET", "LONG_BINGET"):
            stack.push(memo.get(op.arg, _OPAQUE))
        elif mn in ("PUT", "BINPUT", "LONG_BINPUT"):
            memo[op.arg] = stack.top()
        elif mn == "MEMOIZE":
            memo[len(memo)] = stack.top()
        elif mn == "BINPERSID":
            stack.pop()
            stack.push(_OPAQUE)
        else:
            # Every remaining opcode pushes one data value.
            assert classify(mn).name == "DATA", mn
            stack.push(_OPAQUE)

    def _allocate(self, cls, offset: int) -> None:
        if isinstance(cls, tuple) and cls[0] == "global":
            self.allocations.add(cls[1])
        else:
            self.dynamic_invocations.append(offset)


def trace(stream: OpcodeStream) -> TraceReport:
    """Statically analyze every program in the stream's source bytes."""
    programs = parse_programs(stream.raw)
    tracer = _Tracer()
    for program in programs:
        tracer.run(program)
    return TraceReport(
        imports=frozenset(tracer.imports),
        invocations=frozenset(tracer.invocations),
        allocations=frozenset(tracer.allocations),
        forbidden_opcodes=tuple(tracer.forbidden),
        dynamic_invocations=tuple(tracer.dynamic_invocations),
        dynamic_imports=tuple(tracer.dynamic_imports),
        has_trailing_programs=len(programs) > 1,
    )


def report_text(report: TraceReport) -> str:
    lines = []

    def block(title: str, names: frozenset[QualifiedName]) -> None:
        lines.append(f"{title}:")
        if names:
            lines.extend(f"  {q.text}" for q in sorted(names))
        else:
            lines.append("  (none)")

    block("imports", report.imports)
    block("invocations", report.invocations)
    block("allocations", report.allocations)
    lines.append("forbidden opcodes:")
    if report.forbidden_opcodes:
        lines.extend(f"  {mn} at offset {off}"
                     for mn, off in report.forbidden_opcodes)
    else:
        lines.append("  (none)")
    lines.append("dynamic markers:")
    markers = ([f"  invocation with computed callee at offset {off}"
                for off in report.dynamic_invocations]
               + [f"  import with computed name at offset {off}"
                  for off in report.dynamic_imports])
    lines.extend(markers if markers else ["  (none)"])
    lines.append(f"trailing programs: "
                 f"{'yes' if report.has_trailing_programs else 'no'}")
    return "\n".join(lines) + "\n"


def report_json(report: TraceReport) -> str:
    doc = {
        "schema": TRACE_SCHEMA,
        "imports": sorted(q.text for q in report.imports),
        "invocations": sorted(q.text for q in report.invocations),
        "allocations": sorted(q.text for q in report.allocations),
        "forbidden_opcodes": [
            {"opcode": mn, "offset": off}
            for mn, off in report.forbidden_opcodes
        ],
        "dynamic_invocations": list(report.dynamic_invocations),
        "dynamic_imports": list(report.dynamic_imports),
        "has_trailing_programs": report.has_trailing_programs,
    }
    return json.dumps(doc, indent=2) + "\n"


# -- denylist scanning ---------------------------------------------------

@dataclass(frozen=True)
class Denylist:
    """Names a scan refuses, matched exactly or by module prefix."""

    denied: frozenset[QualifiedName]
    match_mode: str = MATCH_EXACT

    def __post_init__(self):
        if not self.denied:
            raise ValueError("a denylist must name at least one entry")
        if self.match_mode not in (MATCH_EXACT, MATCH_MODULE_PREFIX):
            raise ValueError(f"unknown match mode {self.match_mode!r}")

    def matches(self, name: QualifiedName) -> bool:
        if self.match_mode == MATCH_EXACT:
            return name in self.denied
        for denied in self.denied:
            if name == denied:
                return True
            if (name.module == denied.module
                    or name.module.startswith(denied.module + ".")):
                return True
        return False


@dataclass(frozen=True)
class ScanVerdict:
    flagged: bool
    matched: tuple[str, ...]

    @property
    def label(self) -> str:
        return "Flagged" if self.flagged else "Clean"


def scan(stream: OpcodeStream, denylist: Denylist) -> ScanVerdict:
    """Match statically traced names against a denylist.

    Dynamic markers deliberately do not flag: the scanner reports what it
    can prove from names in the byte stream, nothing more.
    """
    report = trace(stream)
    matched = sorted(
        {q.text for q in (report.imports | report.invocations)
         if denylist.matches(q)})
    return ScanVerdict(flagged=bool(matched), matched=tuple(matched))


def read_denylist(path: Path | str) -> Denylist:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise PolicyFileError(f"{path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise PolicyFileError(f"{path}: not valid JSON ({exc})") from exc
    return _denylist_from_document(doc, str(path))


def _denylist_from_document(doc: object, where: str) -> Denylist:
    if not isinstance(doc, dict):
        raise PolicyFileError(f"{where}: document is not an object")
    if doc.get("schema") != DENYLIST_SCHEMA:
        raise PolicyFileError(
            f"{where}: unsupported schema {doc.get('schema')!r}")
    mode = doc.get("match_mode", MATCH_EXACT)
    raw = doc.get("denied")
    if not (isinstance(raw, list) and raw
            and all(isinstance(item, str) for item in raw)):
        raise PolicyFileError(f"{where}: key 'denied' has wrong type")
    try:
        denied = frozenset(QualifiedName.from_text(item) for item in raw)
        return Denylist(denied=denied, match_mode=mode)
    except ValueError as exc:
        raise PolicyFileError(f"{where}: {exc}") from exc


def load_default_denylist() -> Denylist:
    text = (resources.files("pickleward") / "data"
            / "denylist.json").read_text(encoding="utf-8")
    return _denylist_from_document(json.loads(text), "default denylist")
