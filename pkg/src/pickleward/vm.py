"""Execution engine for parsed pickle programs.

Runs in two modes. Restricted mode enforces a policy: imports outside the
policy's allowed set become inert stubs, invocations outside the allowed
invocation set stop execution, and the legacy/extension opcodes are refused
outright. Unrestricted mode is the permissive reference used for
differential comparison and overhead measurement; it builds the same
neutral graph without consulting any policy.

Neither mode ever imports a module, allocates a library object, or calls
anything: REDUCE, NEWOBJ, and BUILD record what a real loader would have
done into :mod:`pickleward.graph` nodes.

Enforcement is lazy on imports by design. A model that merely references a
disallowed name still loads (the reference becomes a stub); the violation
fires only when the program tries to use the stub as a callee, a
construction target, or a mutation target. Denied invocations of allowed
imports are hard errors: the name was vetted for referencing, not calling.

Two hardening rules apply in both modes: forbidden opcodes (OBJ, INST, the
extension-registry opcodes, and the out-of-band buffer opcodes, which have
no buffer channel here) always raise, and persistent-id opcodes always
succeed as plain data references.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .errors import (
    DepthExceeded,
    ForbiddenOpcode,
    InvocationDenied,
    MemoExceeded,
    MemoMiss,
    StackUnderflow,
    StubInvocation,
    StubsPresent,
    TypeViolation,
)
from .graph import (
    CallableRef,
    Map,
    Node,
    OpaqueInstance,
    PersistentRef,
    Scalar,
    Seq,
    Stub,
    list_stubs,
    node_key,
)
from .opcodes import Opcode, OpcodeStream
from .policy import Policy

DEFAULT_MAX_DEPTH = 4096
DEFAULT_MAX_MEMO = 1_000_000

_RENAME_GUARDED = ("__name__", "__module__")

# Constructors the machine folds into native container nodes. Protocols
# below 4 have no set/frozenset opcodes; the stock pickler emits
# GLOBAL builtins.set + REDUCE instead, so these must work under any
# policy, exactly like the native opcodes do. The __builtin__ spellings
# are what protocol-2 streams actually carry.
_NATIVE_SET_NAMES = frozenset(
    f"{mod}.set" for mod in ("builtins", "__builtin__"))
_NATIVE_FROZENSET_NAMES = frozenset(
    f"{mod}.frozenset" for mod in ("builtins", "__builtin__"))
_NATIVE_CONSTRUCTORS = _NATIVE_SET_NAMES | _NATIVE_FROZENSET_NAMES


@dataclass(frozen=True)
class VmConfig:
    """Execution mode plus resource bounds."""

    policy: Policy | None = None
    max_depth: int = DEFAULT_MAX_DEPTH
    max_memo: int = DEFAULT_MAX_MEMO

    @property
    def restricted(self) -> bool:
        return self.policy is not None

    @classmethod
    def restricted_mode(cls, policy: Policy, **kw) -> "VmConfig":
        return cls(policy=policy, **kw)

    @classmethod
    def unrestricted_mode(cls, **kw) -> "VmConfig":
        return cls(policy=None, **kw)


@dataclass
class ExecutionTrace:
    """What the machine observed: every event carries its opcode offset."""

    imports: list[tuple[str, int, str]] = field(default_factory=list)
    invocations: list[tuple[str, int]] = field(default_factory=list)
    allocations: list[tuple[str, int]] = field(default_factory=list)
    stubs: list[tuple[str, int]] = field(default_factory=list)
    tainted: list[tuple[str, str, int]] = field(default_factory=list)
    dynamic_invocations: list[int] = field(default_factory=list)

    @property
    def import_names(self) -> frozenset[str]:
        return frozenset(name for name, _, _ in self.imports)

    @property
    def invocation_names(self) -> frozenset[str]:
        return frozenset(name for name, _ in self.invocations)

    @property
    def allocation_names(self) -> frozenset[str]:
        return frozenset(name for name, _ in self.allocations)


@dataclass
class VmStats:
    opcode_count: int
    wall_time: float


@dataclass
class VmOutcome:
    result: Node
    trace: ExecutionTrace
    stats: VmStats


class _Machine:
    def __init__(self, config: VmConfig):
        self.config = config
        policy = config.policy
        self._imports = policy.import_texts if policy else None
        self._invocations = policy.invocation_texts if policy else None
        self.stack: list[Node] = []
        self.marks: list[int] = []
        self.memo: dict[int, Node] = {}
        self.trace = ExecutionTrace()
        self.result: Node | None = None
        self.done = False

    # -- stack helpers --------------------------------------------------

    def push(self, node: Node, offset: int) -> None:
        if len(self.stack) >= self.config.max_depth:
            raise DepthExceeded(self.config.max_depth, offset)
        self.stack.append(node)

    def pop(self, offset: int) -> Node:
        if not self.stack or (self.marks and len(self.stack) <= self.marks[-1]):
            raise StackUnderflow(offset)
        return self.stack.pop()

    def top(self, offset: int) -> Node:
        if not self.stack or (self.marks and len(self.stack) <= self.marks[-1]):
            raise StackUnderflow(offset)
        return self.stack[-1]

    def pop_segment(self, offset: int) -> list[Node]:
        if not self.marks:
            raise StackUnderflow(offset)
        base = self.marks.pop()
        items = self.stack[base:]
        del self.stack[base:]
        return items

    def memo_put(self, key: int, offset: int) -> None:
        if key not in self.memo and len(self.memo) >= self.config.max_memo:
            raise MemoExceeded(self.config.max_memo, offset)
        self.memo[key] = self.top(offset)

    # -- import/invoke/build --------------------------------------------

    def resolve_import(self, name: str, offset: int) -> Node:
        if name in _NATIVE_CONSTRUCTORS:
            self.trace.imports.append((name, offset, "native"))
            return CallableRef(name, offset)
        if self._imports is not None and name not in self._imports:
            stub = Stub(name, offset)
            self.trace.imports.append((name, offset, "stubbed"))
            self.trace.stubs.append((name, offset))
            return stub
        self.trace.imports.append((name, offset, "allowed"))
        return CallableRef(name, offset)

    def invoke(self, callee: Node, args: Seq, offset: int) -> Node:
        if isinstance(callee, Stub):
            callee.touched = True
            raise StubInvocation(callee.name, offset)
        if isinstance(callee, CallableRef):
            if callee.name in _NATIVE_CONSTRUCTORS:
                self.trace.invocations.append((callee.name, offset))
                return self._fold_native(callee.name, args, offset)
            if (self._invocations is not None
                    and callee.name not in self._invocations):
                raise InvocationDenied(callee.name, offset)
            self.trace.invocations.append((callee.name, offset))
            return OpaqueInstance(callee.name, "reduced", list(args.items),
                                  offset)
        if isinstance(callee, OpaqueInstance):
            # The callee was computed at runtime; its identity cannot be
            # checked against any allowlist, so restricted mode refuses it.
            if self._imports is not None:
                raise InvocationDenied("<computed callable>", offset)
            self.trace.dynamic_invocations.append(offset)
            return OpaqueInstance(None, "reduced", list(args.items), offset,
                                  callee=callee)
        raise TypeViolation(f"{_kind_of(callee)} is not callable", offset)

    def _fold_native(self, name: str, args: Seq, offset: int) -> Node:
        kind = "set" if name in _NATIVE_SET_NAMES else "frozenset"
        out = Seq(kind, [])
        if len(args.items) > 1:
            raise TypeViolation(f"{name} takes at most one argument", offset)
        if args.items:
            source = args.items[0]
            if not isinstance(source, Seq):
                raise TypeViolation(
                    f"{name} argument is not a sequence", offset)
            for item in source.items:
                _set_add(out, item, offset)
        return out

    def allocate(self, cls: Node, args: Seq, kwargs: Map | None,
                 offset: int) -> Node:
        if isinstance(cls, Stub):
            cls.touched = True
            raise StubInvocation(cls.name, offset)
        if isinstance(cls, CallableRef):
            if cls.name in _NATIVE_CONSTRUCTORS:
                # NEWOBJ on set/frozenset folds like REDUCE does; the
                # stock pickler never emits it but a crafted stream can.
                self.trace.allocations.append((cls.name, offset))
                return self._fold_native(cls.name, args, offset)
            if self._imports is not None:
                assert cls.name in self._imports
            self.trace.allocations.append((cls.name, offset))
            return OpaqueInstance(cls.name, "allocated", list(args.items),
                                  offset, kwargs=kwargs)
        if isinstance(cls, OpaqueInstance):
            if self._imports is not None:
                raise InvocationDenied("<computed class>", offset)
            self.trace.dynamic_invocations.append(offset)
            return OpaqueInstance(None, "allocated", list(args.items), offset,
                                  kwargs=kwargs, callee=cls)
        raise TypeViolation(f"{_kind_of(cls)} is not a class", offset)

    def apply_state(self, target: Node, state: Node, offset: int) -> None:
        if isinstance(target, Stub):
            target.touched = True
            raise StubInvocation(target.name, offset)
        if isinstance(target, OpaqueInstance):
            target.state = state
            return
        if isinstance(target, CallableRef):
            for part in _state_maps(state, offset):
                for key, value in part.pairs:
                    if (isinstance(key, Scalar) and key.kind == "string"
                            and key.value in _RENAME_GUARDED):
                        target.tainted.append(key.value)
                        self.trace.tainted.append(
                            (target.name, key.value, offset))
                        continue
                    if target.attrs is None:
                        target.attrs = Map()
                    target.attrs.set(key, value, offset)
            return
        raise TypeViolation(
            f"BUILD target is {_kind_of(target)}", offset)


def _kind_of(node: Node) -> str:
    return getattr(node, "kind", type(node).__name__)


def _state_maps(state: Node, offset: int) -> list[Map]:
    """State for a BUILD may be a dict or a (dict, slot-dict) pair."""
    if isinstance(state, Map):
        return [state]
    if isinstance(state, Seq) and state.kind == "tuple" \
            and len(state.items) == 2:
        parts = []
        for item in state.items:
            if isinstance(item, Map):
                parts.append(item)
            elif not (isinstance(item, Scalar) and item.kind == "none"):
                raise TypeViolation("callable state is not a dict", offset)
        return parts
    raise TypeViolation("callable state is not a dict", offset)


def _set_add(target: Seq, node: Node, offset: int) -> None:
    mirror = node_key(node, offset)
    for existing in target.items:
        if node_key(existing, offset) == mirror:
            return
    target.items.append(node)


# -- opcode handlers ----------------------------------------------------------

def _op_proto(m: _Machine, op: Opcode) -> None:
    if not isinstance(op.arg, int) or not (0 <= op.arg <= 5):
        raise TypeViolation(f"unsupported protocol {op.arg!r}", op.offset)


def _op_frame(m: _Machine, op: Opcode) -> None:
    pass


def _op_stop(m: _Machine, op: Opcode) -> None:
    m.result = m.pop(op.offset)
    m.done = True


def _op_mark(m: _Machine, op: Opcode) -> None:
    m.marks.append(len(m.stack))


def _op_pop(m: _Machine, op: Opcode) -> None:
    above = m.marks[-1] if m.marks else 0
    if len(m.stack) > above:
        m.stack.pop()
    elif m.marks:
        m.marks.pop()
    else:
        raise StackUnderflow(op.offset)


def _op_pop_mark(m: _Machine, op: Opcode) -> None:
    m.pop_segment(op.offset)


def _op_dup(m: _Machine, op: Opcode) -> None:
    m.push(m.top(op.offset), op.offset)


def _op_none(m: _Machine, op: Opcode) -> None:
    m.push(Scalar("none", None), op.offset)


def _op_true(m: _Machine, op: Opcode) -> None:
    m.push(Scalar("bool", True), op.offset)


def _op_false(m: _Machine, op: Opcode) -> None:
    m.push(Scalar("bool", False), op.offset)


def _op_int_line(m: _Machine, op: Opcode) -> None:
    kind = "bool" if isinstance(op.arg, bool) else "int"
    m.push(Scalar(kind, op.arg), op.offset)


def _op_int(m: _Machine, op: Opcode) -> None:
    m.push(Scalar("int", op.arg), op.offset)


def _op_float(m: _Machine, op: Opcode) -> None:
    m.push(Scalar("float", op.arg), op.offset)


def _op_string(m: _Machine, op: Opcode) -> None:
    if op.raw_text:
        m.push(Scalar("bytes", op.arg), op.offset)
    else:
        m.push(Scalar("string", op.arg), op.offset)


def _op_bytes(m: _Machine, op: Opcode) -> None:
    m.push(Scalar("bytes", op.arg), op.offset)


def _op_empty_list(m: _Machine, op: Opcode) -> None:
    m.push(Seq("list", []), op.offset)


def _op_empty_tuple(m: _Machine, op: Opcode) -> None:
    m.push(Seq("tuple", []), op.offset)


def _op_empty_dict(m: _Machine, op: Opcode) -> None:
    m.push(Map(), op.offset)


def _op_empty_set(m: _Machine, op: Opcode) -> None:
    m.push(Seq("set", []), op.offset)


def _op_tuple(m: _Machine, op: Opcode) -> None:
    m.push(Seq("tuple", m.pop_segment(op.offset)), op.offset)


def _tuple_n(n: int):
    def handler(m: _Machine, op: Opcode) -> None:
        items = [m.pop(op.offset) for _ in range(n)]
        items.reverse()
        m.push(Seq("tuple", items), op.offset)

    return handler


def _op_list(m: _Machine, op: Opcode) -> None:
    m.push(Seq("list", m.pop_segment(op.offset)), op.offset)


def _op_dict(m: _Machine, op: Opcode) -> None:
    items = m.pop_segment(op.offset)
    if len(items) % 2:
        raise TypeViolation("odd number of dict initializers", op.offset)
    mapping = Map()
    for i in range(0, len(items), 2):
        mapping.set(items[i], items[i + 1], op.offset)
    m.push(mapping, op.offset)


def _op_frozenset(m: _Machine, op: Opcode) -> None:
    items = m.pop_segment(op.offset)
    fs = Seq("frozenset", [])
    for item in items:
        _set_add(fs, item, op.offset)
    m.push(fs, op.offset)


def _op_append(m: _Machine, op: Opcode) -> None:
    value = m.pop(op.offset)
    _extend(m, m.top(op.offset), [value], op.offset)


def _op_appends(m: _Machine, op: Opcode) -> None:
    values = m.pop_segment(op.offset)
    _extend(m, m.top(op.offset), values, op.offset)


def _extend(m: _Machine, target: Node, values: list[Node],
            offset: int) -> None:
    if isinstance(target, Seq) and target.kind == "list":
        target.items.extend(values)
        return
    if isinstance(target, OpaqueInstance):
        target.appends.extend(values)
        return
    if isinstance(target, Stub):
        target.touched = True
        raise StubInvocation(target.name, offset)
    raise TypeViolation(f"APPEND target is {_kind_of(target)}", offset)


def _op_setitem(m: _Machine, op: Opcode) -> None:
    value = m.pop(op.offset)
    key = m.pop(op.offset)
    _set_items(m, m.top(op.offset), [(key, value)], op.offset)


def _op_setitems(m: _Machine, op: Opcode) -> None:
    items = m.pop_segment(op.offset)
    if len(items) % 2:
        raise TypeViolation("odd number of SETITEMS operands", op.offset)
    pairs = [(items[i], items[i + 1]) for i in range(0, len(items), 2)]
    _set_items(m, m.top(op.offset), pairs, op.offset)


def _set_items(m: _Machine, target: Node,
               pairs: list[tuple[Node, Node]], offset: int) -> None:
    if isinstance(target, Map):
        for key, value in pairs:
            target.set(key, value, offset)
        return
    if isinstance(target, OpaqueInstance):
        target.items.extend(pairs)
        return
    if isinstance(target, Stub):
        target.touched = True
        raise StubInvocation(target.name, offset)
    raise TypeViolation(f"SETITEM target is {_kind_of(target)}", offset)


def _op_additems(m: _Machine, op: Opcode) -> None:
    values = m.pop_segment(op.offset)
    target = m.top(op.offset)
    if isinstance(target, Seq) and target.kind == "set":
        for value in values:
            _set_add(target, value, op.offset)
        return
    if isinstance(target, OpaqueInstance):
        target.appends.extend(values)
        return
    if isinstance(target, Stub):
        target.touched = True
        raise StubInvocation(target.name, op.offset)
    raise TypeViolation(f"ADDITEMS target is {_kind_of(target)}", op.offset)


def _op_get(m: _Machine, op: Opcode) -> None:
    node = m.memo.get(op.arg)
    if node is None:
        raise MemoMiss(op.arg, op.offset)
    m.push(node, op.offset)


def _op_put(m: _Machine, op: Opcode) -> None:
    m.memo_put(op.arg, op.offset)


def _op_memoize(m: _Machine, op: Opcode) -> None:
    m.memo_put(len(m.memo), op.offset)


def _op_persid(m: _Machine, op: Opcode) -> None:
    pid = (Scalar("bytes", op.arg) if op.raw_text
           else Scalar("string", op.arg))
    m.push(PersistentRef(pid), op.offset)


def _op_binpersid(m: _Machine, op: Opcode) -> None:
    m.push(PersistentRef(m.pop(op.offset)), op.offset)


def _op_global(m: _Machine, op: Opcode) -> None:
    module, qualname = op.arg
    m.push(m.resolve_import(f"{module}.{qualname}", op.offset), op.offset)


def _op_stack_global(m: _Machine, op: Opcode) -> None:
    qualname = m.pop(op.offset)
    module = m.pop(op.offset)
    for part in (module, qualname):
        if not (isinstance(part, Scalar) and part.kind == "string"):
            raise TypeViolation("STACK_GLOBAL operand is not a string",
                                op.offset)
    m.push(m.resolve_import(f"{module.value}.{qualname.value}", op.offset),
           op.offset)


def _args_tuple(node: Node, offset: int) -> Seq:
    if not (isinstance(node, Seq) and node.kind == "tuple"):
        raise TypeViolation("argument list is not a tuple", offset)
    return node


def _op_reduce(m: _Machine, op: Opcode) -> None:
    args = _args_tuple(m.pop(op.offset), op.offset)
    callee = m.top(op.offset)
    m.stack[-1] = m.invoke(callee, args, op.offset)


def _op_newobj(m: _Machine, op: Opcode) -> None:
    args = _args_tuple(m.pop(op.offset), op.offset)
    cls = m.pop(op.offset)
    m.push(m.allocate(cls, args, None, op.offset), op.offset)


def _op_newobj_ex(m: _Machine, op: Opcode) -> None:
    kwargs = m.pop(op.offset)
    if not isinstance(kwargs, Map):
        raise TypeViolation("NEWOBJ_EX keywords are not a dict", op.offset)
    args = _args_tuple(m.pop(op.offset), op.offset)
    cls = m.pop(op.offset)
    m.push(m.allocate(cls, args, kwargs if kwargs.pairs else None, op.offset),
           op.offset)


def _op_build(m: _Machine, op: Opcode) -> None:
    state = m.pop(op.offset)
    m.apply_state(m.top(op.offset), state, op.offset)


def _op_forbidden(m: _Machine, op: Opcode) -> None:
    raise ForbiddenOpcode(op.mnemonic, op.offset)


_DISPATCH = {
    "PROTO": _op_proto,
    "FRAME": _op_frame,
    "STOP": _op_stop,
    "MARK": _op_mark,
    "POP": _op_pop,
    "POP_MARK": _op_pop_mark,
    "DUP": _op_dup,
    "NONE": _op_none,
    "NEWTRUE": _op_true,
    "NEWFALSE": _op_false,
    "INT": _op_int_line,
    "BININT": _op_int,
    "BININT1": _op_int,
    "BININT2": _op_int,
    "LONG": _op_int,
    "LONG1": _op_int,
    "LONG4": _op_int,
    "FLOAT": _op_float,
    "BINFLOAT": _op_float,
    "STRING": _op_string,
    "BINSTRING": _op_string,
    "SHORT_BINSTRING": _op_string,
    "UNICODE": _op_string,
    "BINUNICODE": _op_string,
    "BINUNICODE8": _op_string,
    "SHORT_BINUNICODE": _op_string,
    "BINBYTES": _op_bytes,
    "SHORT_BINBYTES": _op_bytes,
    "BINBYTES8": _op_bytes,
    "BYTEARRAY8": _op_bytes,
    "EMPTY_LIST": _op_empty_list,
    "EMPTY_TUPLE": _op_empty_tuple,
    "EMPTY_DICT": _op_empty_dict,
    "EMPTY_SET": _op_empty_set,
    "TUPLE": _op_tuple,
    "TUPLE1": _tuple_n(1),
    "TUPLE2": _tuple_n(2),
    "TUPLE3": _tuple_n(3),
    "LIST": _op_list,
    "DICT": _op_dict,
    "FROZENSET": _op_frozenset,
    "APPEND": _op_append,
    "APPENDS": _op_appends,
    "SETITEM": _op_setitem,
    "SETITEMS": _op_setitems,
    "ADDITEMS": _op_additems,
    "GET": _op_get,
    "BINGET": _op_get,
    "LONG_BINGET": _op_get,
    "PUT": _op_put,
    "BINPUT": _op_put,
    "LONG_BINPUT": _op_put,
    "MEMOIZE": _op_memoize,
    "PERSID": _op_persid,
    "BINPERSID": _op_binpersid,
    "GLOBAL": _op_global,
    "STACK_GLOBAL": _op_stack_global,
    "REDUCE": _op_reduce,
    "NEWOBJ": _op_newobj,
    "NEWOBJ_EX": _op_newobj_ex,
    "BUILD": _op_build,
    "OBJ": _op_forbidden,
    "INST": _op_forbidden,
    "EXT1": _op_forbidden,
    "EXT2": _op_forbidden,
    "EXT4": _op_forbidden,
    "NEXT_BUFFER": _op_forbidden,
    "READONLY_BUFFER": _op_forbidden,
}


def execute(stream: OpcodeStream, config: VmConfig) -> VmOutcome:
    """Run the stream's first program to its STOP and return the graph.

    Raises SecurityViolation subclasses on policy and hardening stops, and
    other VmError subclasses when the program is malformed or exceeds
    resource bounds. Only the first program executes; trailing programs are
    never run (the tracer reports them).
    """
    machine = _Machine(config)
    dispatch = _DISPATCH
    started = time.perf_counter()
    count = 0
    for op in stream.opcodes:
        count += 1
        dispatch[op.mnemonic](machine, op)
        if machine.done:
            break
    wall = time.perf_counter() - started
    assert machine.done and machine.result is not None
    return VmOutcome(
        result=machine.result,
        trace=machine.trace,
        stats=VmStats(opcode_count=count, wall_time=wall),
    )


def assert_no_stubs(outcome: VmOutcome) -> None:
    """Strict-mode check: raise StubsPresent if any stub is reachable."""
    stubs = list_stubs(outcome.result)
    if stubs:
        raise StubsPresent(tuple(f"{path or '$'}: {name}"
                                 for path, name in stubs))
