"""Neutral object graph built by the machine, plus its canonical text form.

The machine never materializes real library objects. Everything a pickle
program constructs is represented by the small node vocabulary here:
scalars, containers, callable references, opaque instances (allocated or
produced by an invocation), persistent-id references, and stubs standing in
for imports a policy did not allow.

``canonical_dump`` renders a graph as deterministic text (versioned header
``pickleward-dump v1``). The grammar is JSON-flavored: scalars use JSON
lexemes (floats by shortest round-trip repr, with bare ``inf``/``-inf``/
``nan`` tokens), every compound node is a tagged array, set elements are
ordered by their rendered text, and nodes reachable more than once are
labeled ``["&",k,...]`` at first occurrence and referenced as ``["*",k]``
afterwards, which also makes cycles printable. Two graphs with the same
dump are structurally identical; byte-identical output is stable across
runs and platforms.

``list_stubs`` walks a graph and reports every distinct stub node once,
with a deterministic path expression such as ``.state['optimizer']``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import UnhashableKey

DUMP_HEADER = "pickleward-dump v1"


@dataclass(slots=True, eq=False)
class Scalar:
    kind: str  # none | bool | int | float | string | bytes
    value: object


@dataclass(slots=True, eq=False)
class Seq:
    kind: str  # tuple | list | set | frozenset
    items: list


@dataclass(slots=True, eq=False)
class Map:
    kind = "dict"
    pairs: list = field(default_factory=list)
    _index: dict = field(default_factory=dict, repr=False)

    def set(self, key, value, offset: int = -1) -> None:
        """Insert or overwrite, mirroring dict assignment semantics."""
        mirror = node_key(key, offset)
        slot = self._index.get(mirror)
        if slot is None:
            self._index[mirror] = len(self.pairs)
            self.pairs.append((key, value))
        else:
            self.pairs[slot] = (self.pairs[slot][0], value)


@dataclass(slots=True, eq=False)
class CallableRef:
    """A resolved import: a class or function referenced by qualified name."""

    kind = "callable"
    name: str
    offset: int
    attrs: Map | None = None
    tainted: list[str] = field(default_factory=list)


@dataclass(slots=True, eq=False)
class OpaqueInstance:
    """Result of an allocation or invocation; construction is recorded,
    nothing is executed."""

    kind = "instance"
    class_name: str | None  # None when the callee was a computed value
    mode: str  # allocated | reduced
    args: list
    offset: int
    kwargs: Map | None = None
    state: object | None = None
    items: list = field(default_factory=list)  # recorded obj[k] = v writes
    appends: list = field(default_factory=list)  # recorded obj.append(v)
    tainted: list[str] = field(default_factory=list)
    callee: object | None = None  # node, for computed callees


@dataclass(slots=True, eq=False)
class PersistentRef:
    """Out-of-band reference delivered via PERSID/BINPERSID; always data."""

    kind = "persistent"
    pid: object


@dataclass(slots=True, eq=False)
class Stub:
    """Inert placeholder for an import the policy did not allow."""

    kind = "stub"
    name: str
    offset: int
    touched: bool = False


Node = object

_SHAREABLE_SEQ = {"tuple", "list", "set", "frozenset"}
# Kinds the reference pickler memoizes; only these can be legitimately
# shared in a pickle's byte stream, so only these earn sharing labels.
_LABEL_SCALARS = {"string", "bytes"}


def node_key(node: Node, offset: int = -1):
    """Hashable mirror of a node, following Python key-equality semantics.

    Scalars compare by value (so 1, 1.0 and True collide in a dict, as they
    do in Python); tuples and frozensets compare structurally; references,
    instances, and stubs compare by identity. Raises UnhashableKey for
    lists, dicts, and sets.
    """
    if isinstance(node, Scalar):
        return node.value
    if isinstance(node, Seq):
        if node.kind == "tuple":
            return ("t",) + tuple(node_key(i, offset) for i in node.items)
        if node.kind == "frozenset":
            return ("f", frozenset(node_key(i, offset) for i in node.items))
        raise UnhashableKey(node.kind, offset)
    if isinstance(node, Map):
        raise UnhashableKey("dict", offset)
    return ("id", id(node))


def is_hashable(node: Node) -> bool:
    try:
        node_key(node)
    except UnhashableKey:
        return False
    return True


def _label_eligible(node: Node) -> bool:
    if isinstance(node, Scalar):
        return node.kind in _LABEL_SCALARS and len(node.value) > 0
    if isinstance(node, Seq):
        if node.kind in ("tuple", "frozenset") and not node.items:
            return False
        return True
    if isinstance(node, (Map, CallableRef, OpaqueInstance, Stub)):
        return True
    return False


def _children(node: Node) -> list[Node]:
    if isinstance(node, Seq):
        return list(node.items)
    if isinstance(node, Map):
        return [n for pair in node.pairs for n in pair]
    if isinstance(node, CallableRef):
        return [node.attrs] if node.attrs is not None else []
    if isinstance(node, OpaqueInstance):
        out: list[Node] = []
        if node.callee is not None:
            out.append(node.callee)
        out.extend(node.args)
        if node.kwargs is not None:
            out.append(node.kwargs)
        if node.state is not None:
            out.append(node.state)
        for k, v in node.items:
            out.append(k)
            out.append(v)
        out.extend(node.appends)
        return out
    if isinstance(node, PersistentRef):
        return [node.pid]
    return []


def _scalar_text(node: Scalar) -> str:
    if node.kind == "none":
        return "null"
    if node.kind == "bool":
        return "true" if node.value else "false"
    if node.kind == "int":
        return repr(node.value)
    if node.kind == "float":
        return repr(node.value)
    if node.kind == "string":
        return json.dumps(node.value, ensure_ascii=True)
    if node.kind == "bytes":
        return f'["bytes","{bytes(node.value).hex()}"]'
    raise AssertionError(f"unknown scalar kind {node.kind}")


class _Dumper:
    def __init__(self, root: Node):
        self.counts: dict[int, int] = {}
        self.labels: dict[int, int] = {}
        self.defined: set[int] = set()
        self._count(root)

    def _count(self, node: Node) -> None:
        stack = [node]
        while stack:
            cur = stack.pop()
            if not isinstance(cur, (Scalar, Seq, Map, CallableRef,
                                    OpaqueInstance, PersistentRef, Stub)):
                raise AssertionError(f"not a graph node: {cur!r}")
            if _label_eligible(cur):
                seen = self.counts.get(id(cur), 0)
                self.counts[id(cur)] = seen + 1
                if seen:
                    continue
            stack.extend(reversed(_children(cur)))

    def _sort_key(self, node: Node, guard: frozenset[int]) -> str:
        # Plain structural text used only to order set elements; shared
        # nodes render in full here, with a cycle guard for degenerate
        # self-containing sets.
        if id(node) in guard:
            return '["cycle"]'
        return self._render(node, plain=True, guard=guard | {id(node)})

    def _render(self, node: Node, plain: bool = False,
                guard: frozenset[int] = frozenset()) -> str:
        if not plain and self.counts.get(id(node), 0) > 1:
            if id(node) in self.defined:
                return f'["*",{self.labels[id(node)]}]'
            label = self.labels.setdefault(id(node), len(self.labels))
            self.defined.add(id(node))
            body = self._body(node, plain, guard)
            return f'["&",{label},{body}]'
        return self._body(node, plain, guard)

    def _body(self, node: Node, plain: bool, guard: frozenset[int]) -> str:
        render = lambda n: self._render(n, plain, guard)  # noqa: E731
        if isinstance(node, Scalar):
            return _scalar_text(node)
        if isinstance(node, Seq):
            if node.kind in ("set", "frozenset"):
                ordered = sorted(node.items,
                                 key=lambda n: self._sort_key(n, guard))
                inner = ",".join(render(i) for i in ordered)
            else:
                inner = ",".join(render(i) for i in node.items)
            return f'["{node.kind}",[{inner}]]'
        if isinstance(node, Map):
            inner = ",".join(f"[{render(k)},{render(v)}]"
                             for k, v in node.pairs)
            return f'["dict",[{inner}]]'
        if isinstance(node, CallableRef):
            name = json.dumps(node.name, ensure_ascii=True)
            if node.attrs is None and not node.tainted:
                return f'["global",{name}]'
            attrs = render(node.attrs) if node.attrs is not None else "null"
            tainted = (json.dumps(sorted(node.tainted), ensure_ascii=True)
                       if node.tainted else "null")
            return f'["global",{name},{attrs},{tainted}]'
        if isinstance(node, Stub):
            return f'["stub",{json.dumps(node.name, ensure_ascii=True)}]'
        if isinstance(node, PersistentRef):
            return f'["persid",{render(node.pid)}]'
        if isinstance(node, OpaqueInstance):
            args = "[" + ",".join(render(a) for a in node.args) + "]"
            kwargs = render(node.kwargs) if node.kwargs is not None else "null"
            state = render(node.state) if node.state is not None else "null"
            items = ("[" + ",".join(f"[{render(k)},{render(v)}]"
                                    for k, v in node.items) + "]"
                     if node.items else "null")
            appends = ("[" + ",".join(render(a) for a in node.appends) + "]"
                       if node.appends else "null")
            tainted = (json.dumps(sorted(node.tainted), ensure_ascii=True)
                       if node.tainted else "null")
            if node.class_name is None:
                callee = (render(node.callee)
                          if node.callee is not None else "null")
                return (f'["invoke",{callee},{args},{kwargs},{state},'
                        f'{items},{appends},{tainted}]')
            name = json.dumps(node.class_name, ensure_ascii=True)
            mode = json.dumps(node.mode, ensure_ascii=True)
            return (f'["object",{name},{mode},{args},{kwargs},{state},'
                    f'{items},{appends},{tainted}]')
        raise AssertionError(f"not a graph node: {node!r}")


def canonical_dump(root: Node) -> str:
    """Deterministic, versioned text rendering of a graph."""
    return f"{DUMP_HEADER}\n{_Dumper(root)._render(root)}\n"


def _key_path(key: Node, position: int) -> str:
    if isinstance(key, Scalar) and key.kind != "bytes":
        return f"[{key.value!r}]"
    if isinstance(key, Scalar):
        return f"[{bytes(key.value)!r}]"
    return f"[key:{position}]"


def list_stubs(root: Node) -> list[tuple[str, str]]:
    """All distinct stub nodes under ``root`` as (path, qualified name).

    Depth-first, construction order; a node reached by several paths is
    reported once, under the first path found.
    """
    out: list[tuple[str, str]] = []
    visited: set[int] = set()

    def walk(node: Node, path: str) -> None:
        if id(node) in visited:
            return
        visited.add(id(node))
        if isinstance(node, Stub):
            out.append((path, node.name))
            return
        if isinstance(node, Seq):
            if node.kind in ("set", "frozenset"):
                for i, item in enumerate(node.items):
                    walk(item, f"{path}{{{i}}}")
            else:
                for i, item in enumerate(node.items):
                    walk(item, f"{path}[{i}]")
            return
        if isinstance(node, Map):
            for i, (k, v) in enumerate(node.pairs):
                walk(k, f"{path}[key:{i}]")
                walk(v, f"{path}{_key_path(k, i)}")
            return
        if isinstance(node, CallableRef):
            if node.attrs is not None:
                walk(node.attrs, f"{path}.attrs")
            return
        if isinstance(node, OpaqueInstance):
            if node.callee is not None:
                walk(node.callee, f"{path}.callee")
            for i, a in enumerate(node.args):
                walk(a, f"{path}.args[{i}]")
            if node.kwargs is not None:
                walk(node.kwargs, f"{path}.kwargs")
            if node.state is not None:
                walk(node.state, f"{path}.state")
            for i, (k, v) in enumerate(node.items):
                walk(k, f"{path}.items[{i}][0]")
                walk(v, f"{path}{_key_path(k, i)}")
            for i, a in enumerate(node.appends):
                walk(a, f"{path}[+{i}]")
            return
        if isinstance(node, PersistentRef):
            walk(node.pid, f"{path}.persid")

    walk(root, "")
    return out
