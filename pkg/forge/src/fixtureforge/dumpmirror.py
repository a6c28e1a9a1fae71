"""Canonical text rendering of a recorded object graph.

Produces the ``pickleward-dump v1`` format from real Python objects plus the
recorder's proxy types: JSON scalar lexemes, tagged arrays for compounds,
set elements ordered by rendered text, and ``["&",k,...]`` / ``["*",k]``
labels for nodes reachable more than once.  Only values the reference
pickler memoizes (non-empty strings and bytes, containers, instances,
globals) are eligible for labels; numbers and singletons never are, so
interpreter-level caching of small values cannot leak into the output.
"""

from __future__ import annotations

import json

from .recorder import RecordedInstance, RecordedPersistentRef, _RecordingMeta

DUMP_HEADER = "pickleward-dump v1"


def _is_proxy(obj) -> bool:
    return isinstance(obj, _RecordingMeta)


def _label_eligible(obj) -> bool:
    if isinstance(obj, (str, bytes, bytearray)):
        return len(obj) > 0
    if isinstance(obj, bool) or obj is None:
        return False
    if isinstance(obj, (tuple, frozenset)):
        return len(obj) > 0
    if isinstance(obj, (list, set, dict)):
        return True
    if isinstance(obj, RecordedInstance) or _is_proxy(obj):
        return True
    return False


def _children(obj) -> list:
    if isinstance(obj, (list, tuple, set, frozenset)):
        return list(obj)
    if isinstance(obj, dict):
        return [o for pair in obj.items() for o in pair]
    if isinstance(obj, RecordedInstance):
        out: list = []
        if obj.callee is not None:
            out.append(obj.callee)
        out.extend(obj.args)
        if obj.kwargs is not None:
            out.append(obj.kwargs)
        if obj.state is not None:
            out.append(obj.state)
        for k, v in obj.items:
            out.append(k)
            out.append(v)
        out.extend(obj.appends)
        return out
    if isinstance(obj, RecordedPersistentRef):
        return [obj.pid]
    return []


def _scalar_text(obj) -> str:
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, float)):
        return repr(obj)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=True)
    return f'["bytes","{bytes(obj).hex()}"]'


_SCALARS = (str, bytes, bytearray, bool, int, float, type(None))


class _Dumper:
    def __init__(self, root):
        self.counts: dict[int, int] = {}
        self.labels: dict[int, int] = {}
        self.defined: set[int] = set()
        self._count(root)

    def _count(self, obj) -> None:
        stack = [obj]
        while stack:
            cur = stack.pop()
            if _label_eligible(cur):
                seen = self.counts.get(id(cur), 0)
                self.counts[id(cur)] = seen + 1
                if seen:
                    continue
            stack.extend(reversed(_children(cur)))

    def _sort_key(self, obj, guard: frozenset[int]) -> str:
        if id(obj) in guard:
            return '["cycle"]'
        return self._render(obj, plain=True, guard=guard | {id(obj)})

    def _render(self, obj, plain: bool = False,
                guard: frozenset[int] = frozenset()) -> str:
        if not plain and self.counts.get(id(obj), 0) > 1:
            if id(obj) in self.defined:
                return f'["*",{self.labels[id(obj)]}]'
            label = self.labels.setdefault(id(obj), len(self.labels))
            self.defined.add(id(obj))
            body = self._body(obj, plain, guard)
            return f'["&",{label},{body}]'
        return self._body(obj, plain, guard)

    def _body(self, obj, plain: bool, guard: frozenset[int]) -> str:
        render = lambda o: self._render(o, plain, guard)  # noqa: E731
        if obj is None or isinstance(obj, _SCALARS):
            return _scalar_text(obj)
        if isinstance(obj, (list, tuple, set, frozenset)):
            kind = {list: "list", tuple: "tuple", set: "set",
                    frozenset: "frozenset"}[type(obj)]
            if isinstance(obj, (set, frozenset)):
                ordered = sorted(obj, key=lambda o: self._sort_key(o, guard))
                inner = ",".join(render(i) for i in ordered)
            else:
                inner = ",".join(render(i) for i in obj)
            return f'["{kind}",[{inner}]]'
        if isinstance(obj, dict):
            inner = ",".join(f"[{render(k)},{render(v)}]"
                             for k, v in obj.items())
            return f'["dict",[{inner}]]'
        if _is_proxy(obj):
            return f'["global",{json.dumps(obj.qualified, ensure_ascii=True)}]'
        if isinstance(obj, RecordedPersistentRef):
            return f'["persid",{render(obj.pid)}]'
        if isinstance(obj, RecordedInstance):
            args = "[" + ",".join(render(a) for a in obj.args) + "]"
            kwargs = render(obj.kwargs) if obj.kwargs is not None else "null"
            state = render(obj.state) if obj.state is not None else "null"
            items = ("[" + ",".join(f"[{render(k)},{render(v)}]"
                                    for k, v in obj.items) + "]"
                     if obj.items else "null")
            appends = ("[" + ",".join(render(a) for a in obj.appends) + "]"
                       if obj.appends else "null")
            if obj.qualified is None:
                callee = render(obj.callee) if obj.callee is not None else "null"
                return (f'["invoke",{callee},{args},{kwargs},{state},'
                        f'{items},{appends},null]')
            name = json.dumps(obj.qualified, ensure_ascii=True)
            mode = json.dumps(obj.mode, ensure_ascii=True)
            return (f'["object",{name},{mode},{args},{kwargs},{state},'
                    f'{items},{appends},null]')
        raise AssertionError(f"unsupported object in recorded graph: {obj!r}")


def mirror_dump(root) -> str:
    """Render a recorded graph in the canonical dump format."""
    return f"{DUMP_HEADER}\n{_Dumper(root)._render(root)}\n"
