"""Reference unpickler that records structure instead of running code.

Global lookups resolve to inert proxy classes, so constructor calls and
``__setstate__``/``append``/``__setitem__`` traffic are captured as plain
records.  Nothing from the pickled program is ever imported or executed.
The one exception: ``set`` and ``frozenset`` constructors (under both their
modern and protocol-2 module spellings) resolve to the real builtins, since
pre-protocol-4 picklers spell those containers as constructor calls.
"""

from __future__ import annotations

import io
import pickle


class RecordedInstance:
    """What a constructor call or allocation produced."""

    def __init__(self, qualified, mode, args, kwargs=None, callee=None):
        self.qualified = qualified
        self.mode = mode
        self.args = list(args)
        self.kwargs = kwargs if kwargs else None
        self.callee = callee
        self.state = None
        self.items: list[tuple] = []
        self.appends: list = []

    def __setstate__(self, state):
        self.state = state

    def __setitem__(self, key, value):
        self.items.append((key, value))

    def append(self, value):
        self.appends.append(value)

    def extend(self, values):
        self.appends.extend(values)

    def add(self, value):
        self.appends.append(value)

    def __call__(self, *args, **kwargs):
        # Calling a recorded result is itself recorded, never executed.
        return RecordedInstance(None, "reduced", args, kwargs or None, callee=self)


class RecordedPersistentRef:
    def __init__(self, pid):
        self.pid = pid


class _RecordingMeta(type):
    def __call__(cls, *args, **kwargs):
        return RecordedInstance(cls.qualified, "reduced", args, kwargs or None)

    def __repr__(cls):
        return f"<recorded global {cls.qualified}>"


def _make_proxy(qualified: str) -> type:
    def _new(cls, *args, **kwargs):
        return RecordedInstance(qualified, "allocated", args, kwargs or None)

    return _RecordingMeta(
        "RecordedGlobal",
        (),
        {"qualified": qualified, "__new__": staticmethod(_new)},
    )


_REAL_GLOBALS = {
    ("builtins", "set"): set,
    ("builtins", "frozenset"): frozenset,
    ("__builtin__", "set"): set,
    ("__builtin__", "frozenset"): frozenset,
}


class RecordingUnpickler(pickle.Unpickler):
    def find_class(self, module, name):
        real = _REAL_GLOBALS.get((module, name))
        if real is not None:
            return real
        return _make_proxy(f"{module}.{name}")

    def persistent_load(self, pid):
        return RecordedPersistentRef(pid)


def recording_load(data: bytes):
    """Load the first pickle program in ``data`` into a recorded graph."""
    return RecordingUnpickler(io.BytesIO(data)).load()
