"""Hand-assembled pickle programs for the hostile and binary fixtures.

Each builder returns raw bytes.  These are written opcode by opcode so the
corpus pins exact byte layouts (frame sizes, argument encodings) rather than
whatever the running interpreter's pickler would emit.
"""

from __future__ import annotations

import struct

PROTO2 = b"\x80\x02"
PROTO4 = b"\x80\x04"
PROTO5 = b"\x80\x05"


def _short_binunicode(text: str) -> bytes:
    raw = text.encode("utf-8")
    if len(raw) > 255:
        raise ValueError("short string too long")
    return b"\x8c" + bytes([len(raw)]) + raw


def _binunicode(text: str) -> bytes:
    raw = text.encode("utf-8")
    return b"X" + struct.pack("<I", len(raw)) + raw


def _binunicode8(text: str) -> bytes:
    raw = text.encode("utf-8")
    return b"\x8d" + struct.pack("<Q", len(raw)) + raw


def _bytearray8(raw: bytes) -> bytes:
    return b"\x96" + struct.pack("<Q", len(raw)) + raw


def _frame(body: bytes) -> bytes:
    return b"\x95" + struct.pack("<Q", len(body)) + body


def _global(module: str, name: str) -> bytes:
    return f"c{module}\n{name}\n".encode("ascii")


def _stack_global(module: str, name: str) -> bytes:
    return _short_binunicode(module) + _short_binunicode(name) + b"\x93"


def os_system() -> bytes:
    """Classic protocol-0 shell execution: os.system('id')."""
    return _global("os", "system") + b"(S'id'\ntR."


def eval_stack_global() -> bytes:
    """Protocol 4 eval via STACK_GLOBAL inside a frame."""
    body = (
        _stack_global("builtins", "eval")
        + _short_binunicode("print('pwned')")
        + b"\x85R."
    )
    return PROTO4 + _frame(body)


def subprocess_spawn() -> bytes:
    """Protocol 2 subprocess.Popen(['ls'])."""
    return (
        PROTO2
        + _global("subprocess", "Popen")
        + b"]("
        + _binunicode("ls")
        + b"e\x85R."
    )


def getattr_chain() -> bytes:
    """getattr(__import__('os'), 'system')('id') without naming os.system."""
    body = (
        _stack_global("builtins", "getattr")
        + _stack_global("builtins", "__import__")
        + _short_binunicode("os")
        + b"\x85R"
        + _short_binunicode("system")
        + b"\x86R"
        + _short_binunicode("id")
        + b"\x85R."
    )
    return PROTO4 + _frame(body)


def inst_legacy() -> bytes:
    """Protocol 0 INST opcode driving os.system."""
    return b"(S'id'\nios\nsystem\n."


def pathlib_write() -> bytes:
    """File-touching constructor that no command denylist names."""
    body = (
        _global("pathlib", "Path")
        + _short_binunicode("/tmp/forged_marker")
        + b"\x85R."
    )
    return PROTO4 + _frame(body)


def dotted_smuggle() -> bytes:
    """GLOBAL with a dotted name smuggled into the attribute field.

    The stream names module ``toylib.train`` and attribute ``os.system``;
    scanners that join the fields see ``toylib.train.os.system``, which no
    entry for ``os.system`` matches textually.
    """
    return (
        PROTO2
        + _global("toylib.train", "os.system")
        + _binunicode("touch /tmp/forged_marker")
        + b"\x85R."
    )


def multi_stop() -> bytes:
    """Two complete programs in one stream; naive loaders run only the first."""
    first = (
        _global("pathlib", "Path")
        + b"(S'/tmp/forged_a'\ntR."
    )
    second = (
        _global("pathlib", "PurePath")
        + b"(S'/tmp/forged_b'\ntR."
    )
    return first + second


def ns_mismatch() -> bytes:
    """Protocol 2 allocation of nsmix.common.Conv.

    The library ships as a bare directory, so its real module path is
    ``common``; a checkpoint written from an environment that imported it as
    a package references ``nsmix.common`` instead.
    """
    return PROTO2 + _global("nsmix.common", "Conv") + b")\x81."


def binary_payload() -> bytes:
    """Benign protocol 5 fixture exercising BYTEARRAY8 and BINUNICODE8."""
    blob = bytes(range(64)) * 3
    long_text = "payload-text-" + "x" * 300
    body = (
        b"}("
        + _short_binunicode("blob")
        + _bytearray8(blob)
        + _short_binunicode("text")
        + _binunicode8(long_text)
        + _short_binunicode("tag")
        + _short_binunicode("hello")
        + b"u."
    )
    return PROTO5 + _frame(body)


MALICIOUS = {
    "os_system": os_system,
    "eval_stack_global": eval_stack_global,
    "subprocess_spawn": subprocess_spawn,
    "getattr_chain": getattr_chain,
    "inst_legacy": inst_legacy,
}

BYPASS = {
    "pathlib_write": pathlib_write,
    "dotted_smuggle": dotted_smuggle,
    "multi_stop": multi_stop,
}
