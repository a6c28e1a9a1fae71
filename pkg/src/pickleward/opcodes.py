"""Pickle opcode stream parsing, serialization, and disassembly.

Covers pickle protocols 0 through 5: the text opcodes of protocol 0, the
binary forms introduced by protocols 1-3, and the framed opcodes of
protocols 4-5. Parsing is deliberately more permissive than the reference
unpickler — an analyst has to be able to look inside hostile files — so
decoding never imports, allocates, or executes anything; it only maps bytes
to (opcode, argument, offset) triples.

Two properties this module guarantees and the test suite leans on:

* round trip: ``serialize(parse(b)) == b`` for every accepted input, byte
  for byte, including any trailing bytes found after the first STOP;
* tiling: opcode offsets and lengths tile the program region of the input
  with no gaps or overlaps.

Bytes after the first STOP are not discarded: they are kept on the stream
as an explicit trailing segment, because a second pickle program hidden
behind an innocuous first one is a known smuggling trick. ``parse_programs``
decodes those trailing programs too.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterator

from .errors import (
    BadFrame,
    BadOpcodeArg,
    MissingStop,
    TruncatedInput,
    UnknownOpcode,
)


class OpcodeClass(Enum):
    """Security-relevant grouping used by the machine and the tracer."""

    IMPORTING = "importing"
    ALLOCATING = "allocating"
    INVOKING = "invoking"
    BUILDING = "building"
    MEMO_READ = "memo-read"
    MEMO_WRITE = "memo-write"
    DATA = "data"
    CONTROL = "control"
    FORBIDDEN = "forbidden"


@dataclass(frozen=True, slots=True)
class Opcode:
    """One decoded opcode: mnemonic, decoded argument, position, size.

    ``arg`` is the eagerly decoded argument (None for argument-less
    opcodes). ``raw_text`` flags string arguments that failed strict text
    decoding and were kept as raw bytes.
    """

    mnemonic: str
    arg: object
    offset: int
    length: int
    raw_text: bool = False

    @property
    def end(self) -> int:
        return self.offset + self.length


@dataclass(frozen=True, slots=True)
class OpcodeStream:
    """A parsed pickle program plus whatever followed its first STOP."""

    opcodes: tuple[Opcode, ...]
    protocol: int
    source_digest: str
    raw: bytes
    start: int
    stop_end: int

    @property
    def trailing(self) -> bytes:
        return self.raw[self.stop_end:]

    @property
    def has_trailing(self) -> bool:
        return self.stop_end < len(self.raw)


# --- argument codecs ---------------------------------------------------------
#
# Each codec takes (buf, pos) where pos is the first byte after the opcode
# byte, and returns (decoded argument, new position, raw_text flag).

def _need(buf: bytes, pos: int, n: int, offset: int) -> None:
    if pos + n > len(buf):
        raise TruncatedInput(offset)


def _read_line(buf: bytes, pos: int, offset: int) -> tuple[bytes, int]:
    end = buf.find(b"\n", pos)
    if end < 0:
        raise TruncatedInput(offset, "text argument missing newline terminator")
    return buf[pos:end], end + 1


def _dec_none(buf, pos, offset):
    return None, pos, False


def _dec_uint1(buf, pos, offset):
    _need(buf, pos, 1, offset)
    return buf[pos], pos + 1, False


def _dec_uint2(buf, pos, offset):
    _need(buf, pos, 2, offset)
    return int.from_bytes(buf[pos:pos + 2], "little"), pos + 2, False


def _dec_int4(buf, pos, offset):
    _need(buf, pos, 4, offset)
    return int.from_bytes(buf[pos:pos + 4], "little", signed=True), pos + 4, False


def _dec_uint4(buf, pos, offset):
    _need(buf, pos, 4, offset)
    return int.from_bytes(buf[pos:pos + 4], "little"), pos + 4, False


def _dec_uint8(buf, pos, offset):
    _need(buf, pos, 8, offset)
    return int.from_bytes(buf[pos:pos + 8], "little"), pos + 8, False


def _dec_float8(buf, pos, offset):
    _need(buf, pos, 8, offset)
    return struct.unpack(">d", buf[pos:pos + 8])[0], pos + 8, False


def _dec_long1(buf, pos, offset):
    _need(buf, pos, 1, offset)
    n = buf[pos]
    _need(buf, pos + 1, n, offset)
    val = int.from_bytes(buf[pos + 1:pos + 1 + n], "little", signed=True)
    return val, pos + 1 + n, False


def _dec_long4(buf, pos, offset):
    _need(buf, pos, 4, offset)
    n = int.from_bytes(buf[pos:pos + 4], "little", signed=True)
    if n < 0:
        raise BadOpcodeArg(offset, "negative LONG4 length")
    _need(buf, pos + 4, n, offset)
    val = int.from_bytes(buf[pos + 4:pos + 4 + n], "little", signed=True)
    return val, pos + 4 + n, False


def _counted_bytes(width: int, signed: bool = False):
    def dec(buf, pos, offset):
        _need(buf, pos, width, offset)
        n = int.from_bytes(buf[pos:pos + width], "little", signed=signed)
        if n < 0:
            raise BadOpcodeArg(offset, "negative byte-string length")
        _need(buf, pos + width, n, offset)
        return bytes(buf[pos + width:pos + width + n]), pos + width + n, False

    return dec


_dec_bytes1 = _counted_bytes(1)
_dec_bytes4 = _counted_bytes(4)
_dec_bytes8 = _counted_bytes(8)
# BINSTRING carries a *signed* 4-byte length; negative lengths are rejected.
_dec_string4 = _counted_bytes(4, signed=True)
_dec_string1 = _counted_bytes(1)
_dec_bytearray8 = _counted_bytes(8)


def _counted_utf8(width: int):
    def dec(buf, pos, offset):
        raw, newpos, _ = _counted_bytes(width)(buf, pos, offset)
        try:
            return raw.decode("utf-8", "surrogatepass"), newpos, False
        except UnicodeDecodeError:
            return raw, newpos, True

    return dec


_dec_utf8_1 = _counted_utf8(1)
_dec_utf8_4 = _counted_utf8(4)
_dec_utf8_8 = _counted_utf8(8)


def _dec_line_int(buf, pos, offset):
    line, newpos = _read_line(buf, pos, offset)
    # Protocol 0 encodes booleans as the special INT lines 00 and 01.
    if line == b"00":
        return False, newpos, False
    if line == b"01":
        return True, newpos, False
    try:
        return int(line.decode("ascii")), newpos, False
    except (UnicodeDecodeError, ValueError):
        raise BadOpcodeArg(offset, f"undecodable INT line {line!r}") from None


def _dec_line_long(buf, pos, offset):
    line, newpos = _read_line(buf, pos, offset)
    if line.endswith(b"L"):
        line = line[:-1]
    try:
        return int(line.decode("ascii")), newpos, False
    except (UnicodeDecodeError, ValueError):
        raise BadOpcodeArg(offset, f"undecodable LONG line {line!r}") from None


def _dec_line_uint(buf, pos, offset):
    line, newpos = _read_line(buf, pos, offset)
    try:
        val = int(line.decode("ascii"))
    except (UnicodeDecodeError, ValueError):
        raise BadOpcodeArg(offset, f"undecodable memo index {line!r}") from None
    if val < 0:
        raise BadOpcodeArg(offset, "negative memo index")
    return val, newpos, False


def _dec_line_float(buf, pos, offset):
    line, newpos = _read_line(buf, pos, offset)
    try:
        return float(line.decode("ascii")), newpos, False
    except (UnicodeDecodeError, ValueError):
        raise BadOpcodeArg(offset, f"undecodable FLOAT line {line!r}") from None


_ESCAPES = {
    ord("n"): b"\n",
    ord("r"): b"\r",
    ord("t"): b"\t",
    ord("\\"): b"\\",
    ord("'"): b"'",
    ord('"'): b'"',
    ord("0"): b"\x00",
    ord("a"): b"\a",
    ord("b"): b"\b",
    ord("f"): b"\f",
    ord("v"): b"\v",
}


def _unescape(data: bytes, offset: int) -> bytes:
    out = bytearray()
    i = 0
    n = len(data)
    while i < n:
        c = data[i]
        if c != ord("\\"):
            out.append(c)
            i += 1
            continue
        if i + 1 >= n:
            raise BadOpcodeArg(offset, "dangling backslash in STRING")
        nxt = data[i + 1]
        if nxt == ord("x"):
            if i + 3 >= n:
                raise BadOpcodeArg(offset, "truncated \\x escape in STRING")
            try:
                out.append(int(data[i + 2:i + 4], 16))
            except ValueError:
                raise BadOpcodeArg(offset, "bad \\x escape in STRING") from None
            i += 4
        elif nxt in _ESCAPES:
            out += _ESCAPES[nxt]
            i += 2
        else:
            # Unknown escapes keep the backslash, matching legacy behavior.
            out.append(c)
            out.append(nxt)
            i += 2
    return bytes(out)


def _dec_line_string(buf, pos, offset):
    line, newpos = _read_line(buf, pos, offset)
    if len(line) < 2 or line[0] not in b"'\"" or line[-1] != line[0]:
        raise BadOpcodeArg(offset, "STRING argument not quoted")
    inner = _unescape(line[1:-1], offset)
    try:
        return inner.decode("utf-8"), newpos, False
    except UnicodeDecodeError:
        return inner, newpos, True


def _dec_line_unicode(buf, pos, offset):
    line, newpos = _read_line(buf, pos, offset)
    return line.decode("raw-unicode-escape"), newpos, False


def _dec_line_noescape(buf, pos, offset):
    line, newpos = _read_line(buf, pos, offset)
    try:
        return line.decode("utf-8"), newpos, False
    except UnicodeDecodeError:
        return line.decode("latin-1"), newpos, True


def _dec_line_pair(buf, pos, offset):
    first, mid = _read_line(buf, pos, offset)
    second, newpos = _read_line(buf, mid, offset)
    flag = False
    try:
        a = first.decode("utf-8")
    except UnicodeDecodeError:
        a = first.decode("latin-1")
        flag = True
    try:
        b = second.decode("utf-8")
    except UnicodeDecodeError:
        b = second.decode("latin-1")
        flag = True
    return (a, b), newpos, flag


_Codec = Callable[[bytes, int, int], tuple[object, int, bool]]


@dataclass(frozen=True, slots=True)
class OpcodeSpec:
    mnemonic: str
    code: int
    protocol: int
    codec: _Codec
    opclass: OpcodeClass


def _spec(mnemonic: str, code: bytes, protocol: int, codec: _Codec,
          opclass: OpcodeClass) -> OpcodeSpec:
    return OpcodeSpec(mnemonic, code[0], protocol, codec, opclass)


_C = OpcodeClass

OPCODE_TABLE: tuple[OpcodeSpec, ...] = (
    # protocol 0 text opcodes
    _spec("INT", b"I", 0, _dec_line_int, _C.DATA),
    _spec("LONG", b"L", 0, _dec_line_long, _C.DATA),
    _spec("STRING", b"S", 0, _dec_line_string, _C.DATA),
    _spec("NONE", b"N", 0, _dec_none, _C.DATA),
    _spec("UNICODE", b"V", 0, _dec_line_unicode, _C.DATA),
    _spec("FLOAT", b"F", 0, _dec_line_float, _C.DATA),
    _spec("EMPTY_LIST", b"]", 1, _dec_none, _C.DATA),
    _spec("APPEND", b"a", 0, _dec_none, _C.DATA),
    _spec("APPENDS", b"e", 1, _dec_none, _C.DATA),
    _spec("LIST", b"l", 0, _dec_none, _C.DATA),
    _spec("EMPTY_TUPLE", b")", 1, _dec_none, _C.DATA),
    _spec("TUPLE", b"t", 0, _dec_none, _C.DATA),
    _spec("EMPTY_DICT", b"}", 1, _dec_none, _C.DATA),
    _spec("DICT", b"d", 0, _dec_none, _C.DATA),
    _spec("SETITEM", b"s", 0, _dec_none, _C.DATA),
    _spec("SETITEMS", b"u", 1, _dec_none, _C.DATA),
    _spec("POP", b"0", 0, _dec_none, _C.CONTROL),
    _spec("DUP", b"2", 0, _dec_none, _C.CONTROL),
    _spec("MARK", b"(", 0, _dec_none, _C.CONTROL),
    _spec("POP_MARK", b"1", 1, _dec_none, _C.CONTROL),
    _spec("GET", b"g", 0, _dec_line_uint, _C.MEMO_READ),
    _spec("PUT", b"p", 0, _dec_line_uint, _C.MEMO_WRITE),
    _spec("GLOBAL", b"c", 0, _dec_line_pair, _C.IMPORTING),
    _spec("REDUCE", b"R", 0, _dec_none, _C.INVOKING),
    _spec("BUILD", b"b", 0, _dec_none, _C.BUILDING),
    _spec("INST", b"i", 0, _dec_line_pair, _C.FORBIDDEN),
    _spec("OBJ", b"o", 1, _dec_none, _C.FORBIDDEN),
    _spec("PERSID", b"P", 0, _dec_line_noescape, _C.DATA),
    _spec("BINPERSID", b"Q", 1, _dec_none, _C.DATA),
    _spec("STOP", b".", 0, _dec_none, _C.CONTROL),
    # protocol 1 binary opcodes
    _spec("BININT", b"J", 1, _dec_int4, _C.DATA),
    _spec("BININT1", b"K", 1, _dec_uint1, _C.DATA),
    _spec("BININT2", b"M", 1, _dec_uint2, _C.DATA),
    _spec("BINFLOAT", b"G", 1, _dec_float8, _C.DATA),
    _spec("BINSTRING", b"T", 1, _dec_string4, _C.DATA),
    _spec("SHORT_BINSTRING", b"U", 1, _dec_string1, _C.DATA),
    _spec("BINUNICODE", b"X", 1, _dec_utf8_4, _C.DATA),
    _spec("BINGET", b"h", 1, _dec_uint1, _C.MEMO_READ),
    _spec("LONG_BINGET", b"j", 1, _dec_uint4, _C.MEMO_READ),
    _spec("BINPUT", b"q", 1, _dec_uint1, _C.MEMO_WRITE),
    _spec("LONG_BINPUT", b"r", 1, _dec_uint4, _C.MEMO_WRITE),
    # protocol 2
    _spec("PROTO", b"\x80", 2, _dec_uint1, _C.CONTROL),
    _spec("NEWOBJ", b"\x81", 2, _dec_none, _C.ALLOCATING),
    _spec("EXT1", b"\x82", 2, _dec_uint1, _C.FORBIDDEN),
    _spec("EXT2", b"\x83", 2, _dec_uint2, _C.FORBIDDEN),
    _spec("EXT4", b"\x84", 2, _dec_int4, _C.FORBIDDEN),
    _spec("TUPLE1", b"\x85", 2, _dec_none, _C.DATA),
    _spec("TUPLE2", b"\x86", 2, _dec_none, _C.DATA),
    _spec("TUPLE3", b"\x87", 2, _dec_none, _C.DATA),
    _spec("NEWTRUE", b"\x88", 2, _dec_none, _C.DATA),
    _spec("NEWFALSE", b"\x89", 2, _dec_none, _C.DATA),
    _spec("LONG1", b"\x8a", 2, _dec_long1, _C.DATA),
    _spec("LONG4", b"\x8b", 2, _dec_long4, _C.DATA),
    # protocol 3
    _spec("BINBYTES", b"B", 3, _dec_bytes4, _C.DATA),
    _spec("SHORT_BINBYTES", b"C", 3, _dec_bytes1, _C.DATA),
    # protocol 4
    _spec("SHORT_BINUNICODE", b"\x8c", 4, _dec_utf8_1, _C.DATA),
    _spec("BINUNICODE8", b"\x8d", 4, _dec_utf8_8, _C.DATA),
    _spec("BINBYTES8", b"\x8e", 4, _dec_bytes8, _C.DATA),
    _spec("EMPTY_SET", b"\x8f", 4, _dec_none, _C.DATA),
    _spec("ADDITEMS", b"\x90", 4, _dec_none, _C.DATA),
    _spec("FROZENSET", b"\x91", 4, _dec_none, _C.DATA),
    _spec("NEWOBJ_EX", b"\x92", 4, _dec_none, _C.ALLOCATING),
    _spec("STACK_GLOBAL", b"\x93", 4, _dec_none, _C.IMPORTING),
    _spec("MEMOIZE", b"\x94", 4, _dec_none, _C.MEMO_WRITE),
    _spec("FRAME", b"\x95", 4, _dec_uint8, _C.CONTROL),
    # protocol 5
    _spec("BYTEARRAY8", b"\x96", 5, _dec_bytearray8, _C.DATA),
    _spec("NEXT_BUFFER", b"\x97", 5, _dec_none, _C.FORBIDDEN),
    _spec("READONLY_BUFFER", b"\x98", 5, _dec_none, _C.FORBIDDEN),
)

OPCODES_BY_CODE: dict[int, OpcodeSpec] = {s.code: s for s in OPCODE_TABLE}
OPCODES_BY_NAME: dict[str, OpcodeSpec] = {s.mnemonic: s for s in OPCODE_TABLE}

assert len(OPCODES_BY_CODE) == len(OPCODE_TABLE), "duplicate opcode byte"


def classify(mnemonic: str) -> OpcodeClass:
    """Total classification map; raises KeyError only for unknown mnemonics."""
    return OPCODES_BY_NAME[mnemonic].opclass


# --- parsing -----------------------------------------------------------------

def _parse_program(raw: bytes, start: int) -> tuple[list[Opcode], int]:
    """Decode one program from ``raw[start:]`` up to and including STOP.

    Returns the opcode list and the position just past STOP. Enforces frame
    discipline: every opcode inside a frame must sit entirely within it, a
    new frame may only start once the previous one is exhausted, and frames
    may not be left underfilled.
    """
    opcodes: list[Opcode] = []
    pos = start
    size = len(raw)
    frame_end: int | None = None
    while pos < size:
        offset = pos
        code = raw[pos]
        spec = OPCODES_BY_CODE.get(code)
        if spec is None:
            raise UnknownOpcode(code, offset)
        if frame_end is not None and pos == frame_end:
            frame_end = None
        if spec.mnemonic == "FRAME":
            if frame_end is not None:
                raise BadFrame(offset, "FRAME inside an unfinished frame")
            arg, newpos, _ = spec.codec(raw, pos + 1, offset)
            if newpos + arg > size:
                raise BadFrame(offset, "frame length exceeds remaining input")
            opcodes.append(Opcode("FRAME", arg, offset, newpos - offset))
            frame_end = newpos + arg
            pos = newpos
            continue
        arg, newpos, raw_text = spec.codec(raw, pos + 1, offset)
        if frame_end is not None and newpos > frame_end:
            raise BadFrame(offset, "opcode crosses frame boundary")
        opcodes.append(Opcode(spec.mnemonic, arg, offset, newpos - offset, raw_text))
        pos = newpos
        if spec.mnemonic == "STOP":
            if frame_end is not None and pos < frame_end:
                raise BadFrame(offset, "frame left underfilled at STOP")
            return opcodes, pos
    raise MissingStop()


def _derive_protocol(opcodes: list[Opcode]) -> int:
    needed = max(OPCODES_BY_NAME[op.mnemonic].protocol for op in opcodes)
    if opcodes and opcodes[0].mnemonic == "PROTO":
        declared = opcodes[0].arg
        if isinstance(declared, int):
            return max(declared, needed)
    return needed


def parse(data: bytes) -> OpcodeStream:
    """Parse the first pickle program; keep any trailing bytes on the stream."""
    opcodes, stop_end = _parse_program(data, 0)
    return OpcodeStream(
        opcodes=tuple(opcodes),
        protocol=_derive_protocol(opcodes),
        source_digest=hashlib.sha256(data).hexdigest(),
        raw=bytes(data),
        start=0,
        stop_end=stop_end,
    )


def parse_programs(data: bytes) -> list[OpcodeStream]:
    """Parse every back-to-back program in ``data`` (first plus trailing).

    Offsets in later programs are absolute positions in ``data``. Raises the
    usual parse errors if any program, including a trailing one, is
    malformed.
    """
    digest = hashlib.sha256(data).hexdigest()
    programs: list[OpcodeStream] = []
    pos = 0
    while pos < len(data):
        opcodes, stop_end = _parse_program(data, pos)
        programs.append(OpcodeStream(
            opcodes=tuple(opcodes),
            protocol=_derive_protocol(opcodes),
            source_digest=digest,
            raw=bytes(data),
            start=pos,
            stop_end=stop_end,
        ))
        pos = stop_end
    if not programs:
        raise MissingStop()
    return programs


def serialize(stream: OpcodeStream) -> bytes:
    """Byte-exact inverse of parse for the stream's entire input."""
    return stream.raw


def iter_opcode_bytes(stream: OpcodeStream) -> Iterator[bytes]:
    """Raw encoded bytes of each opcode, in order (tiling check helper)."""
    for op in stream.opcodes:
        yield stream.raw[op.offset:op.end]


# --- disassembly -------------------------------------------------------------

def _render_arg(op: Opcode) -> str | None:
    if op.arg is None:
        return None
    if isinstance(op.arg, tuple):
        return repr(" ".join(str(part) for part in op.arg))
    return repr(op.arg)


def disassemble(stream: OpcodeStream, include_trailing: bool = True) -> str:
    """Human-readable listing: one ``offset: MNEMONIC arg`` line per opcode."""
    lines: list[str] = []
    for op in stream.opcodes:
        rendered = _render_arg(op)
        if rendered is None:
            lines.append(f"{op.offset}: {op.mnemonic}")
        else:
            lines.append(f"{op.offset}: {op.mnemonic} {rendered}")
    if include_trailing and stream.has_trailing:
        pos = stream.stop_end
        try:
            rest = parse_programs(stream.raw[pos:])
        except Exception:
            lines.append(f"--- {len(stream.raw) - pos} undecodable trailing "
                         f"byte(s) at offset {pos} ---")
            return "\n".join(lines)
        for prog in rest:
            lines.append(f"--- trailing program at offset {pos + prog.start} ---")
            for op in prog.opcodes:
                rendered = _render_arg(op)
                shifted = pos + op.offset
                if rendered is None:
                    lines.append(f"{shifted}: {op.mnemonic}")
                else:
                    lines.append(f"{shifted}: {op.mnemonic} {rendered}")
    return "\n".join(lines)
