"""Exception hierarchy shared across the toolkit.

Three families matter to callers: parse errors (the byte stream is not a
well-formed pickle), policy errors (a policy document or generation request is
invalid), and machine errors (execution stopped). Security violations are a
distinguished subset of machine errors so the command line can map them to a
dedicated exit status.
"""

from __future__ import annotations


class PickleWardError(Exception):
    """Base class for every error raised by this package."""


# --- parse errors -----------------------------------------------------------

class ParseError(PickleWardError):
    """The input could not be decoded as a pickle opcode stream."""


class TruncatedInput(ParseError):
    def __init__(self, offset: int, detail: str = "input ends mid-opcode"):
        self.offset = offset
        super().__init__(f"{detail} at offset {offset}")


class UnknownOpcode(ParseError):
    def __init__(self, byte: int, offset: int):
        self.byte = byte
        self.offset = offset
        super().__init__(f"unknown opcode 0x{byte:02x} at offset {offset}")


class BadFrame(ParseError):
    def __init__(self, offset: int, detail: str):
        self.offset = offset
        super().__init__(f"bad FRAME at offset {offset}: {detail}")


class MissingStop(ParseError):
    def __init__(self) -> None:
        super().__init__("no STOP opcode before end of input")


class BadOpcodeArg(ParseError):
    def __init__(self, offset: int, detail: str):
        self.offset = offset
        super().__init__(f"bad opcode argument at offset {offset}: {detail}")


# --- policy errors ----------------------------------------------------------

class PolicyError(PickleWardError):
    """A policy document or policy operation is invalid."""


class SubsetViolation(PolicyError):
    def __init__(self, extras: object):
        self.extras = extras
        super().__init__(
            f"allowed_invocations not a subset of allowed_imports: {extras}"
        )


class MissingRootClass(PolicyError):
    def __init__(self, root: str):
        self.root = root
        super().__init__(f"root class {root!r} not in allowed_imports")


class PolicyFileError(ParseError, PolicyError):
    """A policy, cache, or denylist file failed to parse or validate."""


class NameNotInPolicy(PolicyError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"{name!r} is not in the policy's allowed imports")


class RootUnresolvable(PolicyError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"root class {name!r} not found in library or cache")


# --- source index errors ----------------------------------------------------

class NoSources(PickleWardError):
    def __init__(self, path: str):
        super().__init__(f"no Python sources found under {path}")


class ClassNotFound(PickleWardError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"class {name!r} not found in index")


# --- machine errors ---------------------------------------------------------

class VmError(PickleWardError):
    """Execution of an opcode stream stopped before STOP."""

    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)


class SecurityViolation(VmError):
    """A policy or hardening rule blocked execution."""


class InvocationDenied(SecurityViolation):
    def __init__(self, name: str, offset: int):
        self.name = name
        super().__init__(f"invocation of {name!r} denied by policy", offset)


class StubInvocation(SecurityViolation):
    def __init__(self, name: str, offset: int):
        self.name = name
        super().__init__(f"use of stubbed import {name!r}", offset)


class ForbiddenOpcode(SecurityViolation):
    def __init__(self, mnemonic: str, offset: int):
        self.mnemonic = mnemonic
        super().__init__(f"forbidden opcode {mnemonic}", offset)


class StubsPresent(SecurityViolation):
    def __init__(self, paths: tuple[str, ...]):
        self.paths = paths
        listing = ", ".join(paths)
        super().__init__(f"result contains {len(paths)} stub(s): {listing}")


class StackUnderflow(VmError):
    def __init__(self, offset: int):
        super().__init__("stack underflow", offset)


class MemoMiss(VmError):
    def __init__(self, key: int, offset: int):
        self.key = key
        super().__init__(f"memo key {key} not set", offset)


class DepthExceeded(VmError):
    def __init__(self, limit: int, offset: int):
        super().__init__(f"stack depth limit {limit} exceeded", offset)


class MemoExceeded(VmError):
    def __init__(self, limit: int, offset: int):
        super().__init__(f"memo size limit {limit} exceeded", offset)


class TypeViolation(VmError):
    def __init__(self, detail: str, offset: int):
        super().__init__(f"ill-typed operand: {detail}", offset)


class UnhashableKey(VmError):
    def __init__(self, kind: str, offset: int):
        super().__init__(f"unhashable {kind} used as key or set element", offset)
