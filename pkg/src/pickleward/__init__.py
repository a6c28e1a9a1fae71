"""Parse, analyze, and safely execute pickle-format model files.

The package splits the problem in two. Static tools (:func:`parse`,
:func:`trace`, :func:`scan`, :func:`generate`) inspect bytes or library
sources without running anything. The load machine (:func:`execute`)
evaluates a pickle program against a policy, building a neutral object
graph instead of live objects: imports outside the policy become inert
stubs, disallowed invocations stop execution, and nothing is ever actually
imported or called.
"""

from .container import read_pickle_bytes
from .errors import (
    BadFrame,
    BadOpcodeArg,
    ClassNotFound,
    DepthExceeded,
    ForbiddenOpcode,
    InvocationDenied,
    MemoExceeded,
    MemoMiss,
    MissingRootClass,
    MissingStop,
    NameNotInPolicy,
    NoSources,
    ParseError,
    PickleWardError,
    PolicyError,
    PolicyFileError,
    RootUnresolvable,
    SecurityViolation,
    StackUnderflow,
    StubInvocation,
    StubsPresent,
    SubsetViolation,
    TruncatedInput,
    TypeViolation,
    UnhashableKey,
    UnknownOpcode,
    VmError,
)
from .graph import (
    CallableRef,
    Map,
    OpaqueInstance,
    PersistentRef,
    Scalar,
    Seq,
    Stub,
    canonical_dump,
    list_stubs,
)
from .opcodes import (
    Opcode,
    OpcodeClass,
    OpcodeStream,
    classify,
    disassemble,
    parse,
    parse_programs,
    serialize,
)
from .policy import (
    ClassCache,
    ClassCacheEntry,
    Policy,
    QualifiedName,
    load_baseline_policy,
    merge,
    read_policy,
    write_policy,
)
from .policygen import explain, generate
from .srcindex import LibraryIndex, index_library
from .tracing import (
    Denylist,
    ScanVerdict,
    TraceReport,
    load_default_denylist,
    read_denylist,
    scan,
    trace,
)
from .vm import (
    ExecutionTrace,
    VmConfig,
    VmOutcome,
    assert_no_stubs,
    execute,
)

__version__ = "0.1.0"

__all__ = [
    "BadFrame", "BadOpcodeArg",
    "CallableRef", "ClassCache", "ClassCacheEntry", "ClassNotFound",
    "Denylist", "DepthExceeded", "ExecutionTrace", "ForbiddenOpcode",
    "InvocationDenied", "LibraryIndex", "Map", "MemoExceeded", "MemoMiss",
    "MissingRootClass", "MissingStop", "NameNotInPolicy", "NoSources",
    "OpaqueInstance", "Opcode",
    "OpcodeClass", "OpcodeStream", "ParseError", "PersistentRef",
    "PickleWardError", "Policy", "PolicyError", "PolicyFileError",
    "QualifiedName", "RootUnresolvable", "Scalar", "ScanVerdict",
    "SecurityViolation", "Seq", "StackUnderflow", "Stub", "StubInvocation",
    "StubsPresent", "SubsetViolation", "TraceReport", "TruncatedInput",
    "TypeViolation", "UnhashableKey", "UnknownOpcode",
    "VmConfig", "VmError", "VmOutcome", "assert_no_stubs", "canonical_dump",
    "classify", "disassemble", "execute", "explain", "generate",
    "index_library", "list_stubs", "load_baseline_policy",
    "load_default_denylist", "merge", "parse", "parse_programs",
    "read_denylist", "read_pickle_bytes", "read_policy", "scan",
    "serialize", "trace", "write_policy", "__version__",
]
