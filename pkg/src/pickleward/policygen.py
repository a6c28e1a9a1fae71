"""Policy generation: a reachability closure over an indexed library.

Starting from a root class, walk the types a faithful pickle of that class
could contain. A class with a ``__reduce__`` contributes its reduce
callable (imported and invoked), itself, and the types of the arguments
the callable receives. A class without one contributes itself, its
subclasses (any of them may appear where the base is expected), and its
attribute types. Plain builtin scalars and containers need no policy entry
because the load machine constructs them natively.

Each name is expanded at most once. A class-cache hit is terminal: the
precomputed sets are merged and the class is not expanded again, which is
what makes policies composable across libraries.

Everything that could not be followed (dynamic reduce callables, unknown
attribute types, names defined outside the indexed tree) is preserved as a
warning on the generated policy rather than silently dropped.
"""

from __future__ import annotations

from collections import deque

from .errors import RootUnresolvable
from .policy import (
    ClassCache,
    DerivationStep,
    Policy,
    QualifiedName,
)
from .srcindex import (
    AttrTable,
    LibraryIndex,
    Named,
    Unknown,
    attr_tables,
    has_unknown,
    named_types,
)

RULE_ROOT = "root"
RULE_REDUCE_CALLABLE = "reduce-callable"
RULE_REDUCE_CLASS = "reduce-class"
RULE_REDUCE_ARG = "reduce-argument-type"
RULE_ATTRIBUTE = "attribute-type"
RULE_SUBCLASS = "subclass"
RULE_FUNCTION = "function-reference"
RULE_CACHE = "class-cache"

_RULE_TEXT = {
    RULE_ROOT: "requested policy root",
    RULE_REDUCE_CALLABLE: "callable returned by __reduce__ of {via}",
    RULE_REDUCE_CLASS: "defines __reduce__",
    RULE_REDUCE_ARG: "passed by __reduce__ of {via}",
    RULE_ATTRIBUTE: "attribute type of {via}",
    RULE_SUBCLASS: "subclass of {via}",
    RULE_FUNCTION: "function referenced from {via}",
}

# Builtin scalars and containers the machine constructs natively; they
# never need a policy entry.
BUILTIN_SKIP = frozenset(
    f"builtins.{name}" for name in (
        "int", "str", "list", "dict", "tuple", "set", "bytes", "bool",
        "float", "NoneType",
    ))


class _Generation:
    def __init__(self, index: LibraryIndex, cache: ClassCache | None):
        self.index = index
        self.cache = cache
        self.imports: set[QualifiedName] = set()
        self.invocations: set[QualifiedName] = set()
        self.warnings: list[str] = []
        self.derivations: dict[str, DerivationStep] = {}
        self.queue: deque[str] = deque()
        self.queued: set[str] = set()

    def warn(self, message: str) -> None:
        if message not in self.warnings:
            self.warnings.append(message)

    def derive(self, name: str, rule: str, via: str | None) -> None:
        self.derivations.setdefault(name, DerivationStep(name, rule, via))

    def enqueue(self, name: str, rule: str, via: str | None) -> None:
        if name in BUILTIN_SKIP or name in self.queued:
            return
        self.queued.add(name)
        self.queue.append(name)
        self.derive(name, rule, via)

    def allow_import(self, name: str) -> None:
        self.imports.add(QualifiedName.from_text(name))

    def allow_invocation(self, name: str) -> None:
        qname = QualifiedName.from_text(name)
        self.imports.add(qname)
        self.invocations.add(qname)

    # -- expansion ------------------------------------------------------

    def expand(self, name: str) -> None:
        entry = self.cache.lookup(name) if self.cache else None
        if entry is not None:
            self.imports |= entry.imports
            self.invocations |= entry.invocations
            rule = f"{RULE_CACHE}:{entry.origin}"
            self.derive(name, rule, None)
            for extra in sorted(entry.imports):
                self.derive(extra.text, rule, name)
            return
        record = self.index.classes.get(name)
        if record is not None:
            self.expand_class(name, record)
            return
        if name in self.index.functions:
            self.allow_import(name)
            return
        self.allow_import(name)
        self.warn(f"{name}: defined outside the indexed sources; "
                  f"allowed for import only")

    def expand_class(self, name: str, record) -> None:
        self.allow_import(name)
        summary = record.reduce_summary
        if summary is not None:
            self.derive(name, RULE_REDUCE_CLASS, None)
            for callee in summary.callables:
                self.allow_invocation(callee)
                self.derive(callee, RULE_REDUCE_CALLABLE, name)
                self.enqueue(callee, RULE_REDUCE_CALLABLE, name)
            if summary.dynamic_callable:
                self.warn(f"{name}: __reduce__ callable is computed at "
                          f"runtime; it cannot be allowed statically")
            for expr in summary.types:
                self.enqueue_type(expr, RULE_REDUCE_ARG, name)
            for message in summary.warnings:
                self.warn(message)
            return
        for sub in self.index.subclasses_of(name):
            self.enqueue(sub, RULE_SUBCLASS, name)
        attrs, attr_warnings = self.index.attributes_of(name)
        for message in attr_warnings:
            self.warn(message)
        for attr, info in attrs.items():
            if isinstance(info.type, Unknown) or has_unknown(info.type):
                self.warn(f"{name}.{attr}: type unknown; not expanded")
            self.enqueue_type(info.type, RULE_ATTRIBUTE, name)

    def enqueue_type(self, expr, rule: str, via: str) -> None:
        for named in named_types(expr):
            self.enqueue(named.name, rule, via)
        for table in attr_tables(expr):
            owner = self.index.classes.get(table.class_name)
            if owner is None:
                continue
            attrs, _ = self.index.attributes_of(table.class_name)
            for attr, info in attrs.items():
                if isinstance(info.type, Unknown) or has_unknown(info.type):
                    self.warn(f"{table.class_name}.{attr}: type unknown; "
                              f"not expanded")
                self.enqueue_type(info.type, RULE_ATTRIBUTE,
                                  table.class_name)


def generate(index: LibraryIndex, root: str,
             cache: ClassCache | None = None) -> Policy:
    """Generate the policy for loading pickles rooted at `root`."""
    canonical = index.canonicalize(root)
    if canonical not in index.classes:
        raise RootUnresolvable(root)
    gen = _Generation(index, cache)
    gen.enqueue(canonical, RULE_ROOT, None)
    while gen.queue:
        gen.expand(gen.queue.popleft())
    for message in index.warnings:
        gen.warn(f"index: {message}")
    return Policy(
        library=index.library,
        root_class=QualifiedName.from_text(canonical),
        allowed_imports=frozenset(gen.imports),
        allowed_invocations=frozenset(gen.invocations),
        warnings=tuple(gen.warnings),
        derivations=tuple(gen.derivations.values()),
    )


def explain(policy: Policy, name: str) -> str:
    """Human-readable derivation chain for one name in a policy."""
    lines = [name]
    if policy.allows_invocation(name):
        lines.append("  allowed for import and invocation")
    elif policy.allows_import(name):
        lines.append("  allowed for import only")
    else:
        return (f"{name}\n  not allowed by this policy "
                f"(library: {policy.library or '(none)'})\n")
    current: str | None = name
    seen: set[str] = set()
    depth = 1
    while current is not None and current not in seen:
        seen.add(current)
        step = policy.derivation_for(current)
        if step is None:
            lines.append("  " * depth + "(no recorded derivation)")
            break
        rule = step.rule
        if rule.startswith(RULE_CACHE):
            origin = rule.partition(":")[2] or "unknown origin"
            text = (f"precomputed class-cache entry ({origin})"
                    if step.via is None
                    else f"included by the class-cache entry for {step.via}"
                    f" ({origin})")
        else:
            text = _RULE_TEXT.get(rule, rule).format(via=step.via)
        lines.append("  " * depth + f"because: {text}")
        if step.via is not None:
            lines.append("  " * depth + f"via: {step.via}")
        current = step.via
        depth += 1
    return "\n".join(lines) + "\n"
