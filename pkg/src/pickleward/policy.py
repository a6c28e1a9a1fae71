"""Policy model: qualified names, allow-sets, serialization, class cache.

A policy is the contract between static analysis of a library and the
restricted execution of a pickle claiming to come from that library. It
carries two name sets: imports the loader may resolve, and the subset of
those that may actually be invoked. Matching is exact full-text matching
on dotted names; there is deliberately no prefix or wildcard form.

Policies serialize to a canonical JSON document (schema
``pickleward-policy/1``) with sorted name lists, so regenerating the same
policy always produces byte-identical files. Class-cache entries reuse the
same document shape, one file per class, named ``<module>.<attr>.json``.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import (
    MissingRootClass,
    PolicyError,
    PolicyFileError,
    SubsetViolation,
)

POLICY_SCHEMA = "pickleward-policy/1"
GENERATOR_VERSION = "0.1.0"

_NAME_RE = re.compile(r"[^\s\x00-\x1f]+")


@dataclass(frozen=True, order=True)
class QualifiedName:
    """A dotted import path split at its final dot.

    ``QualifiedName("os", "system")`` and anything else whose full text is
    ``"os.system"`` compare equal; the module/attribute split is kept only
    for reporting.
    """

    module: str = field(compare=False)
    attr: str = field(compare=False)
    text: str = field(init=False)

    def __post_init__(self):
        if not self.module or not self.attr:
            raise ValueError("qualified name needs module and attribute")
        text = f"{self.module}.{self.attr}"
        if not _NAME_RE.fullmatch(text) or "" in text.split("."):
            raise ValueError(f"malformed qualified name: {text!r}")
        object.__setattr__(self, "text", text)

    @classmethod
    def from_text(cls, text: str) -> "QualifiedName":
        module, sep, attr = text.rpartition(".")
        if not sep:
            raise ValueError(f"qualified name has no module part: {text!r}")
        return cls(module, attr)

    def __str__(self) -> str:
        return self.text


@dataclass(frozen=True)
class DerivationStep:
    """Why a name entered a policy: the rule that added it and the name it
    was reached from (None for the root)."""

    name: str
    rule: str
    via: str | None = None


@dataclass(frozen=True)
class Policy:
    library: str
    root_class: QualifiedName | None
    allowed_imports: frozenset[QualifiedName]
    allowed_invocations: frozenset[QualifiedName]
    warnings: tuple[str, ...] = ()
    generator_version: str = GENERATOR_VERSION
    derivations: tuple[DerivationStep, ...] = ()
    _import_texts: frozenset[str] = field(
        init=False, compare=False, repr=False, default=frozenset())
    _invocation_texts: frozenset[str] = field(
        init=False, compare=False, repr=False, default=frozenset())

    def __post_init__(self):
        object.__setattr__(self, "allowed_imports",
                           frozenset(self.allowed_imports))
        object.__setattr__(self, "allowed_invocations",
                           frozenset(self.allowed_invocations))
        object.__setattr__(self, "warnings", tuple(self.warnings))
        object.__setattr__(
            self, "derivations",
            tuple(sorted(self.derivations, key=lambda d: (d.name, d.rule))))
        extras = self.allowed_invocations - self.allowed_imports
        if extras:
            raise SubsetViolation(sorted(q.text for q in extras))
        if (self.root_class is not None
                and self.root_class not in self.allowed_imports):
            raise MissingRootClass(self.root_class.text)
        object.__setattr__(
            self, "_import_texts",
            frozenset(q.text for q in self.allowed_imports))
        object.__setattr__(
            self, "_invocation_texts",
            frozenset(q.text for q in self.allowed_invocations))

    @property
    def import_texts(self) -> frozenset[str]:
        return self._import_texts

    @property
    def invocation_texts(self) -> frozenset[str]:
        return self._invocation_texts

    def allows_import(self, name: str) -> bool:
        return name in self._import_texts

    def allows_invocation(self, name: str) -> bool:
        return name in self._invocation_texts

    @classmethod
    def empty(cls, library: str = "") -> "Policy":
        """The deny-everything policy: every import becomes a stub."""
        return cls(library=library, root_class=None,
                   allowed_imports=frozenset(),
                   allowed_invocations=frozenset())

    def derivation_for(self, name: str) -> DerivationStep | None:
        for step in self.derivations:
            if step.name == name:
                return step
        return None


def merge(a: Policy, b: Policy) -> Policy:
    """Union of two policies; commutative up to warning order."""
    warnings = list(a.warnings) + list(b.warnings)
    root = a.root_class or b.root_class
    if (a.root_class is not None and b.root_class is not None
            and a.root_class != b.root_class):
        root = min(a.root_class, b.root_class)
        warnings.append(
            "merge: differing root classes "
            f"{a.root_class.text} and {b.root_class.text}; "
            f"kept {root.text}")
    libraries = sorted({name for name in (a.library, b.library) if name})
    seen: dict[str, DerivationStep] = {}
    for step in sorted(a.derivations + b.derivations,
                       key=lambda d: (d.name, d.rule, d.via or "")):
        seen.setdefault(step.name, step)
    return Policy(
        library="+".join(libraries),
        root_class=root,
        allowed_imports=a.allowed_imports | b.allowed_imports,
        allowed_invocations=a.allowed_invocations | b.allowed_invocations,
        warnings=tuple(warnings),
        generator_version=max(a.generator_version, b.generator_version),
        derivations=tuple(seen.values()),
    )


# -- serialization ------------------------------------------------------------

def policy_to_document(policy: Policy) -> dict:
    doc = {
        "schema": POLICY_SCHEMA,
        "library": policy.library,
        "root_class": policy.root_class.text if policy.root_class else None,
        "allowed_imports": sorted(q.text for q in policy.allowed_imports),
        "allowed_invocations": sorted(
            q.text for q in policy.allowed_invocations),
        "warnings": list(policy.warnings),
        "generator_version": policy.generator_version,
    }
    if policy.derivations:
        doc["derivations"] = {
            step.name: {"rule": step.rule, "via": step.via}
            for step in sorted(policy.derivations, key=lambda d: d.name)
        }
    return doc


def dumps_policy(policy: Policy) -> str:
    return json.dumps(policy_to_document(policy), indent=2) + "\n"


def write_policy(policy: Policy, path: Path | str) -> None:
    Path(path).write_text(dumps_policy(policy), encoding="utf-8")


def _require(doc: dict, key: str, types, where: str):
    if key not in doc:
        raise PolicyFileError(f"{where}: missing key {key!r}")
    value = doc[key]
    if not isinstance(value, types):
        raise PolicyFileError(f"{where}: key {key!r} has wrong type")
    return value


def policy_from_document(doc: object, where: str = "policy") -> Policy:
    if not isinstance(doc, dict):
        raise PolicyFileError(f"{where}: document is not an object")
    schema = _require(doc, "schema", str, where)
    if schema != POLICY_SCHEMA:
        raise PolicyFileError(f"{where}: unsupported schema {schema!r}")
    library = _require(doc, "library", str, where)
    root_text = doc.get("root_class")
    if root_text is not None and not isinstance(root_text, str):
        raise PolicyFileError(f"{where}: key 'root_class' has wrong type")

    def names(key: str) -> frozenset[QualifiedName]:
        raw = _require(doc, key, list, where)
        out = set()
        for item in raw:
            if not isinstance(item, str):
                raise PolicyFileError(f"{where}: {key} entries must be strings")
            try:
                out.add(QualifiedName.from_text(item))
            except ValueError as exc:
                raise PolicyFileError(f"{where}: {exc}") from exc
        return frozenset(out)

    warnings = doc.get("warnings", [])
    if not (isinstance(warnings, list)
            and all(isinstance(w, str) for w in warnings)):
        raise PolicyFileError(f"{where}: key 'warnings' has wrong type")
    version = doc.get("generator_version", GENERATOR_VERSION)
    if not isinstance(version, str):
        raise PolicyFileError(f"{where}: key 'generator_version' has wrong type")
    derivations = []
    raw_deriv = doc.get("derivations", {})
    if not isinstance(raw_deriv, dict):
        raise PolicyFileError(f"{where}: key 'derivations' has wrong type")
    for name, entry in raw_deriv.items():
        if not (isinstance(entry, dict) and isinstance(entry.get("rule"), str)
                and (entry.get("via") is None
                     or isinstance(entry.get("via"), str))):
            raise PolicyFileError(f"{where}: bad derivation for {name!r}")
        derivations.append(
            DerivationStep(name, entry["rule"], entry.get("via")))
    try:
        root = (QualifiedName.from_text(root_text)
                if root_text is not None else None)
    except ValueError as exc:
        raise PolicyFileError(f"{where}: {exc}") from exc
    try:
        return Policy(
            library=library,
            root_class=root,
            allowed_imports=names("allowed_imports"),
            allowed_invocations=names("allowed_invocations"),
            warnings=tuple(warnings),
            generator_version=version,
            derivations=tuple(derivations),
        )
    except PolicyFileError:
        raise
    except PolicyError as exc:
        # Structural invariants (subset, root membership) violated by the
        # document itself.
        raise PolicyFileError(f"{where}: {exc}") from exc


def loads_policy(text: str, where: str = "policy") -> Policy:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PolicyFileError(f"{where}: not valid JSON ({exc})") from exc
    return policy_from_document(doc, where)


def read_policy(path: Path | str) -> Policy:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise PolicyFileError(f"{path}: {exc}") from exc
    return loads_policy(text, where=str(path))


# -- class cache --------------------------------------------------------------

ORIGIN_BUILTIN = "Builtin"
ORIGIN_VENDORED = "Vendored"
ORIGIN_USER = "UserSupplied"


@dataclass(frozen=True)
class ClassCacheEntry:
    """Precomputed allow-sets for one class, keyed by its qualified name."""

    class_name: QualifiedName
    imports: frozenset[QualifiedName]
    invocations: frozenset[QualifiedName]
    origin: str

    def as_policy(self) -> Policy:
        return Policy(
            library=self.class_name.module.split(".")[0],
            root_class=self.class_name,
            allowed_imports=self.imports,
            allowed_invocations=self.invocations,
            warnings=(),
        )


def _entry(text: str, imports: list[str], invocations: list[str],
           origin: str) -> ClassCacheEntry:
    return ClassCacheEntry(
        class_name=QualifiedName.from_text(text),
        imports=frozenset(QualifiedName.from_text(t) for t in imports),
        invocations=frozenset(QualifiedName.from_text(t) for t in invocations),
        origin=origin,
    )


# Data-shaped builtins that commonly appear in attribute annotations but
# live outside the skip list of plain container types.
_BUILTIN_ENTRIES = {
    entry.class_name.text: entry
    for entry in (
        _entry("builtins.object", ["builtins.object"], [], ORIGIN_BUILTIN),
        _entry("builtins.complex", ["builtins.complex"],
               ["builtins.complex"], ORIGIN_BUILTIN),
        _entry("builtins.range", ["builtins.range"],
               ["builtins.range"], ORIGIN_BUILTIN),
        _entry("builtins.slice", ["builtins.slice"],
               ["builtins.slice"], ORIGIN_BUILTIN),
        _entry("builtins.bytearray", ["builtins.bytearray"],
               ["builtins.bytearray"], ORIGIN_BUILTIN),
        _entry("builtins.frozenset", ["builtins.frozenset"],
               ["builtins.frozenset"], ORIGIN_BUILTIN),
    )
}


def _entry_from_policy(policy: Policy, origin: str,
                       where: str) -> ClassCacheEntry:
    if policy.root_class is None:
        raise PolicyFileError(f"{where}: cache entry has no root_class")
    return ClassCacheEntry(
        class_name=policy.root_class,
        imports=policy.allowed_imports,
        invocations=policy.allowed_invocations,
        origin=origin,
    )


class ClassCache:
    """Layered lookup of precomputed class policies.

    User-supplied entries (a directory of ``<name>.json`` files) shadow the
    vendored entries shipped with the package, which shadow the in-code
    builtin entries.
    """

    def __init__(self, user_dir: Path | str | None = None):
        self.user_dir = Path(user_dir) if user_dir else None

    def lookup(self, name: str) -> ClassCacheEntry | None:
        if self.user_dir is not None:
            candidate = self.user_dir / f"{name}.json"
            if candidate.is_file():
                policy = read_policy(candidate)
                return _entry_from_policy(policy, ORIGIN_USER, str(candidate))
        vendored = resources.files("pickleward") / "data" / "cache" / (
            f"{name}.json")
        if vendored.is_file():
            policy = loads_policy(vendored.read_text(encoding="utf-8"),
                                  where=f"vendored cache {name}")
            return _entry_from_policy(policy, ORIGIN_VENDORED,
                                      f"vendored cache {name}")
        return _BUILTIN_ENTRIES.get(name)


def load_baseline_policy() -> Policy:
    """The conservative built-in allowlist used for comparisons: plain
    containers and a handful of stdlib collection classes, nothing else."""
    text = (resources.files("pickleward") / "data"
            / "baseline_policy.json").read_text(encoding="utf-8")
    return loads_policy(text, where="baseline policy")
