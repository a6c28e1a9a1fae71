"""Static indexing of library source trees.

Builds, without importing anything, a picture of a library that policy
generation can walk: every class with its bases and attribute types, every
function with its return annotation, and a summary of each ``__reduce__``
implementation (which callable it returns and the types of the arguments
it passes).

Names are canonicalized to their definition site. Aliases, re-exports, and
relative imports are followed across the indexed modules, so a class
reached as ``toylib.Dense`` and one reached as ``toylib.layers.Dense``
resolve to the same record. Names defined outside the indexed tree keep
the dotted text they were written with.

Attribute types are gathered on an evidence ladder: an explicit annotation
(on the attribute or on the parameter assigned to it) beats a constructor
call, which beats a literal, which beats nothing. Conflicting evidence at
the same rung keeps the first occurrence and records a warning.
"""

from __future__ import annotations

import ast
from dataclasses import dataclass, field
from pathlib import Path

from .errors import NoSources

# -- type expressions ----------------------------------------------------

@dataclass(frozen=True)
class Named:
    """A concrete class or callable, by canonical dotted name."""
    name: str

    def render(self) -> str:
        return self.name


@dataclass(frozen=True)
class OptionalT:
    inner: "TypeExpr"

    def render(self) -> str:
        return f"Optional[{self.inner.render()}]"


@dataclass(frozen=True)
class UnionT:
    options: tuple["TypeExpr", ...]

    def render(self) -> str:
        return " | ".join(opt.render() for opt in self.options)


@dataclass(frozen=True)
class SequenceT:
    element: "TypeExpr"

    def render(self) -> str:
        return f"Sequence[{self.element.render()}]"


@dataclass(frozen=True)
class MappingT:
    key: "TypeExpr"
    value: "TypeExpr"

    def render(self) -> str:
        return f"Mapping[{self.key.render()}, {self.value.render()}]"


@dataclass(frozen=True)
class TupleT:
    elements: tuple["TypeExpr", ...]

    def render(self) -> str:
        inner = ", ".join(el.render() for el in self.elements)
        return f"Tuple[{inner}]"


@dataclass(frozen=True)
class AttrTable:
    """Stands for ``self.__dict__``: the owning class's attribute table."""
    class_name: str

    def render(self) -> str:
        return f"__dict__ of {self.class_name}"


@dataclass(frozen=True)
class Unknown:
    reason: str = ""

    def render(self) -> str:
        return "?" if not self.reason else f"?({self.reason})"


TypeExpr = object


def named_types(expr: TypeExpr):
    """Yield every Named leaf inside a type expression."""
    if isinstance(expr, Named):
        yield expr
    elif isinstance(expr, OptionalT):
        yield from named_types(expr.inner)
    elif isinstance(expr, UnionT):
        for opt in expr.options:
            yield from named_types(opt)
    elif isinstance(expr, SequenceT):
        yield from named_types(expr.element)
    elif isinstance(expr, MappingT):
        yield from named_types(expr.key)
        yield from named_types(expr.value)
    elif isinstance(expr, TupleT):
        for el in expr.elements:
            yield from named_types(el)


def attr_tables(expr: TypeExpr):
    if isinstance(expr, AttrTable):
        yield expr
    elif isinstance(expr, OptionalT):
        yield from attr_tables(expr.inner)
    elif isinstance(expr, UnionT):
        for opt in expr.options:
            yield from attr_tables(opt)
    elif isinstance(expr, (SequenceT,)):
        yield from attr_tables(expr.element)
    elif isinstance(expr, MappingT):
        yield from attr_tables(expr.key)
        yield from attr_tables(expr.value)
    elif isinstance(expr, TupleT):
        for el in expr.elements:
            yield from attr_tables(el)


def has_unknown(expr: TypeExpr) -> bool:
    if isinstance(expr, Unknown):
        return True
    if isinstance(expr, OptionalT):
        return has_unknown(expr.inner)
    if isinstance(expr, UnionT):
        return any(has_unknown(opt) for opt in expr.options)
    if isinstance(expr, SequenceT):
        return has_unknown(expr.element)
    if isinstance(expr, MappingT):
        return has_unknown(expr.key) or has_unknown(expr.value)
    if isinstance(expr, TupleT):
        return any(has_unknown(el) for el in expr.elements)
    return False


# -- records -------------------------------------------------------------

_LADDER = {"annotation": 3, "constructor": 2, "literal": 1, "unknown": 0}


@dataclass
class AttributeInfo:
    type: TypeExpr
    evidence: str  # annotation | constructor | literal | unknown


@dataclass(frozen=True)
class ReduceSummary:
    """What a __reduce__ implementation was seen to return."""

    callables: tuple[str, ...]
    dynamic_callable: bool
    types: tuple[TypeExpr, ...]
    warnings: tuple[str, ...] = ()


@dataclass
class ClassRecord:
    name: str  # canonical dotted name
    module: str
    bases: tuple[str, ...]
    attributes: dict[str, AttributeInfo] = field(default_factory=dict)
    reduce_summary: ReduceSummary | None = None
    defined_at: tuple[str, int] = ("", 0)
    warnings: list[str] = field(default_factory=list)


@dataclass
class FunctionRecord:
    name: str
    module: str
    return_type: TypeExpr = field(default_factory=Unknown)
    defined_at: tuple[str, int] = ("", 0)


@dataclass
class ModuleRecord:
    name: str
    path: Path
    is_package: bool
    bindings: dict[str, str] = field(default_factory=dict)


_BUILTIN_TYPE_NAMES = {
    "int", "str", "float", "bool", "bytes", "bytearray", "list", "dict",
    "tuple", "set", "frozenset", "complex", "range", "slice", "object",
    "type", "NoneType",
}

_SEQUENCE_BASES = {
    "builtins.list", "builtins.set", "builtins.frozenset",
    "typing.List", "typing.Set", "typing.FrozenSet", "typing.Sequence",
    "typing.Iterable", "typing.MutableSequence", "typing.AbstractSet",
    "collections.abc.Sequence", "collections.abc.Iterable",
    "collections.abc.Set", "collections.abc.MutableSequence",
}

_MAPPING_BASES = {
    "builtins.dict", "typing.Dict", "typing.Mapping",
    "typing.MutableMapping", "typing.OrderedDict", "typing.DefaultDict",
    "collections.abc.Mapping", "collections.abc.MutableMapping",
    "collections.OrderedDict", "collections.defaultdict",
}

_TUPLE_BASES = {"builtins.tuple", "typing.Tuple"}
_OPTIONAL_BASES = {"typing.Optional"}
_UNION_BASES = {"typing.Union"}
_CLASSVAR_BASES = {"typing.ClassVar", "typing.Final"}


class LibraryIndex:
    """Everything the indexer learned about one source tree."""

    def __init__(self, root: Path, library: str):
        self.root = root
        self.library = library
        self.modules: dict[str, ModuleRecord] = {}
        self.classes: dict[str, ClassRecord] = {}
        self.functions: dict[str, FunctionRecord] = {}
        self.warnings: list[str] = []
        self._subclasses: dict[str, list[str]] = {}

    # -- name resolution -------------------------------------------------

    def canonicalize(self, dotted: str, _seen: frozenset = frozenset()) -> str:
        if dotted in self.classes or dotted in self.functions:
            return dotted
        if dotted in _seen:
            return dotted
        module, sep, attr = dotted.rpartition(".")
        while sep:
            record = self.modules.get(module)
            if record is not None:
                target = record.bindings.get(attr.split(".", 1)[0])
                if target is None:
                    return dotted
                remainder = attr.split(".", 1)
                rebuilt = target + (
                    "." + remainder[1] if len(remainder) > 1 else "")
                return self.canonicalize(rebuilt, _seen | {dotted})
            # Try a shorter module prefix: "pkg.sub.Cls.Inner" cases.
            prefix, sep2, trailer = module.rpartition(".")
            if not sep2:
                return dotted
            module, attr = prefix, f"{trailer}.{attr}"
            sep = sep2
        return dotted

    def resolve(self, module: str, text: str) -> str:
        """Resolve a dotted reference as written in `module` to a canonical
        name. Unresolvable references come back as written."""
        head, sep, rest = text.partition(".")
        record = self.modules.get(module)
        binding = record.bindings.get(head) if record else None
        if binding is None:
            if head in _BUILTIN_TYPE_NAMES and not sep:
                return f"builtins.{text}"
            return self.canonicalize(text)
        target = binding + (f".{rest}" if sep else "")
        return self.canonicalize(target)

    # -- queries ----------------------------------------------------------

    def subclasses_of(self, name: str) -> list[str]:
        """Transitive subclasses, depth-first, each reported once."""
        out: list[str] = []
        seen = {name}
        stack = list(reversed(self._subclasses.get(name, [])))
        while stack:
            child = stack.pop()
            if child in seen:
                continue
            seen.add(child)
            out.append(child)
            stack.extend(reversed(self._subclasses.get(child, [])))
        return out

    def attributes_of(self, name: str) -> tuple[dict[str, AttributeInfo],
                                                list[str]]:
        """Own and inherited attributes; subclasses shadow their bases,
        diamond bases are visited once."""
        merged: dict[str, AttributeInfo] = {}
        warnings: list[str] = []
        visited: set[str] = set()

        def visit(cname: str) -> None:
            if cname in visited:
                return
            visited.add(cname)
            record = self.classes.get(cname)
            if record is None:
                return
            for attr, info in record.attributes.items():
                if attr not in merged:
                    merged[attr] = info
                elif merged[attr].type != info.type:
                    warnings.append(
                        f"{name}: attribute {attr!r} inherited with "
                        f"conflicting types; kept "
                        f"{merged[attr].type.render()}")
            for base in record.bases:
                visit(base)

        visit(name)
        return merged, warnings


# -- indexing ------------------------------------------------------------

def _module_files(path: Path) -> tuple[list[tuple[str, Path, bool]], str]:
    """Return (module name, file, is_package) triples plus a library name."""
    path = path.resolve()
    if path.is_file() and path.suffix == ".py":
        return [(path.stem, path, False)], path.stem

    def walk_package(pkg_dir: Path, prefix: str, out: list) -> None:
        out.append((prefix, pkg_dir / "__init__.py", True))
        for child in sorted(pkg_dir.iterdir()):
            if child.is_file() and child.suffix == ".py" \
                    and child.name != "__init__.py":
                out.append((f"{prefix}.{child.stem}", child, False))
            elif child.is_dir() and (child / "__init__.py").is_file():
                walk_package(child, f"{prefix}.{child.name}", out)

    if path.is_dir():
        out: list[tuple[str, Path, bool]] = []
        if (path / "__init__.py").is_file():
            walk_package(path, path.name, out)
            return out, path.name
        for child in sorted(path.iterdir()):
            if child.is_file() and child.suffix == ".py":
                out.append((child.stem, child, False))
            elif child.is_dir() and (child / "__init__.py").is_file():
                walk_package(child, child.name, out)
        if out:
            return out, path.name
    raise NoSources(str(path))


def index_library(path: Path | str) -> LibraryIndex:
    """Index every Python source file under `path`."""
    path = Path(path)
    files, library = _module_files(path)
    index = LibraryIndex(path, library)
    trees: dict[str, ast.Module] = {}
    for module, file, is_package in files:
        record = ModuleRecord(name=module, path=file, is_package=is_package)
        index.modules[module] = record
        try:
            source = file.read_text(encoding="utf-8")
            trees[module] = ast.parse(source, filename=str(file))
        except (OSError, SyntaxError) as exc:
            index.warnings.append(f"{file}: skipped ({exc})")

    # Pass 1: definitions and import bindings.
    for module, tree in trees.items():
        _collect_bindings(index, module, tree)
    # Pass 2: class bodies, now that cross-module names resolve.
    for module, tree in trees.items():
        _collect_classes(index, module, tree)
    # Reverse subclass edges.
    for record in index.classes.values():
        for base in record.bases:
            index._subclasses.setdefault(base, []).append(record.name)
    return index


def _collect_bindings(index: LibraryIndex, module: str,
                      tree: ast.Module) -> None:
    record = index.modules[module]
    package = module if record.is_package else module.rpartition(".")[0]
    for node in tree.body:
        if isinstance(node, ast.Import):
            for alias in node.names:
                if alias.asname:
                    record.bindings[alias.asname] = alias.name
                else:
                    top = alias.name.split(".")[0]
                    record.bindings[top] = top
        elif isinstance(node, ast.ImportFrom):
            base = node.module or ""
            if node.level:
                steps = package.split(".") if package else []
                if node.level - 1 > 0:
                    steps = steps[:-(node.level - 1)] if node.level - 1 <= \
                        len(steps) else []
                base = ".".join(steps + ([node.module] if node.module else []))
            for alias in node.names:
                if alias.name == "*":
                    index.warnings.append(
                        f"{module}: star import from {base or '?'} ignored")
                    continue
                bound = alias.asname or alias.name
                record.bindings[bound] = (f"{base}.{alias.name}"
                                          if base else alias.name)
        elif isinstance(node, (ast.ClassDef, ast.FunctionDef,
                               ast.AsyncFunctionDef)):
            record.bindings[node.name] = f"{module}.{node.name}"
        elif isinstance(node, ast.Assign) and len(node.targets) == 1 \
                and isinstance(node.targets[0], ast.Name):
            # Module-level alias: X = SomeName
            text = _dotted_text(node.value)
            if text:
                record.bindings.setdefault(node.targets[0].id, text)

    # Rewrite local alias targets through the import table so that
    # "X = SomeImportedName" binds to the import's full target. Bounded
    # fixpoint so alias-of-alias chains settle.
    for _ in range(4):
        changed = False
        for name, target in list(record.bindings.items()):
            head, sep, rest = target.partition(".")
            if head in record.bindings and record.bindings[head] != target \
                    and not target.startswith(f"{module}."):
                resolved = record.bindings[head] + (f".{rest}" if sep else "")
                if resolved not in (name, target):
                    record.bindings[name] = resolved
                    changed = True
        if not changed:
            break


def _dotted_text(node: ast.AST) -> str | None:
    if isinstance(node, ast.Name):
        return node.id
    if isinstance(node, ast.Attribute):
        base = _dotted_text(node.value)
        return f"{base}.{node.attr}" if base else None
    return None


def _collect_classes(index: LibraryIndex, module: str,
                     tree: ast.Module) -> None:
    path = str(index.modules[module].path)

    def visit_body(body, qual_prefix: str) -> None:
        for node in body:
            if isinstance(node, ast.ClassDef):
                canonical = f"{qual_prefix}.{node.name}"
                _index_class(index, module, canonical, node, path)
                visit_body(node.body, canonical)
            elif isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)) \
                    and qual_prefix == module:
                index.functions[f"{module}.{node.name}"] = FunctionRecord(
                    name=f"{module}.{node.name}",
                    module=module,
                    return_type=_annotation_type(index, module, node.returns),
                    defined_at=(path, node.lineno),
                )

    visit_body(tree.body, module)


def _index_class(index: LibraryIndex, module: str, canonical: str,
                 node: ast.ClassDef, path: str) -> None:
    bases = []
    for base in node.bases:
        text = _dotted_text(base)
        if text is None:
            index.warnings.append(
                f"{canonical}: unresolvable base expression ignored")
            continue
        bases.append(index.resolve(module, text))
    record = ClassRecord(
        name=canonical,
        module=module,
        bases=tuple(bases),
        defined_at=(path, node.lineno),
    )
    index.classes[canonical] = record

    # Class-level attribute declarations.
    for stmt in node.body:
        if isinstance(stmt, ast.AnnAssign) and isinstance(stmt.target,
                                                          ast.Name):
            expr = _annotation_type(index, module, stmt.annotation)
            _record_attr(record, stmt.target.id, expr, "annotation")
        elif isinstance(stmt, ast.Assign):
            for target in stmt.targets:
                if isinstance(target, ast.Name) \
                        and not target.id.startswith("__"):
                    expr, evidence = _value_type(index, module, record,
                                                 stmt.value, {})
                    _record_attr(record, target.id, expr, evidence)

    # Instance attributes assigned through self in any method.
    for stmt in node.body:
        if not isinstance(stmt, (ast.FunctionDef, ast.AsyncFunctionDef)):
            continue
        params = _param_annotations(index, module, stmt)
        for sub in ast.walk(stmt):
            if isinstance(sub, ast.AnnAssign) \
                    and _is_self_attr(sub.target):
                expr = _annotation_type(index, module, sub.annotation)
                _record_attr(record, sub.target.attr, expr, "annotation")
            elif isinstance(sub, ast.Assign):
                for target in sub.targets:
                    if _is_self_attr(target):
                        expr, evidence = _value_type(
                            index, module, record, sub.value, params)
                        _record_attr(record, target.attr, expr, evidence)

    reducer = _find_reducer(node)
    if reducer is not None:
        record.reduce_summary = _summarize_reduce(
            index, module, record, reducer)


def _is_self_attr(node: ast.AST) -> bool:
    return (isinstance(node, ast.Attribute)
            and isinstance(node.value, ast.Name)
            and node.value.id == "self")


def _record_attr(record: ClassRecord, name: str, expr: TypeExpr,
                 evidence: str) -> None:
    current = record.attributes.get(name)
    if current is None:
        record.attributes[name] = AttributeInfo(expr, evidence)
        return
    if _LADDER[evidence] > _LADDER[current.evidence]:
        record.attributes[name] = AttributeInfo(expr, evidence)
    elif (_LADDER[evidence] == _LADDER[current.evidence]
          and current.type != expr and not isinstance(expr, Unknown)):
        record.warnings.append(
            f"{record.name}.{name}: conflicting {evidence} evidence; "
            f"kept {current.type.render()}")


def _param_annotations(index: LibraryIndex, module: str,
                       func: ast.FunctionDef) -> dict[str, TypeExpr]:
    params: dict[str, TypeExpr] = {}
    args = func.args
    for arg in (args.posonlyargs + args.args + args.kwonlyargs):
        if arg.annotation is not None:
            params[arg.arg] = _annotation_type(index, module, arg.annotation)
    return params


# -- annotation and value typing ------------------------------------------

def _annotation_type(index: LibraryIndex, module: str,
                     node: ast.AST | None) -> TypeExpr:
    if node is None:
        return Unknown()
    if isinstance(node, ast.Constant):
        if node.value is None:
            return Named("builtins.NoneType")
        if isinstance(node.value, str):
            try:
                inner = ast.parse(node.value, mode="eval").body
            except SyntaxError:
                return Unknown("unparsable string annotation")
            return _annotation_type(index, module, inner)
        return Unknown("constant annotation")
    if isinstance(node, (ast.Name, ast.Attribute)):
        text = _dotted_text(node)
        if text is None:
            return Unknown("complex annotation")
        if text == "None":
            return Named("builtins.NoneType")
        resolved = index.resolve(module, text)
        if resolved == "typing.Any":
            return Unknown("Any")
        return Named(resolved)
    if isinstance(node, ast.BinOp) and isinstance(node.op, ast.BitOr):
        left = _annotation_type(index, module, node.left)
        right = _annotation_type(index, module, node.right)
        return _fold_union((left, right))
    if isinstance(node, ast.Subscript):
        return _subscript_type(index, module, node)
    return Unknown("unsupported annotation form")


def _fold_union(options: tuple[TypeExpr, ...]) -> TypeExpr:
    flat: list[TypeExpr] = []
    for opt in options:
        if isinstance(opt, UnionT):
            flat.extend(opt.options)
        else:
            flat.append(opt)
    none = Named("builtins.NoneType")
    if none in flat:
        rest = tuple(opt for opt in flat if opt != none)
        if len(rest) == 1:
            return OptionalT(rest[0])
        flat = list(rest) + [none]
    if len(flat) == 1:
        return flat[0]
    return UnionT(tuple(flat))


def _subscript_type(index: LibraryIndex, module: str,
                    node: ast.Subscript) -> TypeExpr:
    base_text = _dotted_text(node.value)
    if base_text is None:
        return Unknown("complex subscript")
    base = index.resolve(module, base_text)
    sl = node.slice
    params = list(sl.elts) if isinstance(sl, ast.Tuple) else [sl]

    def param(i: int) -> TypeExpr:
        if i < len(params):
            return _annotation_type(index, module, params[i])
        return Unknown()

    if base in _CLASSVAR_BASES:
        return param(0)
    if base in _OPTIONAL_BASES:
        return OptionalT(param(0))
    if base in _UNION_BASES:
        return _fold_union(tuple(
            _annotation_type(index, module, p) for p in params))
    if base in _TUPLE_BASES:
        if (len(params) == 2 and isinstance(params[1], ast.Constant)
                and params[1].value is Ellipsis):
            return SequenceT(param(0))
        return TupleT(tuple(
            _annotation_type(index, module, p) for p in params))
    if base in _SEQUENCE_BASES:
        return SequenceT(param(0))
    if base in _MAPPING_BASES:
        if base in ("collections.OrderedDict", "collections.defaultdict"):
            # The container class itself must stay importable.
            return UnionT((Named(base), MappingT(param(0), param(1))))
        return MappingT(param(0), param(1))
    # A generic class: the class itself plus its type arguments.
    inner = tuple(_annotation_type(index, module, p) for p in params)
    return UnionT((Named(base),) + inner)


def _value_type(index: LibraryIndex, module: str, record: ClassRecord,
                node: ast.AST, params: dict[str, TypeExpr],
                ) -> tuple[TypeExpr, str]:
    """Infer a type for a value expression, with its evidence rung."""
    if isinstance(node, ast.Constant):
        value = node.value
        if value is None:
            return Named("builtins.NoneType"), "literal"
        kind = type(value).__name__
        if kind in _BUILTIN_TYPE_NAMES:
            return Named(f"builtins.{kind}"), "literal"
        return Unknown("constant"), "literal"
    if isinstance(node, ast.Name):
        if node.id in params:
            return params[node.id], "annotation"
        resolved = index.resolve(module, node.id)
        if (resolved in index.classes or resolved in index.functions
                or ("." in resolved and resolved != node.id)):
            return Named(resolved), "constructor"
        return Unknown(f"name {node.id}"), "unknown"
    if isinstance(node, ast.Attribute):
        if _is_self_attr(node):
            if node.attr == "__dict__":
                return AttrTable(record.name), "annotation"
            info = record.attributes.get(node.attr)
            if info is not None:
                return info.type, info.evidence
            return Unknown(f"self.{node.attr}"), "unknown"
        text = _dotted_text(node)
        if text is not None:
            return Named(index.resolve(module, text)), "constructor"
        return Unknown("attribute"), "unknown"
    if isinstance(node, ast.Call):
        text = _dotted_text(node.func)
        if text is None:
            return Unknown("computed call"), "unknown"
        resolved = index.resolve(module, text)
        fn = index.functions.get(resolved)
        if fn is not None:
            if isinstance(fn.return_type, Unknown):
                return Named(resolved), "constructor"
            return fn.return_type, "constructor"
        return Named(resolved), "constructor"
    if isinstance(node, (ast.List, ast.Set)):
        element = _merge_value_types(index, module, record, node.elts, params)
        return SequenceT(element), "literal"
    if isinstance(node, ast.Tuple):
        elements = tuple(
            _value_type(index, module, record, el, params)[0]
            for el in node.elts)
        return TupleT(elements), "literal"
    if isinstance(node, ast.Dict):
        keys = [k for k in node.keys if k is not None]
        key = _merge_value_types(index, module, record, keys, params)
        value = _merge_value_types(index, module, record, node.values, params)
        return MappingT(key, value), "literal"
    return Unknown("expression"), "unknown"


def _merge_value_types(index: LibraryIndex, module: str, record: ClassRecord,
                       nodes: list, params: dict) -> TypeExpr:
    if not nodes:
        return Unknown("empty literal")
    seen: list[TypeExpr] = []
    for node in nodes:
        expr, _ = _value_type(index, module, record, node, params)
        if expr not in seen:
            seen.append(expr)
    return seen[0] if len(seen) == 1 else _fold_union(tuple(seen))


# -- __reduce__ summaries --------------------------------------------------

def _find_reducer(node: ast.ClassDef) -> ast.FunctionDef | None:
    chosen = None
    for stmt in node.body:
        if isinstance(stmt, ast.FunctionDef):
            if stmt.name == "__reduce_ex__":
                return stmt
            if stmt.name == "__reduce__":
                chosen = stmt
    return chosen


def _summarize_reduce(index: LibraryIndex, module: str, record: ClassRecord,
                      func: ast.FunctionDef) -> ReduceSummary:
    callables: list[str] = []
    types: list[TypeExpr] = []
    warnings: list[str] = []
    dynamic = False
    params = _param_annotations(index, module, func)
    returns = [n for n in ast.walk(func) if isinstance(n, ast.Return)
               and n.value is not None]
    if not returns:
        warnings.append(f"{record.name}.__reduce__ has no return value")
        dynamic = True

    for ret in returns:
        value = ret.value
        if not isinstance(value, ast.Tuple) or not value.elts:
            warnings.append(
                f"{record.name}.__reduce__ returns a non-literal tuple; "
                f"callable unknown")
            dynamic = True
            continue
        elts = value.elts
        callee_text = _dotted_text(elts[0])
        if callee_text is None or callee_text.startswith("self."):
            warnings.append(
                f"{record.name}.__reduce__ callable is computed at runtime")
            dynamic = True
        else:
            resolved = index.resolve(module, callee_text)
            if resolved not in callables:
                callables.append(resolved)
        if len(elts) > 1:
            args = elts[1]
            if isinstance(args, ast.Tuple):
                for el in args.elts:
                    expr, _ = _value_type(index, module, record, el, params)
                    types.append(expr)
            else:
                expr, _ = _value_type(index, module, record, args, params)
                if isinstance(expr, TupleT):
                    types.extend(expr.elements)
                else:
                    types.append(Unknown("argument tuple not literal"))
                    warnings.append(
                        f"{record.name}.__reduce__ argument tuple is not "
                        f"a literal")
        if len(elts) > 2 and not _is_none(elts[2]):
            expr, _ = _value_type(index, module, record, elts[2], params)
            types.append(expr)
        if len(elts) > 3 and not _is_none(elts[3]):
            types.append(SequenceT(Unknown("reduce list items")))
            warnings.append(
                f"{record.name}.__reduce__ supplies list items; element "
                f"types unknown")
        if len(elts) > 4 and not _is_none(elts[4]):
            types.append(MappingT(Unknown("reduce dict keys"),
                                  Unknown("reduce dict values")))
            warnings.append(
                f"{record.name}.__reduce__ supplies dict items; entry "
                f"types unknown")
        if len(elts) > 5 and not _is_none(elts[5]):
            warnings.append(
                f"{record.name}.__reduce__ supplies a state setter; it "
                f"will not be called during restricted loading")

    return ReduceSummary(
        callables=tuple(callables),
        dynamic_callable=dynamic,
        types=tuple(types),
        warnings=tuple(warnings),
    )


def _is_none(node: ast.AST) -> bool:
    return isinstance(node, ast.Constant) and node.value is None


# -- display ---------------------------------------------------------------

def index_text(index: LibraryIndex) -> str:
    lines = [f"library: {index.library}",
             f"modules: {', '.join(sorted(index.modules))}"]
    for name in sorted(index.classes):
        record = index.classes[name]
        bases = ", ".join(record.bases) if record.bases else "(none)"
        lines.append(f"class {name} (bases: {bases})")
        for attr in sorted(record.attributes):
            info = record.attributes[attr]
            lines.append(f"  {attr}: {info.type.render()} "
                         f"[{info.evidence}]")
        summary = record.reduce_summary
        if summary is not None:
            callables = ", ".join(summary.callables) or "(dynamic)"
            lines.append(f"  __reduce__ -> {callables}")
            for expr in summary.types:
                lines.append(f"    arg: {expr.render()}")
    for name in sorted(index.functions):
        fn = index.functions[name]
        lines.append(f"def {name} -> {fn.return_type.render()}")
    for warning in index.warnings:
        lines.append(f"warning: {warning}")
    return "\n".join(lines) + "\n"
