"""Policy model: names, validation, merge algebra, file round-trips, cache."""

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from pickleward import (
    ClassCache,
    MissingRootClass,
    Policy,
    PolicyFileError,
    QualifiedName,
    SubsetViolation,
    load_baseline_policy,
    merge,
    read_policy,
    write_policy,
)
from pickleward.policy import dumps_policy, loads_policy


def q(text: str) -> QualifiedName:
    return QualifiedName.from_text(text)


def make_policy(imports, invocations, root=None, library="lib") -> Policy:
    return Policy(
        library=library,
        root_class=q(root) if root else None,
        allowed_imports=frozenset(q(t) for t in imports),
        allowed_invocations=frozenset(q(t) for t in invocations),
        warnings=(),
    )


def test_qualified_name_parsing():
    name = q("torch.nn.Module")
    assert name.module == "torch.nn"
    assert name.attr == "Module"
    assert name.text == "torch.nn.Module"
    assert q("os.system").module == "os"


def test_qualified_name_rejects_garbage():
    for bad in ("", "noattr", "a..b", "a.b\nc", "a b.c", ".leading"):
        with pytest.raises(Exception):
            q(bad)


def test_qualified_name_identity_is_full_text():
    assert q("a.f") != q("b.f")
    assert q("a.f") == q("a.f")
    assert sorted([q("b.a"), q("a.z")]) == [q("a.z"), q("b.a")]


def test_invocations_must_be_subset_of_imports():
    with pytest.raises(SubsetViolation):
        make_policy(["m.A"], ["m.A", "m.B"])


def test_root_class_must_be_imported():
    with pytest.raises(MissingRootClass):
        make_policy(["m.A"], [], root="m.Root")
    policy = make_policy(["m.Root", "m.A"], ["m.A"], root="m.Root")
    assert policy.allows_import("m.Root")


def test_membership_queries():
    policy = make_policy(["m.A", "m.f"], ["m.f"], root="m.A")
    assert policy.allows_import("m.A")
    assert not policy.allows_invocation("m.A")
    assert policy.allows_invocation("m.f")
    assert not policy.allows_import("m.Other")
    assert not policy.allows_import("mm.A")  # no prefix tricks


def test_empty_policy_allows_nothing():
    empty = Policy.empty()
    assert not empty.allows_import("builtins.len")
    assert empty.root_class is None


names = st.sets(
    st.sampled_from([f"m{i}.C{i}" for i in range(8)]), max_size=6)


@st.composite
def policies_(draw):
    imports = draw(names)
    invocations = {n for n in imports if draw(st.booleans())}
    root = sorted(imports)[0] if imports and draw(st.booleans()) else None
    return make_policy(imports, invocations, root=root)


@given(policies_())
def test_merge_identity(a):
    merged = merge(a, Policy.empty())
    assert merged.allowed_imports == a.allowed_imports
    assert merged.allowed_invocations == a.allowed_invocations
    assert merged.root_class == a.root_class


@given(policies_(), policies_())
def test_merge_is_commutative_and_monotone(a, b):
    ab, ba = merge(a, b), merge(b, a)
    assert ab.allowed_imports == ba.allowed_imports
    assert ab.allowed_invocations == ba.allowed_invocations
    assert ab.root_class == ba.root_class
    assert a.allowed_imports <= ab.allowed_imports
    assert b.allowed_invocations <= ab.allowed_invocations


@given(policies_(), policies_())
def test_merge_result_is_always_valid(a, b):
    merged = merge(a, b)
    assert merged.allowed_invocations <= merged.allowed_imports
    if merged.root_class is not None:
        assert merged.root_class in merged.allowed_imports


def test_file_round_trip_is_byte_identical(tmp_path):
    policy = make_policy(["m.A", "m.f", "n.B"], ["m.f"], root="m.A")
    path = tmp_path / "p.json"
    write_policy(policy, path)
    first = path.read_bytes()
    loaded = read_policy(path)
    assert loaded.allowed_imports == policy.allowed_imports
    assert loaded.allowed_invocations == policy.allowed_invocations
    assert loaded.root_class == policy.root_class
    write_policy(loaded, path)
    assert path.read_bytes() == first


def test_document_is_canonical_json_with_sorted_names():
    policy = make_policy(["z.Z", "a.A"], [], library="lib")
    doc = json.loads(dumps_policy(policy))
    assert doc["schema"] == "pickleward-policy/1"
    assert doc["allowed_imports"] == ["a.A", "z.Z"]


def test_malformed_documents_are_rejected():
    good = json.loads(dumps_policy(make_policy(["m.A"], [], root="m.A")))
    for mutate in (
        lambda d: d.update(schema="wrong/9"),
        lambda d: d.update(allowed_imports="m.A"),
        lambda d: d.update(allowed_invocations=["m.Ghost"]),
        lambda d: d.pop("allowed_imports"),
        lambda d: d.update(allowed_imports=["not a name"]),
    ):
        doc = json.loads(json.dumps(good))
        mutate(doc)
        with pytest.raises(PolicyFileError):
            loads_policy(json.dumps(doc), where="test")
    with pytest.raises(PolicyFileError):
        loads_policy("{not json", where="test")


def test_baseline_policy_loads():
    baseline = load_baseline_policy()
    assert baseline.allows_invocation("collections.OrderedDict")
    assert baseline.allows_import("builtins.complex")


def test_class_cache_tiers(tmp_path):
    cache = ClassCache()
    vendored = cache.lookup("collections.OrderedDict")
    assert vendored is not None
    assert vendored.origin == "Vendored"
    builtin = cache.lookup("builtins.range")
    assert builtin is not None
    assert builtin.origin == "Builtin"
    assert cache.lookup("builtins.object") is not None
    assert cache.lookup("nowhere.Missing") is None

    # user-supplied entries shadow vendored ones
    user_dir = tmp_path / "cache"
    user_dir.mkdir()
    custom = make_policy(
        ["collections.OrderedDict", "extra.Helper"],
        ["collections.OrderedDict"],
        root="collections.OrderedDict",
        library="collections",
    )
    write_policy(custom, user_dir / "collections.OrderedDict.json")
    shadowed = ClassCache(user_dir).lookup("collections.OrderedDict")
    assert shadowed.origin == "UserSupplied"
    assert q("extra.Helper") in shadowed.imports


def test_vendored_torch_module_entry():
    entry = ClassCache().lookup("torch.nn.Module")
    assert entry is not None
    assert q("collections.OrderedDict") in entry.imports
