"""Canonical dump format and stub listing tests."""

import pytest

from pickleward import (
    CallableRef,
    Map,
    OpaqueInstance,
    PersistentRef,
    Scalar,
    Seq,
    Stub,
    UnhashableKey,
    canonical_dump,
    list_stubs,
)
from pickleward.graph import node_key

HEADER = "pickleward-dump v1\n"


def s_int(v):
    return Scalar("int", v)


def s_str(v):
    return Scalar("string", v)


def body(root) -> str:
    text = canonical_dump(root)
    assert text.startswith(HEADER)
    assert text.endswith("\n")
    return text[len(HEADER):-1]


def test_scalar_lexemes():
    assert body(Scalar("none", None)) == "null"
    assert body(Scalar("bool", True)) == "true"
    assert body(Scalar("bool", False)) == "false"
    assert body(s_int(-17)) == "-17"
    assert body(Scalar("float", 2.5)) == "2.5"
    assert body(Scalar("float", float("inf"))) == "inf"
    assert body(s_str("café")) == '"caf\\u00e9"'
    assert body(Scalar("bytes", b"\x00\xff")) == '["bytes","00ff"]'
    assert body(Scalar("bytes", bytearray(b"ab"))) == '["bytes","6162"]'


def test_container_goldens():
    assert body(Seq("tuple", [s_int(1), s_str("a")])) == '["tuple",[1,"a"]]'
    assert body(Seq("list", [])) == '["list",[]]'
    assert (body(Map(pairs=[(s_str("k"), s_int(1))]))
            == '["dict",[["k",1]]]')


def test_set_elements_are_ordered_by_rendered_text():
    sets = Seq("set", [s_int(8), s_int(13)])
    assert body(sets) == '["set",[13,8]]'  # "13" < "8" textually
    fs = Seq("frozenset", [s_int(5), s_int(3), s_int(2)])
    assert body(fs) == '["frozenset",[2,3,5]]'


def test_global_and_stub_forms():
    assert body(CallableRef("os.system", 0)) \
        == '["global","os.system"]'
    ref = CallableRef("m.f", 0, tainted=["__name__"])
    assert body(ref) == '["global","m.f",null,["__name__"]]'
    assert body(Stub("m.Cls", 4)) == '["stub","m.Cls"]'
    assert body(PersistentRef(s_str("w/0"))) \
        == '["persid","w/0"]'


def test_object_and_invoke_forms():
    inst = OpaqueInstance("m.Cls", "allocated", [], 0)
    assert body(inst) == '["object","m.Cls","allocated",[],null,null,null,null,null]'
    inst2 = OpaqueInstance(
        "m.make", "reduced", [s_int(3)], 0,
        state=Map(pairs=[(s_str("x"), s_int(1))]))
    assert (body(inst2) ==
            '["object","m.make","reduced",[3],null,["dict",[["x",1]]],'
            'null,null,null]')
    callee = OpaqueInstance("m.get", "reduced", [], 0)
    dyn = OpaqueInstance(None, "reduced", [s_int(1)], 0,
                         callee=callee)
    assert (body(dyn) ==
            '["invoke",["object","m.get","reduced",[],null,null,null,null,'
            'null],[1],null,null,null,null,null]')


def test_shared_nodes_are_labeled_once():
    shared = Seq("list", [s_int(1)])
    root = Seq("list", [shared, shared])
    assert body(root) == '["list",[["&",0,["list",[1]]],["*",0]]]'


def test_shared_strings_are_labeled_but_numbers_never():
    name = s_str("weights")
    root = Seq("list", [name, name])
    assert body(root) == '["list",[["&",0,"weights"],["*",0]]]'
    num = s_int(7)
    root2 = Seq("list", [num, num])
    assert body(root2) == '["list",[7,7]]'


def test_empty_tuple_is_never_labeled():
    empty = Seq("tuple", [])
    root = Seq("list", [empty, empty])
    assert body(root) == '["list",[["tuple",[]],["tuple",[]]]]'


def test_cycle_renders_with_back_reference():
    lst = Seq("list", [s_str("seed")])
    lst.items.append(lst)
    assert body(lst) == '["&",0,["list",["seed",["*",0]]]]'


def test_dump_is_deterministic():
    inner = Map(pairs=[(s_str("k"), Seq("set", [s_int(1), s_int(10)]))])
    root = Seq("list", [inner, inner, Seq("tuple", [inner])])
    assert canonical_dump(root) == canonical_dump(root)


def test_map_overwrite_follows_python_key_equality():
    m = Map()
    m.set(s_int(1), s_str("first"))
    m.set(Scalar("bool", True), s_str("second"))  # True == 1 in dict keys
    assert body(m) == '["dict",[[1,"second"]]]'


def test_unhashable_map_key_raises():
    m = Map()
    with pytest.raises(UnhashableKey):
        m.set(Seq("list", []), s_int(1), offset=9)


def test_node_key_structural_for_tuples():
    a = Seq("tuple", [s_int(1), s_str("x")])
    b = Seq("tuple", [s_int(1), s_str("x")])
    assert node_key(a) == node_key(b)
    inst = OpaqueInstance("m.C", "allocated", [], 0)
    assert node_key(inst) != node_key(
        OpaqueInstance("m.C", "allocated", [], 0))


def test_list_stubs_paths():
    stub = Stub("flairlike.optim.SGDLike", 10)
    state = Map(pairs=[(s_str("optimizer"), stub)])
    inst = OpaqueInstance("flairlike.Tagger", "allocated", [], 0,
                          state=state)
    assert list_stubs(inst) == [(".state['optimizer']",
                                 "flairlike.optim.SGDLike")]
    top = Stub("m.f", 0)
    assert list_stubs(top) == [("", "m.f")]
    seq = Seq("list", [Stub("a.b", 1), Stub("a.b", 2)])
    assert list_stubs(seq) == [("[0]", "a.b"), ("[1]", "a.b")]


def test_list_stubs_reports_shared_stub_once():
    stub = Stub("x.y", 3)
    root = Seq("list", [stub, stub])
    assert list_stubs(root) == [("[0]", "x.y")]
