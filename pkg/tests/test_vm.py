"""Execution-engine unit tests: handler semantics, lazy enforcement,
hardening rules, and resource bounds."""

import pickle

import pytest

from pickleward import (
    CallableRef,
    DepthExceeded,
    ForbiddenOpcode,
    InvocationDenied,
    MemoExceeded,
    MemoMiss,
    OpaqueInstance,
    PersistentRef,
    Policy,
    QualifiedName,
    Scalar,
    Seq,
    StackUnderflow,
    Stub,
    StubInvocation,
    StubsPresent,
    TypeViolation,
    VmConfig,
    assert_no_stubs,
    canonical_dump,
    execute,
    parse,
)


def policy_of(imports=(), invocations=()) -> Policy:
    q = QualifiedName.from_text
    invo = frozenset(q(t) for t in invocations)
    return Policy(
        library="test",
        root_class=None,
        allowed_imports=frozenset(q(t) for t in imports) | invo,
        allowed_invocations=invo,
    )


def run(data: bytes, policy: Policy | None = None, **kw):
    return execute(parse(data), VmConfig(policy=policy, **kw))


UNRESTRICTED = None
EMPTY = Policy.empty()


# -- plain data ---------------------------------------------------------------

def test_scalars_round_through():
    out = run(pickle.dumps((1, "two", 3.5, b"4", None, True), protocol=3))
    assert canonical_dump(out.result) == (
        'pickleward-dump v1\n'
        '["tuple",[1,"two",3.5,["bytes","34"],null,true]]\n'
    )


def test_memo_sharing_preserves_identity():
    inner = ["shared"]
    out = run(pickle.dumps([inner, inner], protocol=0), policy=EMPTY)
    first, second = out.result.items
    assert first is second


def test_protocol0_get_put_round_trip():
    data = b"(lp0\nS'x'\np1\nag1\na."
    out = run(data, policy=EMPTY)
    assert [n.value for n in out.result.items] == ["x", "x"]
    assert out.result.items[0] is out.result.items[1]


def test_dup_shares_the_node():
    out = run(b"(]2l.")
    assert len(out.result.items) == 2
    assert out.result.items[0] is out.result.items[1]


def test_dict_updates_overwrite_by_value():
    out = run(pickle.dumps({True: "a"}, protocol=2))
    # a crafted stream writing key 1 after key True must overwrite
    data = b"}I01\nS'a'\nsI1\nS'b'\ns."
    again = run(data)
    assert len(again.result.pairs) == 1
    assert again.result.pairs[0][1].value == "b"
    assert len(out.result.pairs) == 1


def test_multi_program_stream_runs_first_only():
    out = run(b"I1\n.I2\n.")
    assert out.result.value == 1
    assert out.stats.opcode_count == 2


# -- lazy import enforcement --------------------------------------------------

OS_SYSTEM_REF = b"cos\nsystem\n."          # reference, never used
OS_SYSTEM_CALL = b"cos\nsystem\n(S'id'\ntR."


def test_disallowed_import_becomes_inert_stub():
    out = run(OS_SYSTEM_REF, policy=EMPTY)
    assert isinstance(out.result, Stub)
    assert out.result.name == "os.system"
    assert not out.result.touched
    assert out.trace.imports == [("os.system", 0, "stubbed")]
    assert out.trace.stubs == [("os.system", 0)]


def test_stub_detection_reports_paths():
    out = run(OS_SYSTEM_REF, policy=EMPTY)
    with pytest.raises(StubsPresent) as info:
        assert_no_stubs(out)
    assert info.value.paths == ("$: os.system",)


def test_invoking_a_stub_stops_execution():
    with pytest.raises(StubInvocation) as info:
        run(OS_SYSTEM_CALL, policy=EMPTY)
    assert "os.system" in str(info.value)


def test_allowed_import_without_invocation_cannot_be_called():
    policy = policy_of(imports=["os.system"])
    out = run(OS_SYSTEM_REF, policy=policy)
    assert isinstance(out.result, CallableRef)
    assert out.trace.imports == [("os.system", 0, "allowed")]
    with pytest.raises(InvocationDenied):
        run(OS_SYSTEM_CALL, policy=policy)


def test_allowed_invocation_records_an_instance():
    policy = policy_of(invocations=["os.system"])
    out = run(OS_SYSTEM_CALL, policy=policy)
    node = out.result
    assert isinstance(node, OpaqueInstance)
    assert node.class_name == "os.system"
    assert node.mode == "reduced"
    assert [a.value for a in node.args] == ["id"]
    assert out.trace.invocation_names == {"os.system"}


def test_unrestricted_mode_still_never_calls():
    out = run(OS_SYSTEM_CALL, policy=UNRESTRICTED)
    assert isinstance(out.result, OpaqueInstance)
    assert out.result.class_name == "os.system"


def test_stub_as_mutation_target_stops_execution():
    # APPEND onto a stub
    with pytest.raises(StubInvocation):
        run(b"cos\nsystem\nI1\na.", policy=EMPTY)
    # SETITEM onto a stub
    with pytest.raises(StubInvocation):
        run(b"cos\nsystem\nS'k'\nI1\ns.", policy=EMPTY)
    # BUILD onto a stub
    with pytest.raises(StubInvocation):
        run(b"cos\nsystem\n}b.", policy=EMPTY)


def test_computed_callee_is_refused_when_restricted():
    data = b"cos\nsystem\n)R)R."
    with pytest.raises(InvocationDenied) as info:
        run(data, policy=policy_of(invocations=["os.system"]))
    assert "computed" in str(info.value)
    out = run(data, policy=UNRESTRICTED)
    assert out.result.class_name is None
    assert out.result.callee is not None
    assert out.trace.dynamic_invocations


def test_stack_global_requires_string_operands():
    data = b"\x80\x04I1\n\x8c\x06system\x93."
    with pytest.raises(TypeViolation):
        run(data, policy=UNRESTRICTED)


# -- native constructor folding ----------------------------------------------

@pytest.mark.parametrize("protocol", [0, 1, 2, 3])
def test_legacy_set_pickles_fold_under_any_policy(protocol):
    out = run(pickle.dumps({3, 5}, protocol=protocol), policy=EMPTY)
    assert isinstance(out.result, Seq) and out.result.kind == "set"
    assert sorted(n.value for n in out.result.items) == [3, 5]
    assert [outcome for _, _, outcome in out.trace.imports] == ["native"]
    assert_no_stubs(out)  # no stubs: natives bypass the policy


@pytest.mark.parametrize("protocol", [0, 1, 2, 3])
def test_legacy_frozenset_pickles_fold_under_any_policy(protocol):
    out = run(pickle.dumps(frozenset((8, 13)), protocol=protocol),
              policy=EMPTY)
    assert out.result.kind == "frozenset"
    assert sorted(n.value for n in out.result.items) == [8, 13]


def test_python2_module_spelling_folds_too():
    out = run(b"c__builtin__\nset\n((lI7\natR.", policy=EMPTY)
    assert out.result.kind == "set"
    assert [n.value for n in out.result.items] == [7]


def test_newobj_on_native_constructor_folds():
    out = run(b"\x80\x02cbuiltins\nset\n)\x81.", policy=EMPTY)
    assert out.result.kind == "set" and out.result.items == []
    assert out.trace.allocation_names == {"builtins.set"}


def test_native_fold_deduplicates_by_value():
    out = run(b"cbuiltins\nset\n((lI1\naI01\natR.", policy=EMPTY)
    assert len(out.result.items) == 1  # True == 1


def test_native_fold_rejects_non_sequence_argument():
    with pytest.raises(TypeViolation):
        run(b"cbuiltins\nset\n(I1\ntR.", policy=EMPTY)
    with pytest.raises(TypeViolation):
        run(b"cbuiltins\nset\n(I1\nI2\ntR.", policy=EMPTY)


# -- hardening rules ----------------------------------------------------------

@pytest.mark.parametrize("data, mnemonic", [
    (b"(S'id'\nios\nsystem\n.", "INST"),
    (b"(ios\nsystem\no.", "INST"),
    (b"\x80\x02\x82\x01.", "EXT1"),
])
def test_forbidden_opcodes_raise_in_both_modes(data, mnemonic):
    for policy in (UNRESTRICTED, EMPTY, policy_of(invocations=["os.system"])):
        with pytest.raises(ForbiddenOpcode) as info:
            run(data, policy=policy)
        assert info.value.mnemonic == mnemonic


def test_persistent_ids_are_plain_data():
    out = run(b"Pweights/w0\n.", policy=EMPTY)
    assert isinstance(out.result, PersistentRef)
    assert out.result.pid.value == "weights/w0"
    out = run(b"S'weights/w1'\nQ.", policy=EMPTY)
    assert out.result.pid.value == "weights/w1"
    assert_no_stubs(out)


# -- BUILD semantics ----------------------------------------------------------

def test_build_replaces_instance_state():
    policy = policy_of(invocations=["m.make"])
    data = b"cm\nmake\n)R}S'a'\nI1\nsb}S'b'\nI2\nsb."
    out = run(data, policy=policy)
    state = out.result.state
    assert [k.value for k, _ in state.pairs] == ["b"]


def test_build_on_callable_ref_applies_attributes():
    policy = policy_of(imports=["torch.Tensor"])
    data = b"ctorch\nTensor\n}S'requires_grad'\nI00\nsb."
    out = run(data, policy=policy)
    assert isinstance(out.result, CallableRef)
    key, value = out.result.attrs.pairs[0]
    assert key.value == "requires_grad" and value.value is False
    assert out.result.tainted == []


def test_build_blocks_callable_renames():
    policy = policy_of(imports=["torch.Tensor"])
    data = (b"ctorch\nTensor\n}(S'__name__'\nS'system'\n"
            b"S'__module__'\nS'os'\nS'k'\nI5\nub.")
    out = run(data, policy=policy)
    ref = out.result
    assert sorted(ref.tainted) == ["__module__", "__name__"]
    assert [(k.value, v.value) for k, v in ref.attrs.pairs] == [("k", 5)]
    assert {(name, key) for name, key, _ in out.trace.tainted} == {
        ("torch.Tensor", "__name__"), ("torch.Tensor", "__module__")}
    dump = canonical_dump(ref)
    assert '["__module__", "__name__"]' in dump


def test_build_accepts_dict_and_slots_pair():
    policy = policy_of(imports=["torch.Tensor"])
    data = b"ctorch\nTensor\n(}S'a'\nI1\ns}S'b'\nI2\nstb."
    out = run(data, policy=policy)
    keys = [k.value for k, _ in out.result.attrs.pairs]
    assert keys == ["a", "b"]


def test_build_rejects_non_dict_state_on_callable():
    with pytest.raises(TypeViolation):
        run(b"ctorch\nTensor\nI7\nb.", policy=UNRESTRICTED)


# -- NEWOBJ -------------------------------------------------------------------

def test_newobj_records_allocation():
    policy = policy_of(imports=["m.Cls"])
    out = run(b"\x80\x02cm\nCls\n)\x81.", policy=policy)
    node = out.result
    assert node.mode == "allocated"
    assert node.kwargs is None
    assert out.trace.allocation_names == {"m.Cls"}
    assert out.trace.invocation_names == set()


def test_newobj_ex_canonicalizes_empty_kwargs():
    data = b"\x80\x04\x8c\x01m\x8c\x03Cls\x93)}\x92."
    out = run(data, policy=UNRESTRICTED)
    assert out.result.kwargs is None
    with_kw = b"\x80\x04\x8c\x01m\x8c\x03Cls\x93)}\x8c\x01k\x8c\x01v\x93s\x92."
    # kwargs {k: <m.v ref>}: build the dict before NEWOBJ_EX
    out = run(b"\x80\x04\x8c\x01m\x8c\x03Cls\x93)}\x8c\x01kK\x07s\x92.",
              policy=UNRESTRICTED)
    assert out.result.kwargs is not None
    assert out.result.kwargs.pairs[0][0].value == "k"
    del with_kw


def test_newobj_on_stub_stops_execution():
    with pytest.raises(StubInvocation):
        run(b"\x80\x02cm\nCls\n)\x81.", policy=EMPTY)


# -- resource bounds ----------------------------------------------------------

def test_depth_limit():
    # protocol 2 batches list items on the stack before APPENDS
    deep = pickle.dumps(list(range(100)), protocol=2)
    with pytest.raises(DepthExceeded):
        run(deep, max_depth=10)


def test_memo_limit():
    data = pickle.dumps([[1], [2], [3]], protocol=2)
    with pytest.raises(MemoExceeded):
        run(data, max_memo=2)


def test_memo_miss():
    with pytest.raises(MemoMiss):
        run(b"g5\n.")


def test_stack_underflow():
    with pytest.raises(StackUnderflow):
        run(b".")
    with pytest.raises(StackUnderflow):
        run(b"a.")


def test_mark_protects_lower_stack():
    # APPEND may not pop across the open mark to reach the 1 below it
    with pytest.raises(StackUnderflow):
        run(b"I1\n(a.")


def test_unsupported_protocol_byte():
    with pytest.raises(TypeViolation):
        run(b"\x80\x63N.")


# -- traces -------------------------------------------------------------------

def test_trace_offsets_point_at_opcodes():
    out = run(OS_SYSTEM_CALL, policy=UNRESTRICTED)
    (name, import_offset, outcome), = out.trace.imports
    assert (name, outcome) == ("os.system", "allowed")
    assert import_offset == 0
    (callee, invoke_offset), = out.trace.invocations
    assert callee == "os.system"
    assert OS_SYSTEM_CALL[invoke_offset:invoke_offset + 1] == b"R"


def test_wall_time_and_opcode_count_populate():
    out = run(pickle.dumps({"a": 1}, protocol=4))
    assert out.stats.opcode_count == len(parse(
        pickle.dumps({"a": 1}, protocol=4)).opcodes)
    assert out.stats.wall_time >= 0.0
