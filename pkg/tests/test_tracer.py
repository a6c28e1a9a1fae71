"""Static tracer and denylist scanner tests."""

import pickle

import pytest

from pickleward import (
    Denylist,
    PolicyFileError,
    QualifiedName,
    load_default_denylist,
    parse,
    scan,
    trace,
)
from pickleward.tracing import report_json, report_text


def q(text: str) -> QualifiedName:
    return QualifiedName.from_text(text)


def texts(names) -> set[str]:
    return {n.text for n in names}


def test_fixture_imports_are_exact(manifest, fixture_bytes):
    entry = next(f for f in manifest["fixtures"]
                 if f["name"] == "toy_tensor")
    report = trace(parse(fixture_bytes(entry)))
    assert texts(report.imports) == {
        "toylib.read_weights_to_tensor", "toylib.Tensor"}
    assert texts(report.invocations) == {"toylib.read_weights_to_tensor"}
    assert report.allocations == frozenset()
    assert not report.has_dynamic_markers
    assert not report.has_trailing_programs


def test_global_and_stack_global_produce_the_same_name():
    p0 = trace(parse(b"cos\nsystem\n."))
    p4 = trace(parse(b"\x8c\x02os\x8c\x06system\x93."))
    assert texts(p0.imports) == texts(p4.imports) == {"os.system"}


def test_reduce_classifies_invocation():
    report = trace(parse(b"cos\nsystem\n(S'id'\ntR."))
    assert texts(report.invocations) == {"os.system"}


def test_newobj_classifies_allocation_not_invocation():
    report = trace(parse(b"\x80\x02cm\nCls\n)\x81."))
    assert texts(report.allocations) == {"m.Cls"}
    assert report.invocations == frozenset()


def test_computed_callee_is_a_dynamic_marker():
    # getattr-style chain: the final callee is a REDUCE result
    report = trace(parse(b"cos\nsystem\n)R)R."))
    assert texts(report.invocations) == {"os.system"}
    assert len(report.dynamic_invocations) == 1


def test_computed_stack_global_is_a_dynamic_marker():
    # module name assembled at runtime: operands are not both strings
    data = b"\x80\x04]\x8c\x06system\x93."
    report = trace(parse(data))
    assert report.imports == frozenset()
    assert len(report.dynamic_imports) == 1


def test_unnameable_import_degrades_to_marker():
    # a GLOBAL whose module contains a space cannot be a Python name
    report = trace(parse(b"cmy mod\nattr\n(tR."))
    assert report.imports == frozenset()
    assert report.dynamic_imports == (0,)
    assert report.dynamic_invocations == (15,)


def test_memoized_global_flows_through_get():
    data = b"cos\nsystem\np0\n0g0\n(tR."
    report = trace(parse(data))
    assert texts(report.invocations) == {"os.system"}
    assert not report.has_dynamic_markers


def test_trailing_programs_are_traced_and_reported():
    data = b"I1\n.cos\nsystem\n(S'id'\ntR."
    report = trace(parse(data))
    assert report.has_trailing_programs
    assert texts(report.invocations) == {"os.system"}


def test_malformed_trailing_bytes_are_a_parse_error():
    """The executor only runs the first program, but the tracer reads
    them all: garbage after STOP must fail the analysis, not pass it."""
    from pickleward import ParseError

    stream = parse(b"I1\n.\x00")  # first program parses fine
    with pytest.raises(ParseError):
        trace(stream)


def test_inst_records_invocation_and_forbidden_opcode():
    report = trace(parse(b"(S'id'\nios\nsystem\n."))
    assert texts(report.invocations) == {"os.system"}
    assert [mn for mn, _ in report.forbidden_opcodes] == ["INST"]


def test_obj_records_forbidden_opcode():
    report = trace(parse(b"(cos\nsystem\nS'id'\no."))
    assert [mn for mn, _ in report.forbidden_opcodes] == ["OBJ"]
    assert texts(report.invocations) == {"os.system"}


def test_benign_pickles_trace_with_no_markers():
    data = pickle.dumps({"a": [1, 2], "b": ("x", frozenset((3,)))},
                        protocol=2)
    report = trace(parse(data))
    assert texts(report.imports) <= {"builtins.frozenset",
                                     "__builtin__.frozenset"}
    assert not report.forbidden_opcodes


# -- denylist matching --------------------------------------------------------

def test_exact_matching_does_not_catch_prefixes():
    denylist = Denylist(frozenset({q("os.system")}))
    assert denylist.matches(q("os.system"))
    assert not denylist.matches(q("os.path.join"))
    assert not denylist.matches(q("posix.system"))


def test_module_prefix_matching_catches_submodules():
    denylist = Denylist(frozenset({q("os.system")}),
                        match_mode="module-prefix")
    assert denylist.matches(q("os.system"))
    assert denylist.matches(q("os.execv"))
    assert denylist.matches(q("os.path.join"))
    assert not denylist.matches(q("ossuary.dig"))


def test_scan_flags_imports_and_invocations_only():
    denylist = Denylist(frozenset({q("m.Cls")}))
    # m.Cls only appears as a NEWOBJ allocation target
    verdict = scan(parse(b"\x80\x02cm\nCls\n)\x81."), denylist)
    assert verdict.flagged  # via imports, which always include it
    verdict = scan(parse(b"I1\n."), denylist)
    assert not verdict.flagged
    assert verdict.label == "Clean"


def test_scan_does_not_flag_dynamic_markers():
    denylist = Denylist(frozenset({q("os.system")}))
    data = b"\x80\x04]\x8c\x06system\x93."
    verdict = scan(parse(data), denylist)
    assert not verdict.flagged


def test_default_denylist_flags_the_classics():
    denylist = load_default_denylist()
    for data in (b"cos\nsystem\n(S'id'\ntR.",
                 b"cposix\nsystem\n(S'id'\ntR.",
                 b"c__builtin__\neval\n(S'1'\ntR.",
                 b"csubprocess\nPopen\n(]tR."):
        verdict = scan(parse(data), denylist)
        assert verdict.flagged, data
    # benign data-only pickles never flag
    assert not scan(parse(pickle.dumps([1, 2, 3])),
                    load_default_denylist()).flagged


def test_denylist_rejects_empty_and_unknown_modes():
    with pytest.raises(ValueError):
        Denylist(frozenset())
    with pytest.raises(ValueError):
        Denylist(frozenset({q("os.system")}), match_mode="regex")


def test_denylist_file_errors_are_wrapped(tmp_path):
    bad = tmp_path / "deny.json"
    bad.write_text("{")
    with pytest.raises(PolicyFileError):
        from pickleward import read_denylist
        read_denylist(bad)
    bad.write_text('{"schema": "pickleward-denylist/1", "denied": []}')
    with pytest.raises(PolicyFileError):
        from pickleward import read_denylist
        read_denylist(bad)


# -- reports ------------------------------------------------------------------

def test_report_text_layout():
    report = trace(parse(b"cos\nsystem\n(S'id'\ntR."))
    text = report_text(report)
    assert "imports:\n  os.system" in text
    assert "invocations:\n  os.system" in text
    assert "allocations:\n  (none)" in text
    assert "trailing programs: no" in text


def test_report_json_is_valid_and_sorted():
    import json

    report = trace(parse(b"cb\nB\nca\nA\n0(tR."))
    doc = json.loads(report_json(report))
    assert doc["schema"] == "pickleward-trace/1"
    assert doc["imports"] == ["a.A", "b.B"]
    assert doc["invocations"] == ["b.B"]
    assert doc["has_trailing_programs"] is False
