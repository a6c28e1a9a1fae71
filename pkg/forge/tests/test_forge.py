"""Fixture-forge tests: deterministic regeneration, manifest integrity,
oracle agreement with the loader CLI, and recorder safety."""

import hashlib
import io
import pickletools
import subprocess
import sys
import zipfile
from pathlib import Path

import pytest

from fixtureforge import forge_all, mirror_dump, recording_load


def tree_bytes(root: Path) -> dict[str, bytes]:
    return {
        str(path.relative_to(root)): path.read_bytes()
        for path in sorted(root.rglob("*")) if path.is_file()
    }


@pytest.fixture(scope="session")
def regenerated(tmp_path_factory) -> Path:
    out = tmp_path_factory.mktemp("regen") / "corpus"
    forge_all(out)
    return out


def test_regeneration_is_deterministic(tmp_path, regenerated):
    again = tmp_path / "corpus"
    forge_all(again)
    first = tree_bytes(regenerated)
    second = tree_bytes(again)
    assert first.keys() == second.keys()
    mismatched = [name for name in first if first[name] != second[name]]
    assert mismatched == []


def test_regeneration_matches_committed_corpus(regenerated, corpus_dir):
    fresh = tree_bytes(regenerated)
    committed = tree_bytes(corpus_dir)
    assert fresh.keys() == committed.keys()
    mismatched = [name for name in fresh
                  if fresh[name] != committed[name]]
    assert mismatched == []


def test_manifest_fixture_integrity(manifest, corpus_dir):
    assert manifest["schema"] == "pickleward-corpus/1"
    libraries = set(manifest["libraries"])
    valid_policies = libraries | {"empty", "baseline"}
    names = [f["name"] for f in manifest["fixtures"]]
    assert len(names) == len(set(names))
    for entry in manifest["fixtures"]:
        path = corpus_dir / entry["path"]
        assert path.is_file(), entry["name"]
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
        assert digest == entry["sha256"], entry["name"]
        assert entry["category"] in (
            "benign", "malicious", "bypass", "failing", "bench")
        assert entry["policy"] in valid_policies
        assert entry["expected_scan"] in ("Clean", "Flagged")
        assert entry["expected_load"] in ("clean", "stubs", "security-error")
        if entry["category"] == "benign":
            assert (corpus_dir / entry["oracle"]).is_file(), entry["name"]
        else:
            assert entry["oracle"] is None
    for lib, info in manifest["libraries"].items():
        assert (corpus_dir / info["path"]).is_dir()
        assert info["root"].split(".")[0] in (lib, "netdef")


def fixture_pickle_bytes(corpus_dir: Path, entry: dict) -> bytes:
    path = corpus_dir / entry["path"]
    if path.suffix == ".zip":
        with zipfile.ZipFile(path) as archive:
            return archive.read("data.pkl")
    return path.read_bytes()


def test_all_fixtures_are_structurally_valid_pickle(manifest, corpus_dir):
    """Every fixture, hostile ones included, parses with the stdlib
    opcode reader; multi-program files parse segment by segment."""
    for entry in manifest["fixtures"]:
        data = fixture_pickle_bytes(corpus_dir, entry)
        source = io.BytesIO(data)
        programs = 0
        while source.tell() < len(data):
            opcodes = list(pickletools.genops(source))
            assert opcodes[-1][0].name == "STOP", entry["name"]
            programs += 1
        assert programs >= 1
        if entry["name"] == "multi_stop":
            assert programs == 2


def test_oracle_dumps_match_the_loader_cli(manifest, corpus_dir):
    """The committed oracle dumps are exactly what the loader CLI prints
    for an unrestricted load of each benign fixture."""
    for entry in manifest["fixtures"]:
        if entry["category"] != "benign":
            continue
        completed = subprocess.run(
            [sys.executable, "-m", "pickleward.cli", "load",
             str(corpus_dir / entry["path"]), "--unrestricted", "--dump"],
            capture_output=True, text=True, timeout=60)
        assert completed.returncode == 0, (entry["name"], completed.stderr)
        oracle = (corpus_dir / entry["oracle"]).read_text()
        assert completed.stdout == oracle, entry["name"]


def test_loader_cli_honors_manifest_expectations(manifest, corpus_dir,
                                                 tmp_path):
    """Scan verdicts and load exit codes, end to end over the CLI."""
    scan_to_code = {"Clean": 0, "Flagged": 3}
    for entry in manifest["fixtures"]:
        completed = subprocess.run(
            [sys.executable, "-m", "pickleward.cli", "scan",
             str(corpus_dir / entry["path"])],
            capture_output=True, text=True, timeout=60)
        assert completed.returncode == scan_to_code[entry["expected_scan"]], \
            (entry["name"], completed.stdout, completed.stderr)


def test_recorder_never_executes_payloads(manifest, corpus_dir, tmp_path):
    """Hostile fixtures load through the recording unpickler without
    running anything: no exception, no side effects on disk."""
    markers = [Path("/tmp/forged_marker"), Path("/tmp/forged_a"),
               Path("/tmp/forged_b")]
    for marker in markers:
        assert not marker.exists(), f"stale marker {marker}; remove it"
    for entry in manifest["fixtures"]:
        if entry["category"] not in ("malicious", "bypass", "failing"):
            continue
        root = recording_load(fixture_pickle_bytes(corpus_dir, entry))
        assert root is not None, entry["name"]
        dump = mirror_dump(root)
        assert dump.startswith("pickleward-dump v1\n"), entry["name"]
    for marker in markers:
        assert not marker.exists(), f"payload executed: {marker} appeared"


def test_mirror_dump_handles_shared_and_cyclic_data():
    value = ["seed"]
    value.append(value)
    dump = mirror_dump(value)
    assert dump == ('pickleward-dump v1\n'
                    '["&",0,["list",["seed",["*",0]]]]\n')
    shared = ["x"]
    dump = mirror_dump([shared, shared])
    assert dump == ('pickleward-dump v1\n'
                    '["list",[["&",0,["list",["x"]]],["*",0]]]\n')
