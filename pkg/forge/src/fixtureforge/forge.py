"""Builds the fixture corpus: library sources, pickles, oracles, manifest.

Every artifact is deterministic: pickles come from fixed object builders or
hand-assembled byte programs, archives use pinned timestamps and no
compression, the bench payload uses a seeded generator, and oracle dumps are
produced by the recording unpickler plus the mirror dumper.  Running the
forge twice into two directories yields byte-identical trees.
"""

from __future__ import annotations

import hashlib
import importlib
import io
import json
import pickle
import random
import sys
import zipfile
from pathlib import Path

from . import libs, payloads
from .dumpmirror import mirror_dump
from .recorder import recording_load

_FIXED_DATE = (2020, 1, 1, 0, 0, 0)


def write_libraries(libs_dir: Path) -> None:
    for tree in libs.LIBRARIES.values():
        for relpath, source in tree.items():
            target = libs_dir / relpath
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_text(source, encoding="utf-8")


def import_fixture_libs(libs_dir: Path):
    """Import the packaged fixture libraries from a written tree."""
    # Keep bytecode caches out of the corpus; .pyc files embed mtimes.
    sys.dont_write_bytecode = True
    root = str(libs_dir)
    if root not in sys.path:
        sys.path.insert(0, root)
    mods = {}
    for name in ("toylib", "flairlike", "flairlike.trainer",
                 "subclazoo", "orderedlib", "driftlib"):
        mods[name] = importlib.import_module(name)
    return mods


class _WeightRef:
    """Marker resolved to a persistent id by the container pickler."""

    def __init__(self, key: str):
        self.key = key


class _ContainerPickler(pickle.Pickler):
    def persistent_id(self, obj):
        if isinstance(obj, _WeightRef):
            return f"weights/{obj.key}"
        return None


def _container_pickle(obj, protocol: int) -> bytes:
    buf = io.BytesIO()
    _ContainerPickler(buf, protocol).dump(obj)
    return buf.getvalue()


def _build_toy_model(toylib):
    model = toylib.Model("demo")
    model.add_layer(toylib.Dense(16))
    model.add_layer(toylib.Dense(4, "softmax"))
    model.weights["dense_0"] = toylib.Tensor("weights/dense_0.bin", (16, 8))
    model.weights["dense_1"] = toylib.Tensor("weights/dense_1.bin", (8, 4))
    return model


def _build_bench_payload(toylib) -> bytes:
    rng = random.Random(1337)
    model = toylib.Model("bench")
    for i in range(64):
        model.add_layer(toylib.Dense(i + 1, f"act_{i:02d}"))
    for i in range(200):
        model.weights[f"w{i:03d}"] = toylib.Tensor(
            f"weights/w{i:03d}.bin", (64, 64))
    payload = {
        "model": model,
        "blobs": {f"blob_{i:02d}": rng.randbytes(200_000) for i in range(40)},
        "samples": list(range(50_000)),
        "notes": [f"note_{i:04d}" for i in range(5_000)],
    }
    return pickle.dumps(payload, 4)


def _benign_fixtures(mods) -> dict[str, tuple[bytes, int, str, str]]:
    """name -> (bytes, protocol, policy key, description)."""
    toylib = mods["toylib"]
    flairlike = mods["flairlike"]
    subclazoo = mods["subclazoo"]
    orderedlib = mods["orderedlib"]

    out: dict[str, tuple[bytes, int, str, str]] = {}

    model = _build_toy_model(toylib)
    out["toy_model"] = (
        pickle.dumps(model, 2), 2, "toylib",
        "model with layers and reduce-built tensors")

    tensor = toylib.Tensor("weights/solo.bin", (3, 3))
    out["toy_tensor"] = (
        pickle.dumps(tensor, 0), 0, "toylib",
        "single tensor rebuilt through a module-level function")

    tagger = flairlike.Tagger("ner-demo", 128)
    tagger.tag_map.update({"PER": 1, "LOC": 2})
    mods["flairlike.trainer"].prepare(tagger)
    out["flair_tagger"] = (
        pickle.dumps(tagger, 4), 4, "flairlike",
        "tagger whose optimizer class is attached outside __init__")

    out["zoo_classifier"] = (
        pickle.dumps(subclazoo.ZooClassifier("zc"), 2), 2, "subclazoo",
        "classifier with a diamond-inheritance head")
    out["zoo_regressor"] = (
        pickle.dumps(subclazoo.ZooRegressor("zr"), 4), 4, "subclazoo",
        "regressor carrying native set and frozenset fields")

    config = orderedlib.Config("paths-config")
    config.entries["alpha"] = "one"
    config.entries["beta"] = "two"
    out["ordered_config"] = (
        pickle.dumps(config, 4), 4, "orderedlib",
        "config whose entries field is a collections.OrderedDict")

    from collections import OrderedDict

    state = OrderedDict()
    state["layer0.weight"] = [0.125, -0.5, 0.75]
    state["layer0.bias"] = [0.0625]
    state["layer1.weight"] = [1.5, 2.25]
    out["weights_only_state"] = (
        pickle.dumps(state, 2), 2, "baseline",
        "weights-only state mapping loadable under the baseline policy")

    lst: list = ["seed"]
    lst.append(lst)
    out["cyclic_list"] = (
        pickle.dumps(lst, 0), 0, "empty",
        "self-referential list exercising memo cycles")

    out["binary_payload"] = (
        payloads.binary_payload(), 5, "empty",
        "hand-assembled protocol 5 stream with bytearray and long text")

    legacy = {"small": {2, 3, 5}, "frozen": frozenset((8, 13))}
    out["legacy_sets"] = (
        pickle.dumps(legacy, 2), 2, "empty",
        "protocol 2 sets spelled as constructor calls")

    return out


def _container_fixture(mods) -> tuple[bytes, list[tuple[str, bytes]]]:
    """Member pickle plus full zip member list for the container fixture."""
    toylib = mods["toylib"]
    model = toylib.Model("ctr")
    model.add_layer(toylib.Dense(8))
    obj = {
        "model": model,
        "extra": {"w0": _WeightRef("w0"), "w1": _WeightRef("w1")},
    }
    member = _container_pickle(obj, 4)
    blobs = [
        ("weights/w0.bin", bytes(range(32))),
        ("weights/w1.bin", bytes(reversed(range(32)))),
    ]
    return member, [("data.pkl", member)] + blobs


def _failing_fixtures(mods) -> dict[str, tuple[bytes, int, str, str]]:
    driftlib = mods["driftlib"]
    pipeline = driftlib.Pipeline("prod")
    pipeline.steps.append(driftlib.Step("scale", 2.0))
    pipeline.steps.append(driftlib.LegacyHead(0.25))
    return {
        "drift_legacy": (
            pickle.dumps(pipeline, 2), 2, "driftlib",
            "pipeline holding a class the current sources never reference"),
        "ns_mismatch": (
            payloads.ns_mismatch(), 2, "nsmix",
            "checkpoint naming modules under a package prefix the sources lack"),
    }


def _write_zip(path: Path, members: list[tuple[str, bytes]]) -> None:
    with zipfile.ZipFile(path, "w") as zf:
        for name, data in members:
            info = zipfile.ZipInfo(name, date_time=_FIXED_DATE)
            info.compress_type = zipfile.ZIP_STORED
            zf.writestr(info, data)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _entry(name, category, path, protocol, policy, scan, load, *,
           stub_count=None, oracle=None, description=""):
    return {
        "name": name,
        "category": category,
        "path": path,
        "protocol": protocol,
        "policy": policy,
        "expected_scan": scan,
        "expected_load": load,
        "stub_count": stub_count,
        "oracle": oracle,
        "description": description,
        "sha256": None,  # filled in after the file is written
    }


_MALICIOUS_INFO = {
    "os_system": (0, "shell command through os.system"),
    "eval_stack_global": (4, "eval located via STACK_GLOBAL"),
    "subprocess_spawn": (2, "subprocess.Popen invocation"),
    "getattr_chain": (4, "attribute-walk to os.system via getattr"),
    "inst_legacy": (0, "protocol 0 INST instantiation of os.system"),
}

_BYPASS_INFO = {
    "pathlib_write": (4, "empty", "file constructor absent from denylists"),
    "dotted_smuggle": (2, "toylib", "dotted attribute smuggled past name scanners"),
    "multi_stop": (0, "empty", "second program hidden after the first STOP"),
}


def forge_all(corpus_dir: Path) -> dict:
    """Write the complete corpus under ``corpus_dir``; returns the manifest."""
    corpus_dir = Path(corpus_dir)
    for sub in ("libs", "benign", "malicious", "bypass",
                "failing", "bench", "oracles"):
        (corpus_dir / sub).mkdir(parents=True, exist_ok=True)

    write_libraries(corpus_dir / "libs")
    mods = import_fixture_libs(corpus_dir / "libs")

    entries: list[dict] = []

    def emit(entry: dict, data: bytes, oracle_source: bytes | None) -> None:
        target = corpus_dir / entry["path"]
        target.write_bytes(data)
        entry["sha256"] = _sha256(target)
        if oracle_source is not None:
            dump = mirror_dump(recording_load(oracle_source))
            oracle_path = f"oracles/{entry['name']}.dump.txt"
            (corpus_dir / oracle_path).write_text(dump, encoding="utf-8")
            entry["oracle"] = oracle_path
        entries.append(entry)

    for name, (data, proto, policy, desc) in _benign_fixtures(mods).items():
        load = "stubs" if name == "flair_tagger" else "clean"
        stub_count = 1 if name == "flair_tagger" else None
        emit(_entry(name, "benign", f"benign/{name}.pkl", proto, policy,
                    "Clean", load, stub_count=stub_count, description=desc),
             data, data)

    member, zip_members = _container_fixture(mods)
    zip_path = corpus_dir / "benign/toy_container.zip"
    _write_zip(zip_path, zip_members)
    container = _entry(
        "toy_container", "benign", "benign/toy_container.zip", 4, "toylib",
        "Clean", "clean",
        description="zip archive whose data.pkl references sibling weights")
    container["sha256"] = _sha256(zip_path)
    dump = mirror_dump(recording_load(member))
    (corpus_dir / "oracles/toy_container.dump.txt").write_text(
        dump, encoding="utf-8")
    container["oracle"] = "oracles/toy_container.dump.txt"
    entries.append(container)

    for name, builder in payloads.MALICIOUS.items():
        proto, desc = _MALICIOUS_INFO[name]
        emit(_entry(name, "malicious", f"malicious/{name}.pkl", proto,
                    "empty", "Flagged", "security-error", description=desc),
             builder(), None)

    for name, builder in payloads.BYPASS.items():
        proto, policy, desc = _BYPASS_INFO[name]
        emit(_entry(name, "bypass", f"bypass/{name}.pkl", proto, policy,
                    "Clean", "security-error", description=desc),
             builder(), None)

    for name, (data, proto, policy, desc) in _failing_fixtures(mods).items():
        emit(_entry(name, "failing", f"failing/{name}.pkl", proto, policy,
                    "Clean", "security-error", description=desc),
             data, None)

    emit(_entry("bench_model", "bench", "bench/bench_model.pkl", 4, "toylib",
                "Clean", "clean",
                description="large seeded model payload for timing runs"),
         _build_bench_payload(mods["toylib"]), None)

    manifest = {
        "schema": "pickleward-corpus/1",
        "libraries": {
            name: {"path": f"libs/{name}", "root": libs.ROOTS[name]}
            for name in sorted(libs.LIBRARIES)
        },
        "fixtures": entries,
    }
    (corpus_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return manifest
