import json
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from pickleward import (
    ClassCache,
    Policy,
    generate,
    index_library,
    load_baseline_policy,
    read_pickle_bytes,
)

settings.register_profile(
    "corpus",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("corpus")

REPO_ROOT = Path(__file__).resolve().parent.parent
CORPUS_DIR = REPO_ROOT / "corpus"


@pytest.fixture(scope="session")
def corpus_dir() -> Path:
    return CORPUS_DIR


@pytest.fixture(scope="session")
def manifest() -> dict:
    return json.loads((CORPUS_DIR / "manifest.json").read_text())


@pytest.fixture(scope="session")
def indexes(manifest):
    """One source index per corpus library."""
    return {
        lib: index_library(CORPUS_DIR / info["path"])
        for lib, info in manifest["libraries"].items()
    }


@pytest.fixture(scope="session")
def policies(manifest, indexes):
    """Every policy the corpus fixtures are loaded under, by manifest key."""
    out = {"empty": Policy.empty(), "baseline": load_baseline_policy()}
    cache = ClassCache()
    for lib, info in manifest["libraries"].items():
        out[lib] = generate(indexes[lib], info["root"], cache=cache)
    return out


@pytest.fixture(scope="session")
def fixture_bytes():
    """Reader returning the pickle bytes for a manifest fixture entry."""

    def read(entry: dict) -> bytes:
        return read_pickle_bytes(CORPUS_DIR / entry["path"])

    return read
