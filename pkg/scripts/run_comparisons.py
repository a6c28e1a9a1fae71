#!/usr/bin/env python3
"""Corpus-wide comparison of the scanner and the restricted loader.

For every fixture in the corpus manifest this prints the scan verdict,
the restricted-load outcome under the fixture's designated policy, and
whether both match the manifest's expectations. The summary line at the
bottom reports each tool's miss rate on the hostile fixtures.

Usage:
    python3 scripts/run_comparisons.py [--corpus DIR]
"""

import argparse
import json
import sys
from pathlib import Path

from pickleward import (
    ClassCache,
    Policy,
    SecurityViolation,
    VmConfig,
    execute,
    generate,
    index_library,
    list_stubs,
    load_baseline_policy,
    load_default_denylist,
    parse,
    read_pickle_bytes,
    scan,
)

REPO_ROOT = Path(__file__).resolve().parent.parent


def build_policies(manifest: dict, corpus: Path) -> dict[str, Policy]:
    policies = {"empty": Policy.empty(), "baseline": load_baseline_policy()}
    cache = ClassCache()
    for lib, info in manifest["libraries"].items():
        index = index_library(corpus / info["path"])
        policies[lib] = generate(index, info["root"], cache=cache)
    return policies


def load_outcome(data: bytes, policy: Policy) -> str:
    try:
        outcome = execute(parse(data), VmConfig.restricted_mode(policy))
    except SecurityViolation as exc:
        return f"security-error ({type(exc).__name__})"
    stubs = list_stubs(outcome.result)
    return f"stubs ({len(stubs)})" if stubs else "clean"


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--corpus", type=Path,
                        default=REPO_ROOT / "corpus")
    args = parser.parse_args(argv)

    manifest = json.loads((args.corpus / "manifest.json").read_text())
    policies = build_policies(manifest, args.corpus)
    denylist = load_default_denylist()

    header = (f"{'fixture':<20} {'category':<10} {'scan':<8} "
              f"{'load under policy':<28} match")
    print(header)
    print("-" * len(header))

    failures = 0
    hostile_total = scanner_missed = loader_missed = 0
    for entry in manifest["fixtures"]:
        data = read_pickle_bytes(args.corpus / entry["path"])
        verdict = scan(parse(data), denylist)
        outcome = load_outcome(data, policies[entry["policy"]])
        expected_load = entry["expected_load"]
        ok = (verdict.label == entry["expected_scan"]
              and outcome.split(" ")[0] == expected_load)
        failures += 0 if ok else 1
        if entry["category"] in ("malicious", "bypass", "failing"):
            hostile_total += 1
            scanner_missed += 0 if verdict.flagged else 1
            loader_missed += 0 if outcome.startswith("security-error") else 1
        mark = "ok" if ok else "MISMATCH"
        print(f"{entry['name']:<20} {entry['category']:<10} "
              f"{verdict.label:<8} {outcome:<28} {mark}")

    print("-" * len(header))
    print(f"hostile fixtures: {hostile_total}; "
          f"scanner missed {scanner_missed} "
          f"({scanner_missed / hostile_total:.0%}); "
          f"restricted loader missed {loader_missed} "
          f"({loader_missed / hostile_total:.0%})")
    if failures:
        print(f"{failures} fixture(s) diverged from the manifest",
              file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
