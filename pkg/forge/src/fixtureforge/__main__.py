"""Command line entry: ``python -m fixtureforge <output-dir>``."""

import argparse
from pathlib import Path

from .forge import forge_all


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="fixtureforge",
        description="regenerate the pickle fixture corpus")
    parser.add_argument("output", type=Path, help="corpus directory to write")
    args = parser.parse_args(argv)
    manifest = forge_all(args.output)
    print(f"wrote {len(manifest['fixtures'])} fixtures to {args.output}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
