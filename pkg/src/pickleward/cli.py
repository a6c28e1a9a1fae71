"""Command-line interface.

Exit codes are part of the contract so shells and CI can branch on them:

* 0: success (including a Clean scan verdict)
* 2: usage errors, unreadable input, parse failures, machine errors
* 3: a scan flagged the file
* 4: a security violation stopped a load
* 5: the load succeeded but stubs remain and --strict was given
"""

from __future__ import annotations

import argparse
import os
import statistics
import sys
import time

from . import __version__
from .container import read_pickle_bytes
from .errors import (
    PickleWardError,
    SecurityViolation,
    StubsPresent,
)
from .graph import canonical_dump, list_stubs
from .opcodes import disassemble, parse
from .policy import ClassCache, dumps_policy, read_policy, write_policy
from .policygen import explain, generate
from .srcindex import index_library
from .tracing import (
    load_default_denylist,
    read_denylist,
    report_json,
    report_text,
    scan,
    trace,
)
from .vm import VmConfig, assert_no_stubs, execute

EXIT_OK = 0
EXIT_ERROR = 2
EXIT_FLAGGED = 3
EXIT_SECURITY = 4
EXIT_STUBS = 5


def _add_input_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("file", help="pickle file or ZIP archive")
    parser.add_argument("--member", default=None,
                        help="archive member holding the pickle program "
                             "(default: the single data.pkl member)")


def _parsed_stream(args):
    data = read_pickle_bytes(args.file, args.member)
    return parse(data)


def _cmd_disassemble(args) -> int:
    sys.stdout.write(disassemble(_parsed_stream(args)) + "\n")
    return EXIT_OK


def _cmd_trace(args) -> int:
    report = trace(_parsed_stream(args))
    if args.format == "json":
        sys.stdout.write(report_json(report))
    else:
        sys.stdout.write(report_text(report))
    return EXIT_OK


def _cmd_scan(args) -> int:
    denylist = (read_denylist(args.denylist) if args.denylist
                else load_default_denylist())
    verdict = scan(_parsed_stream(args), denylist)
    if verdict.flagged:
        print(f"Flagged: {', '.join(verdict.matched)}")
        return EXIT_FLAGGED
    print("Clean")
    return EXIT_OK


def _cmd_gen_policy(args) -> int:
    index = index_library(args.library)
    cache_dir = args.cache or os.environ.get("PICKLEWARD_CACHE")
    policy = generate(index, args.root, ClassCache(cache_dir))
    if args.output:
        write_policy(policy, args.output)
        print(f"wrote {args.output}")
    else:
        sys.stdout.write(dumps_policy(policy))
    for warning in policy.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    return EXIT_OK


def _load_outcome(args):
    stream = _parsed_stream(args)
    if args.unrestricted:
        config = VmConfig.unrestricted_mode()
    else:
        if not args.policy:
            raise PickleWardError(
                "load needs --policy (or --unrestricted)")
        config = VmConfig.restricted_mode(read_policy(args.policy))
    return execute(stream, config)


def _cmd_load(args) -> int:
    outcome = _load_outcome(args)
    if args.strict:
        assert_no_stubs(outcome)
    if args.dump:
        sys.stdout.write(canonical_dump(outcome.result))
        return EXIT_OK
    stubs = list_stubs(outcome.result)
    trace_ = outcome.trace
    kind = getattr(outcome.result, "kind", type(outcome.result).__name__)
    print(f"loaded: {kind}; opcodes: {outcome.stats.opcode_count}; "
          f"imports: {len(trace_.imports)}; "
          f"invocations: {len(trace_.invocations)}; "
          f"stubs: {len(stubs)}")
    for path, name in stubs:
        print(f"stub: {path or '$'}: {name}")
    return EXIT_OK


def _cmd_explain(args) -> int:
    policy = read_policy(args.policy)
    sys.stdout.write(explain(policy, args.name))
    return EXIT_OK


def _cmd_bench(args) -> int:
    data = read_pickle_bytes(args.file, args.member)
    policy = read_policy(args.policy)
    iterations = args.iterations
    restricted = VmConfig.restricted_mode(policy)
    unrestricted = VmConfig.unrestricted_mode()

    def run(config) -> list[float]:
        samples = []
        for _ in range(iterations):
            started = time.perf_counter()
            execute(parse(data), config)
            samples.append(time.perf_counter() - started)
        return samples

    run(unrestricted)  # warm-up pass, not timed
    base = statistics.median(run(unrestricted))
    guarded = statistics.median(run(restricted))
    overhead = (guarded - base) / base * 100.0 if base else 0.0
    print(f"iterations: {iterations}")
    print(f"unrestricted median: {base * 1000:.3f} ms")
    print(f"restricted median: {guarded * 1000:.3f} ms")
    print(f"overhead: {overhead:.2f}%")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pickleward",
        description="Policy-enforced loading and analysis of pickle files.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("disassemble",
                       help="print one opcode per line with offsets")
    _add_input_args(p)
    p.set_defaults(func=_cmd_disassemble)

    p = sub.add_parser("trace",
                       help="statically report imports and invocations")
    _add_input_args(p)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=_cmd_trace)

    p = sub.add_parser("scan", help="match traced names against a denylist")
    _add_input_args(p)
    p.add_argument("--denylist", default=None,
                   help="denylist JSON (default: the built-in list)")
    p.set_defaults(func=_cmd_scan)

    p = sub.add_parser("gen-policy",
                       help="generate a load policy from library sources")
    p.add_argument("library", help="library source directory or file")
    p.add_argument("root", help="dotted name of the model root class")
    p.add_argument("-o", "--output", default=None,
                   help="write the policy here instead of stdout")
    p.add_argument("--cache", default=None,
                   help="directory of user class-cache entries "
                        "(default: $PICKLEWARD_CACHE)")
    p.set_defaults(func=_cmd_gen_policy)

    p = sub.add_parser("load", help="execute a pickle under a policy")
    _add_input_args(p)
    p.add_argument("--policy", default=None, help="policy JSON file")
    p.add_argument("--strict", action="store_true",
                   help="fail (exit 5) if any stub remains in the result")
    p.add_argument("--dump", action="store_true",
                   help="print the canonical result dump")
    p.add_argument("--unrestricted", action="store_true",
                   help="load without a policy; analysis use only")
    p.set_defaults(func=_cmd_load)

    p = sub.add_parser("explain",
                       help="show why a policy allows a name")
    p.add_argument("policy", help="policy JSON file")
    p.add_argument("name", help="dotted name to explain")
    p.set_defaults(func=_cmd_explain)

    p = sub.add_parser("bench",
                       help="compare restricted and unrestricted load times")
    _add_input_args(p)
    p.add_argument("--policy", required=True, help="policy JSON file")
    p.add_argument("--iterations", type=int, default=7)
    p.set_defaults(func=_cmd_bench)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except StubsPresent as exc:
        print(f"stubs present: {exc}", file=sys.stderr)
        return EXIT_STUBS
    except SecurityViolation as exc:
        print(f"security violation: {exc}", file=sys.stderr)
        return EXIT_SECURITY
    except PickleWardError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
