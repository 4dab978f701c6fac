"""``qpcalc check <model-file>``: exit 0 when every check passes, 1 on any failure, 2 on usage or model errors."""

from __future__ import annotations

import argparse
import sys

from .errors import ModelError, QPError
from .model import parse_model
from .runner import CHECKS, emit_report, run_checks


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qpcalc", description="Exact checks for QP-manifold models.")
    sub = parser.add_subparsers(dest="command", required=True)
    check = sub.add_parser("check", help="run the checks declared in a model file")
    check.add_argument("model", nargs="?", help="model file")
    check.add_argument("--json", metavar="PATH", help="also write the structured report to PATH ('-' for stdout)")
    check.add_argument("--seed", type=int, default=0, help="default seed for randomized checks (default 0)")
    check.add_argument("--trials", type=int, help="default trial count for randomized checks")
    check.add_argument("--parallel", action="store_true", help="run independent checks in worker processes")
    check.add_argument("--list-checks", action="store_true", help="list check names with their anchors")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2

    if args.list_checks:
        width = max(map(len, CHECKS))
        for name, spec in CHECKS.items():
            print(f"{name:<{width}}  {spec.anchor}")
        return 0
    if args.model is None:
        parser.print_usage(sys.stderr)
        print("qpcalc: error: a model file is required", file=sys.stderr)
        return 2
    if args.trials is not None and args.trials < 0:
        print("qpcalc: error: --trials must be nonnegative", file=sys.stderr)
        return 2

    try:
        with open(args.model, encoding="utf-8") as fh:
            text = fh.read()
    except (OSError, UnicodeDecodeError) as exc:
        print(f"qpcalc: cannot read {args.model}: {exc}", file=sys.stderr)
        return 2

    try:
        model = parse_model(text)
        report = run_checks(model, seed=args.seed, trials=args.trials, parallel=args.parallel)
    except ModelError as exc:
        sep = ":" if exc.line is not None else ": "
        print(f"{args.model}{sep}{exc}", file=sys.stderr)
        return 2
    except QPError as exc:
        print(f"{args.model}: {exc}", file=sys.stderr)
        return 2

    if args.json == "-":
        sys.stdout.write(emit_report(report, "json"))
    else:
        sys.stdout.write(emit_report(report, "text"))
        if args.json:
            try:
                emit_report(report, "json", args.json)
            except OSError as exc:
                print(f"qpcalc: cannot write {args.json}: {exc}", file=sys.stderr)
                return 2
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
