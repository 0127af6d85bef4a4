"""Command-line entry points.

check    --config exp.toml [--out DIR] [--refine] [--threads N]
simulate --config exp.toml --paths N [--out DIR]
report   --in report.json --format md|csv [--out DIR]

Exit codes: 0 on completion (verdicts do not affect the code), 2 when
the config is missing or invalid, 3 when a checker fails at runtime
(size caps, nonconvergent solves).
"""

import argparse
import json
import sys

from .errors import HarnackLabError, InvalidSpecError
from .reporting import (ExperimentConfig, SuiteReport, emit, run,
                        run_simulation)


def _parser():
    p = argparse.ArgumentParser(prog="harnacklab")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="run the checkers in a config")
    c.add_argument("--config", required=True)
    c.add_argument("--out", default=None)
    c.add_argument("--refine", action="store_true",
                   help="also run at doubled linear size")
    c.add_argument("--threads", type=int, default=1)

    s = sub.add_parser("simulate", help="Monte Carlo estimate from a config")
    s.add_argument("--config", required=True)
    s.add_argument("--paths", type=int, required=True)
    s.add_argument("--out", default=None)

    r = sub.add_parser("report", help="re-render a JSON report")
    r.add_argument("--in", dest="infile", required=True)
    r.add_argument("--format", required=True, choices=("md", "csv"))
    r.add_argument("--out", default=None)
    return p


def _cmd_check(args):
    config = ExperimentConfig.from_toml(args.config)
    if args.threads < 1:
        raise InvalidSpecError("--threads must be at least 1")
    report = run(config, threads=args.threads,
                 refine=True if args.refine else None)
    out = args.out or config.output.get("dir", ".")
    paths = emit(report, "json", out_dir=out)
    if config.output.get("csv"):
        paths += emit(report, "csv", out_dir=out)
    if config.output.get("md"):
        paths += emit(report, "md", out_dir=out)
    for c in report.conditions:
        print("%-14s %s" % (c.condition, c.verdict))
    if report.matrix is not None:
        for name, g in report.matrix["groups"].items():
            print("%-14s %s" % (name, g["verdict"]))
        print("consistent: %s" % report.matrix["consistent"])
    for path in paths:
        print("wrote %s" % path)
    return 0


def _cmd_simulate(args):
    config = ExperimentConfig.from_toml(args.config)
    result = run_simulation(config, args.paths)
    body = result["canonical"]
    print("%s: mean=%.6g stderr=%.3g (%d paths)"
          % (body["mode"], body["mean"], body["stderr"], body["paths"]))
    if args.out:
        paths = emit(result, "json", out_dir=args.out, stem="simulate")
        for path in paths:
            print("wrote %s" % path)
    return 0


def _cmd_report(args):
    try:
        with open(args.infile) as fh:
            payload = json.load(fh)
    except OSError as e:
        raise InvalidSpecError("cannot read report %s: %s" % (args.infile, e))
    except json.JSONDecodeError as e:
        raise InvalidSpecError("report %s does not parse: %s" % (args.infile, e))
    if "canonical" not in payload:
        raise InvalidSpecError("not a suite report (no canonical section)")
    report = SuiteReport.from_dict(payload)
    out = args.out or "."
    for path in emit(report, args.format, out_dir=out):
        print("wrote %s" % path)
    return 0


def main(argv=None):
    args = _parser().parse_args(argv)
    handlers = {"check": _cmd_check, "simulate": _cmd_simulate,
                "report": _cmd_report}
    try:
        return handlers[args.command](args)
    except InvalidSpecError as e:
        print("config error: %s" % e, file=sys.stderr)
        return 2
    except HarnackLabError as e:
        print("runtime error: %s" % e, file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
