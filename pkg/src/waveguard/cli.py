"""Command-line entry point.

    waveguard simulate|certify|verify|sweep|oracle --config <path>
              [--out <dir>] [--sweep <path>] [--refine N,N,...]
              [--mu-scale X] [--no-figures]

WAVEGUARD_THREADS caps sweep parallelism.
"""

import argparse
import dataclasses
import json
import sys

from . import runner
from .config import load_config
from .errors import ConfigError, ContractError, HypothesisViolatedError, \
    StepFailureError


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="waveguard",
        description="Wave-equation boundary-feedback simulator and "
                    "decay-certificate checker")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in [
            ("simulate", "run a scenario and write series, report, figures"),
            ("certify", "compute the decay certificate and feasibility"),
            ("verify", "simulate and check every certified bound"),
            ("sweep", "run a parameter grid and write summary.csv"),
            ("oracle", "compare against the exact transparent-pulse solution")]:
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", required=True, help="scenario JSON path")
        cmd.add_argument("--out", default=None, help="output directory")
        cmd.add_argument("--no-figures", action="store_true",
                         help="skip figure rendering")
        if name == "sweep":
            cmd.add_argument("--sweep", required=True,
                             help="sweep grid JSON path")
        if name == "oracle":
            cmd.add_argument("--refine", default=None,
                             help="comma-separated cell counts for a "
                                  "convergence table")
        if name == "verify":
            cmd.add_argument("--mu-scale", type=float, default=1.0,
                             help="inflate the certified rate "
                                  "(falsifiability check)")
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        config = load_config(args.config)
        if args.no_figures:
            config = dataclasses.replace(
                config, output=dataclasses.replace(config.output,
                                                   figures=False))
        if args.command == "simulate":
            report, code = runner.cmd_simulate(config, args.out)
        elif args.command == "certify":
            report, code = runner.cmd_certify(config, args.out)
        elif args.command == "verify":
            report, code = runner.cmd_verify(config, args.out,
                                             mu_scale=args.mu_scale)
        elif args.command == "sweep":
            with open(args.sweep, "r", encoding="utf-8") as fh:
                rows, code = runner.cmd_sweep(config, fh.read(), args.out)
            report = {"rows": len(rows)}
        else:
            report, code = runner.cmd_oracle(
                config, args.out,
                refine=[int(n) for n in args.refine.split(",")]
                if args.refine else None)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return runner.EXIT_CONFIG
    except ContractError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return runner.EXIT_CONFIG
    except HypothesisViolatedError as exc:
        print(f"hypothesis violated: {exc}", file=sys.stderr)
        return runner.EXIT_HYPOTHESIS
    except StepFailureError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return runner.EXIT_SOLVER_FAILURE
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return runner.EXIT_CONFIG

    summary = {"command": args.command, "exit_status": code}
    if isinstance(report, dict):
        for key in ("scenario_hash", "max_err_u", "feasible", "rows"):
            if key in report:
                summary[key] = report[key]
        bound = report.get("bound_report")
        if bound:
            summary["bound_holds"] = bound["holds"]
            summary["worst_margin"] = bound["worst_margin"]
    print(json.dumps(summary))
    return code


if __name__ == "__main__":
    sys.exit(main())
