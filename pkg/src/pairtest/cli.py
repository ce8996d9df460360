"""Command-line interface.

Subcommands:
  analyze    fit models and run the homogeneity tests on a frequency CSV
  simulate   estimate empirical type I error (tie) or power over replicates
  convert    translate between the frequency and stacked CSV layouts

Exit codes: 0 success, 1 input/usage error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import sys

from . import __version__
from ._accel import backend
from .counts import ModelKind
from .errors import (BoundaryError, DataError, InvalidParameterError,
                     NonConvergenceError, PairtestError, SingularInformationError)
from .homogeneity import TestKind
from .io import (collapse_rows, parse_frequency, parse_frequency_wide, parse_stacked,
                 render_frequency, render_stacked, stack_rows)
from .report import (analyze, dumps_json, render_report, render_sim_table,
                     report_json, sim_summary_json)
from .simulate import SimConfig, resolve_threads, run_experiment

_INPUT_ERRORS = (DataError, InvalidParameterError, OSError)
_NUMERIC_ERRORS = (NonConvergenceError, SingularInformationError, BoundaryError)


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; the CLI contract reserves 2 for
    # numerical failures, so remap usage problems to 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit_1(message)


class SystemExit_1(Exception):
    pass


def _build_parser() -> _Parser:
    parser = _Parser(prog="pairtest",
                     description="Homogeneity tests for combined unilateral and "
                                 "bilateral binary data")
    parser.add_argument("--version", action="version",
                        version=f"pairtest {__version__} (backend: {backend()})")
    sub = parser.add_subparsers(dest="command", required=True)

    pa = sub.add_parser("analyze", help="fit models and test homogeneity")
    pa.add_argument("--data", required=True, help="frequency CSV path")
    pa.add_argument("--wide", action="store_true",
                    help="input uses the wide (groups-as-columns) layout")
    pa.add_argument("--model", default="auto", choices=["rosner", "donner", "auto"])
    pa.add_argument("--tests", default="lr,wald,score,gee",
                    help="comma list from lr,wald,score,gee")
    pa.add_argument("--alpha", type=float, default=0.05)
    pa.add_argument("--format", default="text", choices=["text", "json"])
    pa.add_argument("--out", default="-", help="output path, or - for stdout")

    ps = sub.add_parser("simulate", help="Monte Carlo rejection rates")
    ps.add_argument("mode", choices=["tie", "power"])
    ps.add_argument("--model", required=True, choices=["rosner", "donner"])
    ps.add_argument("--design", required=True, help="E1, E2 or U")
    ps.add_argument("--g", type=int, required=True, choices=[2, 4, 8])
    ps.add_argument("--pi0", type=float, help="common null proportion (tie mode)")
    ps.add_argument("--alt", choices=["H1A", "H1B"], help="alternative (power mode)")
    ps.add_argument("--rho0", type=float, help="generating correlation")
    ps.add_argument("--R0", type=float, dest="r0",
                    help="generating ratio R (ratio-model power runs)")
    ps.add_argument("--replicates", type=int, default=10_000)
    ps.add_argument("--alpha", type=float, default=0.05)
    ps.add_argument("--seed", type=int, default=0)
    ps.add_argument("--threads", type=int, default=None,
                    help="worker threads (default: PAIRTEST_THREADS or 1)")
    ps.add_argument("--tests", default="lr,wald,score,gee")
    ps.add_argument("--out", default="-",
                    help="output base path (writes .json and .txt), or - for stdout")

    pc = sub.add_parser("convert", help="frequency <-> stacked CSV")
    pc.add_argument("--data", required=True, help="input CSV path")
    pc.add_argument("--wide", action="store_true",
                    help="frequency input uses the wide layout")
    pc.add_argument("--collapse", action="store_true",
                    help="input is stacked; emit the frequency layout")
    pc.add_argument("--replicate", type=int, default=1)
    pc.add_argument("--out", default="-", help="output path, or - for stdout")
    return parser


def _parse_tests(text: str) -> tuple[TestKind, ...]:
    names = [t.strip().lower() for t in text.split(",") if t.strip()]
    if not names:
        raise InvalidParameterError("no tests requested")
    try:
        return tuple(dict.fromkeys(TestKind(n) for n in names))
    except ValueError:
        raise InvalidParameterError(
            f"unknown test in {text!r}; expected names from lr,wald,score,gee") from None


def _write(text: str, out: str) -> None:
    if out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


def _cmd_analyze(args) -> int:
    parse = parse_frequency_wide if args.wide else parse_frequency
    data = parse(args.data)
    report = analyze(data, model=args.model, tests=_parse_tests(args.tests),
                     alpha=args.alpha)
    if args.format == "json":
        _write(dumps_json(report_json(report)), args.out)
    else:
        _write(render_report(report), args.out)
    return 0


def _cmd_simulate(args) -> int:
    if args.mode == "tie":
        if args.pi0 is None or args.rho0 is None:
            raise InvalidParameterError("simulate tie requires --pi0 and --rho0")
        if args.alt is not None or args.r0 is not None:
            raise InvalidParameterError("--alt/--R0 apply to power mode only")
        config = SimConfig.tie(args.model, args.design, args.g, args.pi0, args.rho0,
                               replicates=args.replicates, alpha=args.alpha,
                               seed=args.seed, tests=_parse_tests(args.tests))
    else:
        if args.alt is None:
            raise InvalidParameterError("simulate power requires --alt")
        if args.pi0 is not None:
            raise InvalidParameterError("--pi0 applies to tie mode only")
        if (args.rho0 is None) == (args.r0 is None):
            raise InvalidParameterError(
                "simulate power requires exactly one of --rho0 and --R0")
        if args.r0 is not None and args.model != "rosner":
            raise InvalidParameterError("--R0 applies to the rosner model only")
        config = SimConfig.power(args.model, args.design, args.g, args.alt,
                                 rho0=args.rho0, kappa0=args.r0,
                                 replicates=args.replicates, alpha=args.alpha,
                                 seed=args.seed, tests=_parse_tests(args.tests))
    summary = run_experiment(config, threads=resolve_threads(args.threads))
    pi_label = f"{args.pi0:g}" if args.mode == "tie" else args.alt
    kappa_label = f"rho={args.rho0:g}" if args.rho0 is not None else f"R={args.r0:g}"
    json_text = dumps_json(sim_summary_json(summary, mode=args.mode))
    table = render_sim_table(summary, design_label=args.design.upper(),
                             pi_label=pi_label, kappa_label=kappa_label)
    if args.out == "-":
        sys.stdout.write(json_text)
    else:
        base = args.out[:-5] if args.out.endswith(".json") else args.out
        _write(json_text, base + ".json")
        _write(table, base + ".txt")
        sys.stderr.write(f"wrote {base}.json and {base}.txt\n")
        sys.stderr.write(table)
    return 0


def _cmd_convert(args) -> int:
    if args.collapse:
        data = collapse_rows(parse_stacked(args.data))
        _write(render_frequency(data), args.out)
    else:
        parse = parse_frequency_wide if args.wide else parse_frequency
        data = parse(args.data)
        _write(render_stacked(stack_rows(data, replicate=args.replicate)), args.out)
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "analyze":
            return _cmd_analyze(args)
        if args.command == "simulate":
            return _cmd_simulate(args)
        return _cmd_convert(args)
    except SystemExit_1 as exc:
        sys.stderr.write(f"pairtest: error: {exc}\n")
        return 1
    except _NUMERIC_ERRORS as exc:
        sys.stderr.write(f"pairtest: numerical failure: {exc}\n")
        return 2
    except _INPUT_ERRORS as exc:
        sys.stderr.write(f"pairtest: error: {exc}\n")
        return 1
    except PairtestError as exc:
        sys.stderr.write(f"pairtest: error: {exc}\n")
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
