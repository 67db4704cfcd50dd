"""Command line front end.

Exit codes: 0 all checks passed, 1 at least one check failed, 2 the
configuration was rejected, 3 a runtime error stopped the suite.  Reports
are deterministic for a given configuration and seed; wall-clock timing is
printed to the console only.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from ..dynamics import FixedPointError
from ..geometry import GeometryError
from ..horospheres import ConvergenceError
from ..mapexpr import ParseError, SelfMapError
from .config import (
    SUITES,
    ConfigError,
    ScenarioConfig,
    apply_overrides,
    load_config,
    parse_domain,
)
from .plotdata import emit_plot, summary_figure
from .report import console_summary, write_report
from .suites import run_suite

_COMMAND_SUITE = {
    "verify-metric": "metric",
    "verify-horospheres": "horospheres",
    "wolff": "wolff",
    "dynamics": "dynamics",
    "herve-table": "herve",
}

_RUNTIME_ERRORS = (GeometryError, ParseError, SelfMapError, ConvergenceError,
                   FixedPointError, OSError)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="scenario file (INI)")
    p.add_argument("--domain", metavar="SPEC", help="disk, polydisk:N or ball:N")
    p.add_argument("--seed", type=int, metavar="N", help="root seed for all sampling")
    p.add_argument("--out", metavar="PATH",
                   help="write the report here; a summary PNG lands next to it")
    p.add_argument("--suite", choices=SUITES,
                   help="run this suite instead of the subcommand default")
    p.add_argument("--tol", type=float, metavar="X",
                   help="override the margin and invariance tolerances")
    p.add_argument("--map", action="append", dest="maps", metavar="EXPR",
                   help="self-map expression; repeat for several")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="horodyn",
        description="invariant distance and horosphere checks on disk, "
                    "polydisk and ball domains")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, suite in _COMMAND_SUITE.items():
        p = sub.add_parser(name, help=f"run the {suite} check suite")
        _add_common(p)
    p = sub.add_parser("emit-plot", help="write a figure table (CSV) plus its PNG rendering")
    _add_common(p)
    p.add_argument("--stem", metavar="PATH", default="plot",
                   help="output stem for the CSV/PNG pair")
    p.add_argument("--plot-kind", choices=("margin-grid", "orbit-trace"),
                   help="override the configured plot kind")
    p.add_argument("--steps", type=int, metavar="N", help="orbit trace length")
    return parser


def _figure_path(out: str) -> Path:
    p = Path(out)
    fig = p.with_suffix(".png")
    if fig == p:
        fig = p.with_name(p.stem + "-summary.png")
    return fig


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config) if args.config else ScenarioConfig()
        if args.domain:
            config = replace(config, domain=parse_domain(args.domain))
        if args.maps:
            config = replace(config, maps=tuple(args.maps))
        suite = args.suite or _COMMAND_SUITE.get(args.command)
        config = apply_overrides(config, seed=args.seed, out=args.out,
                                 suite=suite, tol=args.tol)
        if args.command == "emit-plot":
            plot = config.plot
            if args.plot_kind:
                plot = replace(plot, kind=args.plot_kind)
            if args.steps is not None:
                plot = replace(plot, steps=args.steps)
            config = replace(config, plot=plot)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2

    if args.command == "emit-plot":
        try:
            csv_path, png_path = emit_plot(config, args.stem)
        except ConfigError as err:
            print(f"config error: {err}", file=sys.stderr)
            return 2
        except _RUNTIME_ERRORS as err:
            print(f"error: {err}", file=sys.stderr)
            return 3
        print(f"wrote {csv_path} and {png_path}")
        return 0

    try:
        report = run_suite(config)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except _RUNTIME_ERRORS as err:
        print(f"error: {err}", file=sys.stderr)
        return 3

    if config.out:
        try:
            write_report(report, config.out)
            summary_figure(report, _figure_path(config.out))
        except OSError as err:
            print(f"error: cannot write {config.out}: {err}", file=sys.stderr)
            return 3
        print(f"report written to {config.out}")
    if config.suite == "herve":
        print(_herve_table(report))
    print(console_summary(report))
    return 0 if report.failures == 0 else 1


def _fmt_complex(value) -> str:
    if value is None:
        return "-"
    z = complex(value)
    return f"{z.real:+.4f}{z.imag:+.4f}i"


def _herve_table(report) -> str:
    """Console table of per-map slice classifications."""
    head = f"{'map':<42} {'case':>4} {'orient':>7} {'sigma':>16} {'tau':>16} {'status':>8}"
    lines = [head, "-" * len(head)]
    for rec in sorted(report.records, key=lambda r: r.id):
        tag = rec.id.rsplit("/", 1)[-1]
        if tag not in ("classification", "map-error"):
            continue
        ex = rec.extra
        text = str(ex.get("map", ""))[:42]
        case = ex.get("case")
        lines.append(
            f"{text:<42} {('-' if case is None else str(case)):>4} "
            f"{str(ex.get('orientation') or '-'):>7} "
            f"{_fmt_complex(ex.get('sigma')):>16} {_fmt_complex(ex.get('tau')):>16} "
            f"{rec.status:>8}"
        )
        if rec.note:
            lines.append(f"    note: {rec.note}")
    return "\n".join(lines)


if __name__ == "__main__":
    raise SystemExit(main())
