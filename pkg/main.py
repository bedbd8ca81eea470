#!/usr/bin/env python3
"""
Command-line entry point for flatstrata
Validates and inspects marked translation surfaces, evaluates functionals and
their Hessians, runs family sweeps and the acceptance suite.

Usage:
    python main.py [--config FILE] [--format json|csv] [--out FILE] <subcommand> ...

Subcommands: validate, info, periods, saddles, functional, hessian, sweep,
bounds, strata, gen, verify. A surface argument is a file path or
builtin:NAME[:p1,p2,...].
"""

import argparse
import logging
import sys
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from acceptance_suite import AcceptanceSuite
from flatstrata_errors import BadFlag, FlatStrataError, UnknownCommand
from functionals import FUNCTIONAL_NAMES, FunctionalEvaluator
from geodesics import SaddleConnectionFinder
from homology_periods import homology_basis
from numerics_hessian import SWEEP_FAMILIES, complex_hessian_fd, family_sweep, sweep_grid
from report_io import emit_report, saddle_rows
from run_config import RunConfig, load_config, setup_logging
from strata_covers import Surjection, cohdim_bounds, parse_sigma, stratification_table
from surface_core import Surface, area, load_surface, save_surface, serialize, topology
from surface_generators import FAMILIES, builtin

COMMANDS = ("validate", "info", "periods", "saddles", "functional", "hessian", "sweep",
            "bounds", "strata", "gen", "verify")


class _Parser(argparse.ArgumentParser):
    """ArgumentParser raising library errors instead of exiting."""

    def error(self, message: str):
        if "invalid choice" in message and "command" in message:
            raise UnknownCommand(message)
        raise BadFlag(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="flatstrata", description="Flat geometry of marked translation surfaces")
    parser.add_argument("--config", help="Path to a JSON/json5 configuration file")
    parser.add_argument("--format", choices=["json", "csv"], help="Report format (default from config)")
    parser.add_argument("--out", help="Write the report to this file instead of standard output")
    parser.add_argument("--log-dir", help="Directory for the detailed log file")
    parser.add_argument("--verbose", action="store_true", help="Log at DEBUG on the console")

    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("validate", help="Validate a surface file")
    p.add_argument("surface")

    p = sub.add_parser("info", help="Genus, stratum, area and systole")
    p.add_argument("surface")

    p = sub.add_parser("periods", help="Relative homology basis and periods")
    p.add_argument("surface")

    p = sub.add_parser("saddles", help="Saddle connections up to a length")
    p.add_argument("surface")
    p.add_argument("--max-length", type=float, required=True)
    p.add_argument("--csv", help="Also write the connections as a CSV table to this file")

    p = sub.add_parser("functional", help="Evaluate a functional")
    p.add_argument("surface")
    p.add_argument("--name", required=True, choices=FUNCTIONAL_NAMES)
    p.add_argument("--sigma", help="Surjection images, e.g. \"1,1\"")
    p.add_argument("--chain", help="Chain of surjections separated by ';', e.g. \"1,2;1,1\"")

    p = sub.add_parser("hessian", help="Finite-difference complex Hessian")
    p.add_argument("surface")
    p.add_argument("--functional", required=True, choices=FUNCTIONAL_NAMES)
    p.add_argument("--sigma")
    p.add_argument("--step", type=float)
    p.add_argument("--tol", type=float, help="Relative eigenvalue tolerance")
    p.add_argument("--no-richardson", action="store_true")

    p = sub.add_parser("sweep", help="Evaluate a functional along a family and fit the slope")
    p.add_argument("--family", required=True, choices=sorted(SWEEP_FAMILIES))
    p.add_argument("--from", dest="start", type=float, required=True)
    p.add_argument("--to", dest="stop", type=float, required=True)
    p.add_argument("--steps", type=int, default=10)
    p.add_argument("--functional", required=True, choices=FUNCTIONAL_NAMES)
    p.add_argument("--csv", help="Write the CSV table to this file")

    p = sub.add_parser("bounds", help="Cohomological-dimension bounds")
    p.add_argument("--genus", type=int, required=True)
    p.add_argument("--marked", type=int, default=0)

    p = sub.add_parser("strata", help="Stratification table of the Hodge bundle")
    p.add_argument("--genus", type=int, required=True)
    p.add_argument("--marked", type=int, default=0)

    p = sub.add_parser("gen", help="Write a builtin surface to a file")
    p.add_argument("--family", required=True, choices=sorted(FAMILIES))
    p.add_argument("--params", type=float, nargs="*", default=[])
    p.add_argument("--out", dest="gen_out", help="Surface file to write (same as the global --out)")

    p = sub.add_parser("verify", help="Run the acceptance suite")
    p.add_argument("--quick", action="store_true", help="Reduced sample counts")
    p.add_argument("--report-dir", default=".", help="Where to save verify_report_<timestamp>.json")

    return parser


class FlatStrataCommands:
    """
    One method per subcommand, each returning the report object.
    """

    def __init__(self, config: RunConfig, logger: Optional[logging.Logger] = None):
        self.config = config
        self.logger = logger or logging.getLogger('FlatStrata.CLI')
        self.evaluator = FunctionalEvaluator(config)

    def resolve_surface(self, source: str) -> Surface:
        if source.startswith("builtin:"):
            parts = source.split(":")
            try:
                params = [float(x) for x in parts[2].split(",") if x] if len(parts) > 2 else []
            except ValueError:
                raise BadFlag(f"bad builtin parameters in {source!r}")
            return builtin(parts[1], params)
        try:
            return load_surface(source, eps_geom=self.config.eps_geom, eps_angle=self.config.eps_angle)
        except OSError as e:
            raise BadFlag(f"cannot read surface file {source}: {e}")

    def _sigma(self, text: Optional[str], surface: Surface) -> Optional[Surjection]:
        return parse_sigma(text, surface.n) if text else None

    def validate(self, args) -> Dict[str, Any]:
        surface = self.resolve_surface(args.surface)
        sig = topology(surface)
        return {"valid": True, "genus": sig.g, "stratum": sig.label(), "n": sig.n, "k": sig.k,
                "period_dimension": sig.period_dimension}

    def info(self, args) -> Dict[str, Any]:
        surface = self.resolve_surface(args.surface)
        sig = topology(surface)
        length, _ = SaddleConnectionFinder(surface, self.config).systole()
        return {
            "genus": sig.g,
            "stratum": sig.label(),
            "n": sig.n,
            "k": sig.k,
            "period_dimension": sig.period_dimension,
            "polygons": len(surface.polygons),
            "area": area(surface),
            "systole": length,
            "fingerprint": surface.fingerprint,
        }

    def periods(self, args) -> List[Dict[str, Any]]:
        surface = self.resolve_surface(args.surface)
        chart = homology_basis(surface)
        return [
            {"cycle_id": j, "re": z.real, "im": z.imag, "cycle": chart.describe_cycle(j)}
            for j, z in enumerate(chart.period_vector)
        ]

    def saddles(self, args) -> List[Dict[str, Any]]:
        surface = self.resolve_surface(args.surface)
        rows = saddle_rows(SaddleConnectionFinder(surface, self.config).enumerate(args.max_length))
        if args.csv:
            emit_report(rows, "csv", out=args.csv, columns=["length", "re", "im", "start", "end"])
            self.logger.info(f"{len(rows)} saddle connections written to {args.csv}")
        return rows

    def functional(self, args):
        surface = self.resolve_surface(args.surface)
        chain = None
        if args.chain:
            chain = [parse_sigma(part, surface.n) for part in args.chain.split(";") if part.strip()]
        return self.evaluator.evaluate(args.name, surface, sigma=self._sigma(args.sigma, surface), chain=chain)

    def hessian(self, args):
        surface = self.resolve_surface(args.surface)
        config = self.config
        if args.tol is not None:
            config = RunConfig.from_dict({**config.to_dict(), "tol_eig_rel": args.tol})
        return complex_hessian_fd(
            args.functional, surface, step=args.step, evaluator=self.evaluator,
            sigma=self._sigma(args.sigma, surface), config=config,
            richardson=False if args.no_richardson else None,
        )

    def sweep(self, args):
        grid = sweep_grid(args.family, args.start, args.stop, args.steps)
        result = family_sweep(args.family, grid, [args.functional], self.evaluator)
        fit = result.fits.get(args.functional, {})
        footer = [f"slope={fit.get('slope', float('nan')):.12g} "
                  f"intercept={fit.get('intercept', float('nan')):.12g} r2={fit.get('r2', float('nan')):.12g}"]
        table = result.table[["param", "value", "flags"]]
        if args.csv:
            emit_report(table, "csv", out=args.csv, columns=["param", "value", "flags"], footer=footer)
            self.logger.info(f"Sweep table written to {args.csv}")
        return {"family": result.family, "chart": result.chart, "functional": args.functional,
                "rows": table, "fit": fit}, table, footer

    def bounds(self, args) -> Dict[str, int]:
        return cohdim_bounds(args.genus, args.marked)

    def strata(self, args):
        return stratification_table(args.genus, args.marked)

    def gen(self, args, out: Optional[str]) -> Dict[str, Any]:
        surface = builtin(args.family, args.params)
        if out:
            save_surface(surface, out)
            self.logger.info(f"Surface {args.family}{tuple(args.params)} written to {out}")
        return serialize(surface)

    def verify(self, args) -> Dict[str, Any]:
        suite = AcceptanceSuite(self.config, quick=args.quick, logger=logging.getLogger('FlatStrata.Verify'))
        report = suite.run()
        suite.save_report(report, args.report_dir)
        return report


def _write(data: bytes):
    sys.stdout.write(data.decode("utf-8"))
    sys.stdout.flush()


def dispatch(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parse arguments, run one subcommand and emit its report.

    Returns:
        0 on success, the error's exit code otherwise (2 validation, 3 numerical),
        1 when verify reports failures
    """
    logger = logging.getLogger('FlatStrata.CLI')
    try:
        args = build_parser().parse_args(list(argv) if argv is not None else None)
        if args.command is None:
            raise UnknownCommand(f"no subcommand given; choose from {', '.join(COMMANDS)}")

        config = load_config(args.config, {"output_format": args.format, "log_dir": args.log_dir})
        setup_logging(config.log_dir, logging.DEBUG if args.verbose else logging.INFO)
        logger.debug(f"Command {args.command} with config {config.to_dict()}")

        commands = FlatStrataCommands(config, logger)
        fmt = config.output_format
        columns: Optional[List[str]] = None
        footer: Optional[List[str]] = None
        out = args.out

        if args.command == "sweep":
            result, table, footer = commands.sweep(args)
            if fmt == "csv":
                result, columns = table, ["param", "value", "flags"]
        elif args.command == "gen":
            result = commands.gen(args, args.gen_out or out)
            out = None
        else:
            result = getattr(commands, args.command)(args)
            if args.command == "verify":
                failed = result["summary"]["failed"]
            if fmt == "csv":
                columns = {
                    "periods": ["cycle_id", "re", "im", "cycle"],
                    "saddles": ["length", "re", "im", "start", "end"],
                    "strata": ["depth", "signature", "aut_order", "proj_dimension"],
                }.get(args.command)
                if columns is None:
                    result = [result if isinstance(result, dict) else _flat(result)]

        data = emit_report(result, fmt, out=out, columns=columns, footer=footer)
        if out:
            logger.info(f"Report written to {out}")
        else:
            _write(data)

        if args.command == "verify" and failed:
            return 1
        return 0

    except FlatStrataError as e:
        logger.debug("Command failed", exc_info=True)
        if not logging.getLogger('FlatStrata').handlers:
            print(str(e), file=sys.stderr)
        else:
            logger.error(str(e))
        return e.exit_code


def _flat(result: Any) -> Dict[str, Any]:
    """Scalar fields of a result object, for one-row CSV reports."""
    record = result.to_dict() if hasattr(result, "to_dict") else dict(vars(result))
    return {k: v for k, v in record.items() if isinstance(v, (int, float, str, bool, np.floating, np.integer))}


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
