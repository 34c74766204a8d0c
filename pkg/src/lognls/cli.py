"""Command line entry point: ``lognls run|plot|validate``.

Exit codes: 0 success, 2 invalid configuration or plot spec, 3 numerical
failure.  ``LOGNLS_OUTPUT_ROOT`` relocates relative output directories.
"""

import argparse
import json
import logging
import sys

import tomli

from .config import load_config
from .errors import ConfigError, InvalidParameterError, LogNLSError, NumericalFailure
from .experiments import SUMMARY_SCHEMA_VERSION, run_experiment
from .plotting import emit_plot

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3


def _emit(obj):
    json.dump(obj, sys.stdout, indent=2, sort_keys=True, default=str)
    sys.stdout.write("\n")


def _failure(exc, status):
    out = {"schema_version": SUMMARY_SCHEMA_VERSION, "status": status,
           "error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, ConfigError):
        out["errors"] = exc.errors
    ctx = getattr(exc, "context", None)
    if ctx:
        out.update(ctx)
    return out


def cmd_validate(args):
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        _emit(_failure(exc, "invalid"))
        return EXIT_INVALID
    _emit({"schema_version": SUMMARY_SCHEMA_VERSION, "status": "valid", "kind": cfg.kind,
           "warnings": list(cfg.warnings)})
    return EXIT_OK


def cmd_run(args):
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        _emit(_failure(exc, "invalid"))
        return EXIT_INVALID
    try:
        summary = run_experiment(cfg)
    except NumericalFailure as exc:
        _emit(_failure(exc, "numerical_failure"))
        return EXIT_NUMERICAL
    except LogNLSError as exc:
        _emit(_failure(exc, "invalid"))
        return EXIT_INVALID
    _emit(summary)
    return EXIT_OK


def cmd_plot(args):
    try:
        with open(args.plotspec, "rb") as fh:
            spec = tomli.load(fh)
        path = emit_plot(args.csv, spec, args.output)
    except (tomli.TOMLDecodeError, InvalidParameterError, OSError) as exc:
        _emit(_failure(exc, "invalid"))
        return EXIT_INVALID
    _emit({"schema_version": SUMMARY_SCHEMA_VERSION, "status": "ok", "svg": path})
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="lognls", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the experiment described by a TOML config")
    p.add_argument("config")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate", help="check a config without running it")
    p.add_argument("config")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("plot", help="render CSV columns to SVG")
    p.add_argument("csv")
    p.add_argument("plotspec", help="TOML file with x, y, logx, logy, title, output")
    p.add_argument("-o", "--output", default=None, help="SVG path (default: next to the CSV)")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
