"""Command line front-end: ``noma-pair run|preset|analytic``.

Exit codes: 0 success, 2 configuration error, 3 numerical error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from .errors import ArgumentError, ConfigurationError, NumericalError, OutputError
from .experiments import ExperimentSpec, run_experiment
from .presets import PRESETS, ANALYTIC_TABLES, analytic_table, preset_spec
from .report import emit_table, render_table

log = logging.getLogger("noma_pair")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 2, 3, 4


def _overrides(items) -> dict:
    out = {}
    for item in items:
        if "=" not in item:
            raise ConfigurationError(f"override must look like key=value, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def _apply_common(spec: ExperimentSpec, args) -> ExperimentSpec:
    changes = {}
    if args.seed is not None:
        changes["rng_seed"] = args.seed
    if args.trials is not None:
        changes["trials"] = args.trials
    if args.threads is not None:
        changes["threads"] = args.threads
    if args.out is not None:
        changes["output"] = args.out
    return replace(spec, **changes) if changes else spec


def _emit(table, out):
    if out:
        emit_table(table, out)
        log.info("wrote %s", out)
    else:
        sys.stdout.write(render_table(table))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="noma-pair", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--out", help="CSV output path (default: stdout)")
        p.add_argument("--seed", type=int)
        p.add_argument("--trials", type=int)
        p.add_argument("--threads", type=int)

    run = sub.add_parser("run", help="run an experiment from a key = value config file")
    run.add_argument("config")
    common(run)

    preset = sub.add_parser("preset", help="run a figure preset")
    preset.add_argument("name", choices=sorted(PRESETS))
    preset.add_argument("overrides", nargs="*", metavar="key=value")
    common(preset)

    analytic = sub.add_parser("analytic", help="closed-form large-system tables")
    analytic.add_argument("table", choices=sorted(ANALYTIC_TABLES))
    analytic.add_argument("overrides", nargs="*", metavar="key=value")
    analytic.add_argument("--out")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "analytic":
            _emit(analytic_table(args.table, _overrides(args.overrides)), args.out)
            return EXIT_OK
        if args.command == "run":
            try:
                spec = ExperimentSpec.from_file(args.config)
            except OSError as exc:
                raise OutputError(f"cannot read config {args.config}: {exc}") from exc
        else:
            spec = preset_spec(args.name, _overrides(args.overrides))
        spec = _apply_common(spec, args)
        out = spec.output
        spec = replace(spec, output=None)
        result = run_experiment(spec)
        _emit(result.table, out)
        return EXIT_OK
    except (ConfigurationError, ArgumentError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OutputError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
