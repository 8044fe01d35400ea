"""Command-line driver for convergence studies.

    cbcfd run --problem example2 --scheme both --grids 10,20,30,40 \
              --dt-rule h^2 --T 1.0 --forcing derived --out study/

writes results.csv, results.md, loglog.dat and convergence.png into the
output directory and prints the markdown table.  A flat key=value config
file (``--config``) may supply any of the options; explicit command-line
flags override it.  Exit codes: 0 success, 2 configuration/usage error,
3 solver failure on any grid.
"""

from __future__ import annotations

import argparse
import sys

from .linalg import SolverError
from .report import ConfigError, RunConfig, emit_all, parse_dt_rule, run_study

_CONFIG_KEYS = ("problem", "scheme", "grids", "dt_rule", "T", "forcing", "out")


def _load_config_file(path):
    values = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ConfigError("config", f"{path}:{lineno}: expected key=value, got {line!r}")
                key, _, value = line.partition("=")
                key = key.strip()
                if key not in _CONFIG_KEYS:
                    raise ConfigError("config", f"{path}:{lineno}: unknown key {key!r}; known keys: {', '.join(_CONFIG_KEYS)}")
                values[key] = value.strip()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from exc
    return values


def _parse_grids(text):
    try:
        grids = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise ConfigError("grids", f"cannot parse {text!r}: {exc}") from exc
    if not grids:
        raise ConfigError("grids", "at least one grid is required")
    return grids


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cbcfd",
        description="Convergence studies for the compact block-centered solver.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a grid-refinement study and emit reports")
    run.add_argument("--problem", default=None,
                     help="catalog id (example1, example2) or path to a .py file defining build(forcing) (default: example1)")
    run.add_argument("--scheme", default=None, choices=["cbcfd", "bcfd", "both"],
                     help="which scheme(s) to run (default: both)")
    run.add_argument("--grids", default=None,
                     help="comma-separated increasing cell counts, e.g. 20,40,80 (default: 20,40,80)")
    run.add_argument("--dt-rule", default=None,
                     help="time-step rule [c*]h[^q], e.g. h^2 or 0.5*h (default: h^2; dt is snapped so T/dt is a whole number)")
    run.add_argument("--T", default=None, type=float, help="final time (default: 1.0)")
    run.add_argument("--forcing", default=None, choices=["derived", "printed"],
                     help="forcing variant for catalog problems (default: derived)")
    run.add_argument("--out", default=None, help="output directory (default: current directory)")
    run.add_argument("--config", default=None,
                     help="flat key=value file supplying any of: " + ", ".join(_CONFIG_KEYS))
    return parser


def _merge_config(args):
    values = {
        "problem": "example1",
        "scheme": "both",
        "grids": "20,40,80",
        "dt_rule": "h^2",
        "T": "1.0",
        "forcing": "derived",
        "out": ".",
    }
    if args.config:
        values.update(_load_config_file(args.config))
    overrides = {
        "problem": args.problem,
        "scheme": args.scheme,
        "grids": args.grids,
        "dt_rule": args.dt_rule,
        "T": None if args.T is None else repr(args.T),
        "forcing": args.forcing,
        "out": args.out,
    }
    for key, value in overrides.items():
        if value is not None:
            values[key] = value
    dt_coeff, dt_power = parse_dt_rule(values["dt_rule"])
    try:
        final_time = float(values["T"])
    except ValueError as exc:
        raise ConfigError("T", f"cannot parse {values['T']!r} as a number") from exc
    return RunConfig(
        problem=values["problem"],
        scheme=values["scheme"],
        grids=_parse_grids(values["grids"]),
        dt_coeff=dt_coeff,
        dt_power=dt_power,
        T=final_time,
        forcing=values["forcing"],
        out_dir=values["out"],
    )


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        config = _merge_config(args)
        config.validate()
        reports = run_study(config)
    except ConfigError as exc:
        print(f"configuration error — {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver failure — {exc}", file=sys.stderr)
        return 3
    paths = emit_all(reports, config.out_dir)
    with open(paths["markdown"], encoding="utf-8") as fh:
        print(fh.read(), end="")
    for report in reports:
        for n, message in report.failures:
            print(f"grid {n} ({report.scheme}) failed: {message}", file=sys.stderr)
    if any(report.failures for report in reports):
        return 3
    print(f"wrote {paths['csv']}, {paths['markdown']}, {paths['loglog']}, {paths['figure']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
