"""Command-line front end.

Exit codes: 0 success, 1 a run errored or a monitor failed, 2 usage error,
3 config file missing, 4 config schema error, 5 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from .config import ConfigSchemaError, load_config, parse_monitors, parse_seeds, with_overrides
from .core import DelaySchedule, build_virtual_map, resolve_tie_order, verify_slot_lag
from .environments import DEFAULT_PATTERN, DatasetError, periodic_delays
from .harness import ConfigError, SweepSummary, atomic_write_text, sweep, write_outputs
from .plot import emit_plot, plot_trace_files

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NO_CONFIG, EXIT_SCHEMA, EXIT_IO = 0, 1, 2, 3, 4, 5
OUT_ENV = "DELAYBANDIT_OUT"

log = logging.getLogger("delaybandit")


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _seeds(text: str) -> tuple[int, ...]:
    try:
        return parse_seeds(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _monitors(text: str) -> frozenset[str]:
    try:
        return parse_monitors(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _horizons(text: str) -> tuple[int, ...]:
    try:
        hs = tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma list of integers: {text!r}") from None
    if not hs or min(hs) < 1:
        raise argparse.ArgumentTypeError("horizons must be positive integers")
    return hs


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="delaybandit",
        description="Simulate bandit learners under unknown feedback delays.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def run_flags(p, out=True):
        p.add_argument("--config", required=True, help="run configuration file")
        if out:
            p.add_argument("--out", default=None,
                           help=f"output directory (default: ${OUT_ENV} or ./results)")
            p.add_argument("--format", choices=("csv",), default="csv")
        p.add_argument("--seeds", type=_seeds, default=None, help="e.g. 0-29 or 1,4,7")
        p.add_argument("--monitors", type=_monitors, default=None, help="all, none or a comma list")
        p.add_argument("--workers", type=int, default=None, help="parallel worker processes")
        p.add_argument("-v", "--verbose", action="store_true", help="print learner state dumps")

    run_flags(sub.add_parser("run-mab", help="run a multi-armed bandit config"))
    run_flags(sub.add_parser("run-bco", help="run a bandit convex optimization config"))

    sw = sub.add_parser("sweep", help="run a config over several horizons")
    run_flags(sw)
    sw.add_argument("--horizons", type=_horizons, default=None, help="e.g. 500,1000,2000,4000")

    ver = sub.add_parser("verify", help="check a delay schedule or a config's invariants")
    src = ver.add_mutually_exclusive_group(required=True)
    src.add_argument("--schedule", help="'paper_pattern' or a delay file (one integer per line)")
    src.add_argument("--config", help="run every seed with all monitors enabled")
    ver.add_argument("--T", type=int, default=2000, help="horizon for paper_pattern")
    ver.add_argument("--tie-order", default="descending")
    ver.add_argument("--seeds", type=_seeds, default=None)
    ver.add_argument("-v", "--verbose", action="store_true")

    pl = sub.add_parser("plot", help="draw regret curves from trace CSVs")
    pl.add_argument("traces", nargs="+", help="trace or aggregate CSV files")
    pl.add_argument("--out", required=True, help="SVG file to write")
    pl.add_argument("--column", default=None)
    pl.add_argument("--title", default=None)
    return parser


def _load(path: str):
    if not Path(path).is_file():
        raise CliError(EXIT_NO_CONFIG, f"config file not found: {path}")
    try:
        configs = load_config(path)
    except (ConfigSchemaError, ConfigError) as exc:
        raise CliError(EXIT_SCHEMA, f"{path}: schema error: {exc}") from None
    except OSError as exc:
        raise CliError(EXIT_IO, f"{path}: {exc}") from None
    for c in configs:
        for spec, field in ((c.environment, "environment.path"), (c.delays, "delays.path")):
            if isinstance(spec, dict) and "path" in spec and not Path(spec["path"]).is_file():
                raise CliError(EXIT_IO, f"{field}: file not found: {spec['path']}")
    return configs


def _out_dir(args) -> Path:
    return Path(args.out or os.environ.get(OUT_ENV) or "results")


def _report(summary: SweepSummary, verbose: bool) -> dict:
    doc = {}
    for entry in summary.entries:
        doc[entry.config.name] = {
            "seeds": {str(r.seed): r.monitor.as_dict() for r in entry.runs},
            "errors": {str(s): msg for s, msg in entry.errors},
            "passed": not entry.errors and all(r.monitor.passed for r in entry.runs),
        }
        for r in entry.runs:
            if not r.monitor.passed:
                for line in r.monitor.lines():
                    if "FAIL" in line:
                        print(f"{entry.config.name} seed {r.seed}: {line}", file=sys.stderr)
            if verbose:
                state = json.dumps(r.learner_state, default=float)
                print(f"{entry.config.name} seed {r.seed} state: {state}")
    return doc


def _print_table(summary: SweepSummary) -> None:
    for row in summary.table():
        print(f"{row['label']:>16s}  T={row['T']}  seeds={row['seeds']}  errors={row['errors']}  "
              f"final normalized regret {row['mean_final_normalized_regret']:.6f} "
              f"+- {row['std_final_normalized_regret']:.6f}")


def _execute(configs, args, out: Path) -> int:
    summary = sweep(configs, workers=args.workers)
    _print_table(summary)
    doc = _report(summary, args.verbose)
    try:
        write_outputs(summary, out)
        series = {}
        for e in summary.entries:
            if e.runs:
                mean = e.mean_curve
                series[e.config.name] = (range(1, mean.size + 1), mean)
        if series:
            atomic_write_text(out / "regret.svg", emit_plot(series))
        atomic_write_text(out / "monitor_report.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write outputs to {out}: {exc}") from None
    print(f"wrote results to {out}")
    return EXIT_OK if summary.ok else EXIT_FAIL


def cmd_run(args, setting: str) -> int:
    configs = _load(args.config)
    if configs[0].setting != setting:
        raise CliError(EXIT_SCHEMA, f"run.setting: config is '{configs[0].setting}', "
                                    f"but the command is run-{setting}")
    configs = with_overrides(configs, seeds=args.seeds, monitors=args.monitors)
    return _execute(configs, args, _out_dir(args))


def cmd_sweep(args) -> int:
    base = with_overrides(_load(args.config), seeds=args.seeds, monitors=args.monitors)
    if args.horizons is None:
        return _execute(base, args, _out_dir(args))
    configs = [replace(c, horizon=h, label=f"{c.name}_T{h}") for h in args.horizons for c in base]
    return _execute(configs, args, _out_dir(args))


def _schedule_from(args) -> DelaySchedule:
    if args.schedule == "paper_pattern":
        if args.T < 1:
            raise CliError(EXIT_USAGE, "--T must be positive")
        return periodic_delays(args.T, DEFAULT_PATTERN)
    path = Path(args.schedule)
    if not path.is_file():
        raise CliError(EXIT_IO, f"schedule file not found: {path}")
    try:
        return DelaySchedule.load(path)
    except ValueError as exc:
        raise CliError(EXIT_SCHEMA, f"{path}: {exc}") from None


def cmd_verify(args) -> int:
    if args.config:
        configs = with_overrides(_load(args.config), seeds=args.seeds,
                                 monitors=parse_monitors("all"))
        summary = sweep(configs)
        for e in summary.entries:
            for r in e.runs:
                status = "PASS" if r.monitor.passed else "FAIL"
                print(f"{e.config.name} seed {r.seed}: {status}")
                for line in r.monitor.lines():
                    print(f"  {line}")
            for s, msg in e.errors:
                print(f"{e.config.name} seed {s}: ERROR {msg}")
        return EXIT_OK if summary.ok else EXIT_FAIL
    try:
        tie = resolve_tie_order(args.tie_order)
    except ValueError as exc:
        raise CliError(EXIT_USAGE, str(exc)) from None
    sched = _schedule_from(args)
    report = verify_slot_lag(build_virtual_map(sched, tie), sched)
    print(f"T={sched.T}")
    print(f"D={sched.total}")
    print(f"d_bar={sched.d_bar}")
    print(f"s_tilde >= 0:        {'PASS' if report.nonnegative else 'FAIL'}")
    print(f"s_tilde <= 2 d_bar:  {'PASS' if report.bounded else 'FAIL'}")
    print(f"sum s_tilde == D:    {'PASS' if report.sum_matches else 'FAIL'} "
          f"({report.s_tilde_sum} vs {report.total_delay})")
    for v in report.violations:
        print(f"  {v}")
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_plot(args) -> int:
    for p in args.traces:
        if not Path(p).is_file():
            raise CliError(EXIT_IO, f"trace file not found: {p}")
    try:
        svg = plot_trace_files(args.traces, args.column, args.title)
    except (ValueError, KeyError) as exc:
        raise CliError(EXIT_SCHEMA, str(exc)) from None
    try:
        atomic_write_text(args.out, svg)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write {args.out}: {exc}") from None
    print(f"wrote {args.out}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "workers", None) is not None and args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "run-mab":
            return cmd_run(args, "mab")
        if args.command == "run-bco":
            return cmd_run(args, "bco")
        if args.command == "sweep":
            return cmd_sweep(args)
        if args.command == "verify":
            return cmd_verify(args)
        return cmd_plot(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except DatasetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA


if __name__ == "__main__":
    sys.exit(main())
