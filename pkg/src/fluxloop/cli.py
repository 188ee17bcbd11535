"""Command-line front end.

Five subcommands: ``simulate`` runs a program against a config and can
export the trace, ``sta`` prints worst-case slacks (optionally searching
for the maximum feasible frequency), ``margins`` sweeps empirical bias
margins over a frequency list, ``density`` prints storage-density tables,
and ``characterize`` sweeps one cell's delay over bias.

Exit codes classify failures for scripting: 2 config/usage trouble,
3 infeasible frequency, 4 a run that completed but failed (violations or
wrong reads).
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction
from pathlib import Path

from .cells import BiasRangeError, default_cell_params
from .core import (
    BiasPoint,
    ConfigError,
    InfeasibleFrequencyError,
    exact_ratio,
    parse_config,
    parse_frequency,
)
from .density import (
    PRESETS,
    TABLE_FREQUENCIES_GHZ,
    build_report,
    report_to_csv,
    report_to_text,
    reproduce_published,
    resolve_preset,
    stacked_spec,
)
from .engine import trace_to_csv, trace_to_vcd
from .memory import oracle, parse_program, run_program
from .timing import (
    characterization_to_csv,
    characterize_cell,
    bias_margin,
    margin_sweep,
    margins_to_csv,
    margins_to_text,
    max_frequency,
    sta,
    sta_to_text,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_RUN_FAILED = 4


def _read(path: str, what: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ConfigError(what, f"cannot read {path}: {exc.strerror or exc}") from None


def _write(path: str, text: str) -> None:
    Path(path).write_text(text)


def _parse_freq_list(raw: str) -> list[int]:
    freqs = [parse_frequency(item.strip(), "freqs") for item in raw.split(",") if item.strip()]
    if not freqs:
        raise ConfigError("freqs", "expected a comma-separated frequency list")
    return freqs


def _cmd_simulate(args: argparse.Namespace) -> int:
    cfg = parse_config(_read(args.config, "config"))
    program = parse_program(_read(args.program, "program"))
    if args.bias is not None:
        cfg = cfg.with_bias(BiasPoint(exact_ratio(args.bias)))

    result = run_program(program, cfg)

    print(f"frequency {cfg.frequency_hz / 1e9:g} GHz, {cfg.num_addresses} addresses, bias {cfg.bias}")
    expected = oracle(program, cfg.num_addresses)
    mismatches = 0
    for (trip, addr), bit in sorted(result.reads.items()):
        note = ""
        if expected[(trip, addr)] != bit:
            note = f"  (expected {expected[(trip, addr)]})"
            mismatches += 1
        print(f"trip {trip}: addr {addr} -> {bit}{note}")
    for v in result.trace.violations:
        print(f"violation: {v.kind.value} {v.cell} at {v.time_fs} fs: {v.detail}")

    if args.trace is not None:
        suffix = Path(args.trace).suffix.lower()
        if suffix == ".csv":
            _write(args.trace, trace_to_csv(result.trace))
        elif suffix == ".vcd":
            _write(args.trace, trace_to_vcd(result.trace))
        else:
            raise ConfigError("trace", f"unsupported trace format {suffix!r} (use .csv or .vcd)")

    ok = result.passed and mismatches == 0
    print(f"result: {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_RUN_FAILED


def _cmd_sta(args: argparse.Namespace) -> int:
    cfg = parse_config(_read(args.config, "config"))
    if args.find_max:
        freq = max_frequency(cfg)
        print(f"max feasible frequency: {freq / 1e9:g} GHz")
        cfg = cfg.with_frequency(freq)
    report = sta(cfg, args.bias_lo, args.bias_hi)
    sys.stdout.write(sta_to_text(report))
    return EXIT_OK if report.all_met else EXIT_RUN_FAILED


def _cmd_margins(args: argparse.Namespace) -> int:
    cfg = parse_config(_read(args.config, "config"))
    freqs = _parse_freq_list(args.freqs)
    if len(freqs) == 1:
        reports = (bias_margin(cfg.with_frequency(freqs[0])),)
    else:
        reports = margin_sweep(cfg, freqs)
    sys.stdout.write(margins_to_text(reports))
    if args.out is not None:
        _write(args.out, margins_to_csv(reports))
    return EXIT_OK


def _cmd_density(args: argparse.Namespace) -> int:
    if args.all:
        if args.layers is not None:
            raise ConfigError("layers", "--layers applies to a single --preset")
        if args.freqs is None:
            report = reproduce_published()
        else:
            freqs = [f / 1e9 for f in _parse_freq_list(args.freqs)]
            report = build_report(frequencies_ghz=freqs)
    else:
        try:
            spec = resolve_preset(args.preset)
        except KeyError as exc:
            raise ConfigError("preset", str(exc).strip("'\"")) from None
        if args.layers is not None:
            spec = stacked_spec(spec.name, args.layers)
        freqs = (
            list(TABLE_FREQUENCIES_GHZ)
            if args.freqs is None
            else [f / 1e9 for f in _parse_freq_list(args.freqs)]
        )
        report = build_report(specs=[spec], frequencies_ghz=freqs)

    rendered = report_to_csv(report) if args.format == "csv" else report_to_text(report)
    if args.out is not None:
        _write(args.out, rendered)
    else:
        sys.stdout.write(rendered)
    if not report.all_ok:
        return EXIT_RUN_FAILED
    return EXIT_OK


def _cmd_characterize(args: argparse.Namespace) -> int:
    cfg = parse_config(_read(args.config, "config"))
    try:
        params = default_cell_params(cfg.cell_overrides)[args.cell]
    except KeyError:
        raise ConfigError("cell", f"unknown cell {args.cell!r}") from None

    rng = params.operating_range()
    lo = exact_ratio(args.lo) if args.lo is not None else (rng[0] if rng else Fraction(1))
    hi = exact_ratio(args.hi) if args.hi is not None else (rng[1] if rng else Fraction(1))
    step = exact_ratio(args.step)
    if step <= 0 or lo > hi:
        raise ConfigError("step", "need step > 0 and lo <= hi")
    ratios = []
    ratio = lo
    while ratio <= hi:
        ratios.append(ratio)
        ratio += step

    rows = characterize_cell(args.cell, cfg, ratios)
    rendered = characterization_to_csv(rows)
    if args.out is not None:
        _write(args.out, rendered)
    else:
        sys.stdout.write(rendered)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fluxloop",
        description="Pulse-level delay-line memory simulator and analysis toolkit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a program and decode its reads")
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--program", required=True, help="JSON program (trips of writes/reads)")
    p.add_argument("--trace", help="write the trace to this .csv or .vcd file")
    p.add_argument("--bias", help="override the config bias ratio")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("sta", help="static timing slacks over a bias window")
    p.add_argument("--config", required=True)
    p.add_argument("--bias-lo", help="low edge of the bias window (default: config bias)")
    p.add_argument("--bias-hi", help="high edge of the bias window")
    p.add_argument("--find-max", action="store_true", help="search for the maximum feasible frequency first")
    p.set_defaults(func=_cmd_sta)

    p = sub.add_parser("margins", help="empirical bias-margin sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--freqs", required=True, help="comma-separated list, e.g. 20GHz,50GHz,100GHz")
    p.add_argument("--out", help="write the sweep as CSV to this path")
    p.set_defaults(func=_cmd_margins)

    p = sub.add_parser("density", help="delay-line storage density tables")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--preset", help=f"one of: {', '.join(PRESETS)}")
    group.add_argument("--all", action="store_true", help="all presets, verified against published figures")
    p.add_argument("--freqs", help="comma-separated drive frequencies (default 20,50,75,100 GHz)")
    p.add_argument("--layers", type=int, help="stacking-projection layer count (single preset only)")
    p.add_argument("--format", choices=("table", "csv"), default="table")
    p.add_argument("--out", help="write the report to this path instead of stdout")
    p.set_defaults(func=_cmd_density)

    p = sub.add_parser("characterize", help="sweep one cell's delay over bias")
    p.add_argument("--config", required=True)
    p.add_argument("--cell", required=True)
    p.add_argument("--lo", help="sweep start ratio (default: cell range low edge)")
    p.add_argument("--hi", help="sweep end ratio")
    p.add_argument("--step", default="0.02", help="sweep step (ratio units)")
    p.add_argument("--out", help="write the sweep as CSV to this path")
    p.set_defaults(func=_cmd_characterize)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BiasRangeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleFrequencyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
