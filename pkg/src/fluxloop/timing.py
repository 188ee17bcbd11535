"""Timing analysis: cell characterization, worst-case slacks, bias margins.

Three complementary views of the same controller:

* :func:`characterize_cell` measures a single cell's clock-to-output delay
  by simulating it in isolation across a bias sweep;
* :func:`sta` propagates best/worst-case delay intervals over a bias window
  through every clocked-cell constraint and reports slacks — no simulation;
* :func:`bias_margin` brackets the operating window empirically, stepping
  the simulated bias away from nominal until a scenario suite stops
  producing oracle-correct, violation-free runs.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .cells import BiasRangeError, CellKind, default_cell_params
from .core import (
    BiasPoint,
    InfeasibleFrequencyError,
    PulseEvent,
    SimConfig,
    exact_ratio,
    format_ratio,
    interval_duration,
    trip_duration,
)
from .engine import Connection, Netlist, run_until, schedule
from .memory import (
    MemoryProgram,
    default_margin_suite,
    oracle,
    phase_instants,
    required_loop_delay,
    run_program,
)


# --- characterization -------------------------------------------------------

_CHAR_WIRING = {
    CellKind.DRO: (("cin_data", "data"), ("cin_clock", "clock")),
    CellKind.DRO2R: (("cin_data", "data"), ("cin_clock", "clock0")),
    CellKind.MERGER: (("cin_clock", "in0"),),
    CellKind.FANOUT: (("cin_clock", "in"),),
}

_CHAR_OUTPUT = {
    CellKind.DRO: "out",
    CellKind.DRO2R: "out0",
    CellKind.MERGER: "out",
    CellKind.FANOUT: "out_a",
}


def characterize_cell(
    cell: str,
    cfg: SimConfig,
    ratios: Iterable[Fraction | float | str],
) -> tuple[tuple[Fraction, int], ...]:
    """Measure one cell's input-to-output delay at each bias ratio.

    The cell is simulated alone: storage cells get a data pulse followed by
    a comfortably late clock, pass-through cells just one pulse.  The
    returned delays are simulator ground truth and must agree with the
    cell's delay model at every in-range point.
    """
    params_by_name = default_cell_params(cfg.cell_overrides)
    if cell not in params_by_name:
        raise KeyError(f"unknown cell {cell!r}")
    params = params_by_name[cell]

    connections = [Connection(line, f"{cell}.{port}") for line, port in _CHAR_WIRING[params.kind]]
    connections.append(Connection(f"{cell}.{_CHAR_OUTPUT[params.kind]}", "cout"))
    inputs = frozenset(line for line, _ in _CHAR_WIRING[params.kind])
    net = Netlist(
        cells={cell: params},
        connections=tuple(connections),
        external_inputs=inputs,
        observed=("cout",),
    )

    clock_at = params.setup_fs + 10_000
    stimulus = [PulseEvent(clock_at, "cin_clock")]
    if "cin_data" in inputs:
        stimulus.insert(0, PulseEvent(0, "cin_data"))
    prepared = schedule(net, stimulus)

    rng = params.operating_range()
    rows = []
    for raw in ratios:
        ratio = exact_ratio(raw)
        if rng is not None and not (rng[0] <= ratio <= rng[1]):
            raise BiasRangeError(
                f"bias {format_ratio(ratio)} outside {cell} operating range "
                f"[{format_ratio(rng[0])}, {format_ratio(rng[1])}]"
            )
        trace = run_until(prepared, clock_at + params.delay(BiasPoint(ratio)) + 10_000, BiasPoint(ratio))
        out = trace.pulses_on("cout")
        if len(out) != 1 or trace.failed:
            raise RuntimeError(f"characterization run for {cell} did not produce a clean pulse")
        rows.append((ratio, out[0] - clock_at))
    return tuple(rows)


def characterization_to_csv(rows: Sequence[tuple[Fraction, int]]) -> str:
    lines = ["bias_ratio,delay_fs"]
    lines += [f"{format_ratio(ratio)},{delay}" for ratio, delay in rows]
    return "\n".join(lines) + "\n"


# --- static timing analysis -------------------------------------------------

@dataclass(frozen=True)
class SlackRow:
    constraint: str
    cell: str
    slack_fs: int


@dataclass(frozen=True)
class ArrivalWindow:
    """Earliest/latest pulse arrival at a node, relative to the interval's
    write-phase instant (recirc_data_next_trip: to the next trip's)."""

    node: str
    earliest_fs: int
    latest_fs: int


@dataclass(frozen=True)
class StaReport:
    frequency_hz: int
    bias_lo: Fraction
    bias_hi: Fraction
    loop_delay_fs: int
    slacks: tuple[SlackRow, ...]
    windows: tuple[ArrivalWindow, ...]

    @property
    def all_met(self) -> bool:
        return all(row.slack_fs >= 0 for row in self.slacks)

    def worst(self) -> SlackRow:
        return min(self.slacks, key=lambda row: (row.slack_fs, row.constraint))


def _check_window(cells, lo: Fraction, hi: Fraction) -> None:
    if lo > hi:
        raise ValueError("bias_lo must not exceed bias_hi")
    for name, params in cells.items():
        rng = params.operating_range()
        if rng is not None and not (rng[0] <= lo and hi <= rng[1]):
            raise BiasRangeError(
                f"bias window [{format_ratio(lo)}, {format_ratio(hi)}] exceeds {name} "
                f"operating range [{format_ratio(rng[0])}, {format_ratio(rng[1])}]"
            )


def sta(
    cfg: SimConfig,
    bias_lo: Fraction | float | str | None = None,
    bias_hi: Fraction | float | str | None = None,
) -> StaReport:
    """Worst-case slack for every clocked-cell constraint in the controller.

    Delays are evaluated as intervals over [bias_lo, bias_hi] (all cells
    share the bias rail, and delay falls as bias rises, so the extremes
    land at the window edges).  Every row's slack must be non-negative for
    the controller to meet timing across the window.

    The two ``*_period`` rows are throughput ratings — a storage cell's
    clock interval must cover its setup plus clock-to-out figure — and are
    checked at nominal bias regardless of the window: they rate the design
    point's frequency, and unlike the setup/hold races they have no
    counterpart event in the pulse-level model that would scale with bias.
    """
    lo = exact_ratio(bias_lo) if bias_lo is not None else cfg.bias.ratio
    hi = exact_ratio(bias_hi) if bias_hi is not None else cfg.bias.ratio
    cells = default_cell_params(cfg.cell_overrides)
    _check_window(cells, lo, hi)

    interval = interval_duration(cfg)
    trip = trip_duration(cfg)
    ph_read, ph_write, ph_data = phase_instants(cfg)
    header = cfg.header_intervals * interval
    loop_delay = cfg.loop_delay_fs if cfg.loop_delay_fs is not None else required_loop_delay(cfg)

    at_lo, at_hi = BiasPoint(lo), BiasPoint(hi)
    dmin = {name: p.delay(at_hi) for name, p in cells.items()}
    dmax = {name: p.delay(at_lo) for name, p in cells.items()}

    shared_min = dmin["merger"] + dmin["fanout"]
    shared_max = dmax["merger"] + dmax["fanout"]
    # Merged-path extremes over both sources (fresh write vs recirculation).
    path_min = min(dmin["write_dro"], dmin["recirc_dro2r"]) + shared_min
    path_max = max(dmax["write_dro"], dmax["recirc_dro2r"]) + shared_max

    nominal = BiasPoint.nominal()
    wd, rc, rd = cells["write_dro"], cells["recirc_dro2r"], cells["read_dro2r"]
    slacks = (
        SlackRow("write_setup", "write_dro", header + ph_write - ph_data - wd.setup_fs),
        SlackRow("write_hold", "write_dro", interval + ph_data - ph_write - wd.hold_fs),
        SlackRow("recirc_setup", "recirc_dro2r", trip - loop_delay - path_max - rc.setup_fs),
        SlackRow("recirc_hold", "recirc_dro2r", path_min + loop_delay - (trip - interval) - rc.hold_fs),
        SlackRow("recirc_period", "recirc_dro2r", interval - rc.setup_fs - rc.delay(nominal)),
        SlackRow("read_setup", "read_dro2r", ph_write + path_min - ph_read - rd.setup_fs),
        SlackRow("read_hold", "read_dro2r", interval + ph_read - ph_write - path_max - rd.hold_fs),
        SlackRow("read_period", "read_dro2r", interval - rd.setup_fs - rd.delay(nominal)),
        SlackRow("loop_race", "read_dro2r", interval + ph_read - ph_write - path_max),
    )
    windows = (
        ArrivalWindow("merger_in0", dmin["write_dro"], dmax["write_dro"]),
        ArrivalWindow("merger_in1", dmin["recirc_dro2r"], dmax["recirc_dro2r"]),
        ArrivalWindow("loop_data_in", path_min, path_max),
        ArrivalWindow("read_data", path_min + dmin["read_dro2r"], path_max + dmax["read_dro2r"]),
        ArrivalWindow("recirc_data_next_trip", path_min + loop_delay - trip, path_max + loop_delay - trip),
    )
    return StaReport(
        frequency_hz=cfg.frequency_hz,
        bias_lo=lo,
        bias_hi=hi,
        loop_delay_fs=loop_delay,
        slacks=slacks,
        windows=windows,
    )


def sta_to_text(report: StaReport) -> str:
    lines = [
        f"frequency {report.frequency_hz / 1e9:g} GHz, "
        f"bias window [{format_ratio(report.bias_lo)}, {format_ratio(report.bias_hi)}], "
        f"loop delay {report.loop_delay_fs} fs",
        "",
        f"{'constraint':<14} {'cell':<13} {'slack_fs':>9}",
    ]
    for row in report.slacks:
        lines.append(f"{row.constraint:<14} {row.cell:<13} {row.slack_fs:>9}")
    lines.append("")
    lines.append("arrival windows (fs after the interval write instant):")
    for win in report.windows:
        lines.append(f"  {win.node:<22} [{win.earliest_fs}, {win.latest_fs}]")
    status = "met" if report.all_met else f"VIOLATED ({report.worst().constraint})"
    lines.append("")
    lines.append(f"timing {status}")
    return "\n".join(lines) + "\n"


def max_frequency(cfg: SimConfig, step_hz: int = 10**9) -> int:
    """Largest frequency on a step_hz grid whose slacks are all non-negative.

    Scans downward from the configured search ceiling, so pathological cell
    sets whose constraints never bind resolve to the ceiling itself.
    """
    ceiling = (cfg.search_ceiling_hz // step_hz) * step_hz
    for freq in range(ceiling, 0, -step_hz):
        try:
            report = sta(cfg.with_frequency(freq))
        except InfeasibleFrequencyError:
            continue
        if report.all_met:
            return freq
    raise InfeasibleFrequencyError(
        f"no feasible frequency found at or below {ceiling} Hz"
    )


# --- empirical bias margins -------------------------------------------------

@dataclass(frozen=True)
class MarginReport:
    """Empirical bias window around nominal, in whole percent.

    lower_pct/upper_pct are the last consecutive 1% steps in each direction
    where every scenario still reads back correctly with a clean trace.
    Limiters name the first failure past the bound: a violation kind, or
    WRONG_READ when decoding broke silently; None means the scan hit its
    cap without failing.  Infeasible frequencies carry None margins.
    """

    frequency_hz: int
    lower_pct: int | None
    upper_pct: int | None
    lower_limiter: str | None
    upper_limiter: str | None


def _suite_failure(
    cfg: SimConfig,
    scenarios: Sequence[MemoryProgram],
    expected: Sequence[dict[tuple[int, int], int]],
) -> str | None:
    """First failure cause across the suite at this config, else None.

    Violations win over silent wrong reads and are ranked by (time, cell,
    kind) across all scenarios, so the verdict does not depend on scenario
    order.
    """
    violations = []
    wrong = False
    for program, want in zip(scenarios, expected):
        result = run_program(program, cfg)
        violations.extend(result.trace.violations)
        if result.reads != want:
            wrong = True
    if violations:
        first = min(violations, key=lambda v: (v.time_fs, v.cell, v.kind.value))
        return first.kind.value
    if wrong:
        return "WRONG_READ"
    return None


def bias_margin(
    cfg: SimConfig,
    scenarios: Sequence[MemoryProgram] | None = None,
    max_pct: int = 50,
) -> MarginReport:
    """Bracket the bias window by stepping away from nominal in 1% moves."""
    if scenarios is None:
        scenarios = default_margin_suite(cfg)
    if not scenarios:
        raise ValueError("bias_margin needs at least one scenario")
    expected = [oracle(p, cfg.num_addresses) for p in scenarios]

    nominal_failure = _suite_failure(cfg.with_bias(BiasPoint.nominal()), scenarios, expected)
    if nominal_failure is not None:
        return MarginReport(cfg.frequency_hz, 0, 0, nominal_failure, nominal_failure)

    bounds: list[tuple[int, str | None]] = []
    for sign in (-1, 1):
        bound, limiter = max_pct, None
        for pct in range(1, max_pct + 1):
            ratio = Fraction(100 + sign * pct, 100)
            failure = _suite_failure(cfg.with_bias(BiasPoint(ratio)), scenarios, expected)
            if failure is not None:
                bound, limiter = pct - 1, failure
                break
        bounds.append((bound, limiter))

    (lower_pct, lower_limiter), (upper_pct, upper_limiter) = bounds
    return MarginReport(cfg.frequency_hz, lower_pct, upper_pct, lower_limiter, upper_limiter)


def margin_sweep(
    cfg: SimConfig,
    frequencies_hz: Iterable[int],
    scenarios: Sequence[MemoryProgram] | None = None,
) -> tuple[MarginReport, ...]:
    """bias_margin at each frequency; infeasible points are marked, not fatal."""
    reports = []
    for freq in sorted(set(frequencies_hz)):
        candidate = cfg.with_frequency(freq)
        try:
            reports.append(bias_margin(candidate, scenarios))
        except InfeasibleFrequencyError:
            reports.append(MarginReport(freq, None, None, "INFEASIBLE", "INFEASIBLE"))
    return tuple(reports)


def margins_to_csv(reports: Sequence[MarginReport]) -> str:
    def cell(value: int | str | None) -> str:
        return "" if value is None else str(value)

    lines = ["frequency_hz,lower_pct,upper_pct,lower_limiter,upper_limiter"]
    for r in reports:
        lines.append(
            f"{r.frequency_hz},{cell(r.lower_pct)},{cell(r.upper_pct)},"
            f"{cell(r.lower_limiter)},{cell(r.upper_limiter)}"
        )
    return "\n".join(lines) + "\n"


def margins_to_text(reports: Sequence[MarginReport]) -> str:
    lines = [f"{'freq_GHz':>8} {'lower':>6} {'upper':>6}  limiters"]
    for r in reports:
        if r.lower_pct is None:
            lines.append(f"{r.frequency_hz / 1e9:>8g} {'--':>6} {'--':>6}  infeasible")
            continue
        lims = f"{r.lower_limiter or '-'} / {r.upper_limiter or '-'}"
        lines.append(f"{r.frequency_hz / 1e9:>8g} {'-' + str(r.lower_pct) + '%':>6} {'+' + str(r.upper_pct) + '%':>6}  {lims}")
    return "\n".join(lines) + "\n"
