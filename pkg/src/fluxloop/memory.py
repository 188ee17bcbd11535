"""The delay-line memory: controller netlist, addressing, and program runs.

The controller stitches five behavioral cells around one delayed loop
connection:

* ``write_dro``    — holds write_data until write_address releases it;
* ``recirc_dro2r`` — re-times recirculating data: ¬write_address forwards
  it back toward the loop, write_address discards it (overwrite);
* ``merger``       — joins freshly written and recirculating pulses;
* ``fanout``       — copies the merged stream to the loop input and to the
  readout clock;
* ``read_dro2r``   — holds read_address until the loop copy of that
  interval's bit clocks it out to read_data (¬read_address flushes it).

Addressing is temporally encoded and differential: each trip is a header
interval (write_data slot) followed by one interval per address, and in
every address interval exactly one of {write_address, ¬write_address} and
exactly one of {read_address, ¬read_address} fires.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

from .cells import CellParams, default_cell_params
from .core import (
    BiasPoint,
    ConfigError,
    InfeasibleFrequencyError,
    PulseEvent,
    SimConfig,
    interval_duration,
    round_half_up,
    trip_duration,
)
from .engine import Connection, Netlist, Trace, run_until, schedule

#: The externally driven lines.
INPUT_LINES = (
    "write_data",
    "write_address",
    "not_write_address",
    "read_address",
    "not_read_address",
)

#: The signals recorded in every trace (the memory's observable surface).
OBSERVED_LINES = INPUT_LINES + ("loop_data_in", "loop_data_out", "read_data")


@dataclass(frozen=True)
class TripOp:
    """One trip's worth of operations: at most one write, any set of reads."""

    write: tuple[int, int] | None = None  # (address, bit)
    reads: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.write is not None:
            addr, bit = self.write
            if addr < 0:
                raise ConfigError("write.addr", "address must be non-negative")
            if bit not in (0, 1):
                raise ConfigError("write.bit", "bit must be 0 or 1")
        if any(a < 0 for a in self.reads):
            raise ConfigError("reads", "addresses must be non-negative")
        if len(set(self.reads)) != len(self.reads):
            raise ConfigError("reads", "duplicate read address within a trip")


@dataclass(frozen=True)
class MemoryProgram:
    trips: tuple[TripOp, ...]

    def max_address(self) -> int:
        top = -1
        for trip in self.trips:
            if trip.write is not None:
                top = max(top, trip.write[0])
            for a in trip.reads:
                top = max(top, a)
        return top


@dataclass(frozen=True)
class MemoryResult:
    """Decoded reads plus the full trace of one program run."""

    reads: dict[tuple[int, int], int]  # (trip, address) -> observed bit
    trace: Trace
    passed: bool

    def reads_by_trip(self) -> list[list[tuple[int, int]]]:
        by_trip: dict[int, list[tuple[int, int]]] = {}
        for (trip, addr), bit in sorted(self.reads.items()):
            by_trip.setdefault(trip, []).append((addr, bit))
        if not by_trip:
            return []
        return [by_trip.get(t, []) for t in range(max(by_trip) + 1)]


def parse_program(text: str) -> MemoryProgram:
    """Parse a program document: {"trips": [{"write": {"addr", "bit"}|null, "reads": [...]}]}."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<program>", f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict) or "trips" not in doc:
        raise ConfigError("trips", "program document must contain a 'trips' list")
    raw_trips = doc["trips"]
    if not isinstance(raw_trips, list):
        raise ConfigError("trips", "expected a list")
    trips = []
    for i, raw in enumerate(raw_trips):
        if not isinstance(raw, dict):
            raise ConfigError(f"trips[{i}]", "expected an object")
        write = None
        if raw.get("write") is not None:
            w = raw["write"]
            if not isinstance(w, dict) or "addr" not in w or "bit" not in w:
                raise ConfigError(f"trips[{i}].write", "expected {'addr': ..., 'bit': ...}")
            write = (w["addr"], w["bit"])
        reads = raw.get("reads", [])
        if not isinstance(reads, list):
            raise ConfigError(f"trips[{i}].reads", "expected a list of addresses")
        trips.append(TripOp(write=write, reads=tuple(reads)))
    return MemoryProgram(trips=tuple(trips))


def serialize_program(program: MemoryProgram) -> str:
    doc = {
        "trips": [
            {
                "write": None if t.write is None else {"addr": t.write[0], "bit": t.write[1]},
                "reads": list(t.reads),
            }
            for t in program.trips
        ]
    }
    return json.dumps(doc, indent=2)


def _check_program(program: MemoryProgram, num_addresses: int) -> None:
    top = program.max_address()
    if top >= num_addresses:
        raise ConfigError(
            "program", f"address {top} out of range for num_addresses={num_addresses}"
        )


# --- timing helpers ---------------------------------------------------------

def phase_instants(cfg: SimConfig) -> tuple[int, int, int]:
    """(read, write, data) pulse offsets within an interval, in fs."""
    interval = interval_duration(cfg)
    return (
        round_half_up(cfg.phase_read * interval),
        round_half_up(cfg.phase_write * interval),
        round_half_up(cfg.phase_data * interval),
    )


def _source_path_delays(cells: dict[str, CellParams], bias: BiasPoint) -> tuple[int, int]:
    """Merged-path delay (to loop_data_in / read clock) from each source.

    Returns (write-sourced, recirculation-sourced) totals at the given bias.
    """
    merger = cells["merger"].delay(bias)
    fanout = cells["fanout"].delay(bias)
    return (
        cells["write_dro"].delay(bias) + merger + fanout,
        cells["recirc_dro2r"].delay(bias) + merger + fanout,
    )


def required_loop_delay(cfg: SimConfig) -> int:
    """Loop delay that re-aligns each bit with its own interval next trip.

    The recirculated copy must reach the re-timing cell a setup window plus
    a guard before the complement clock of the same interval one trip
    later, so the loop absorbs a full trip minus the controller's nominal
    re-timing budget.
    """
    cells = default_cell_params(cfg.cell_overrides)
    nominal = BiasPoint.nominal()
    _, recirc_path = _source_path_delays(cells, nominal)
    budget = recirc_path + cells["recirc_dro2r"].setup_fs + cfg.retiming_guard_fs
    trip = trip_duration(cfg)
    if budget >= trip:
        raise InfeasibleFrequencyError(
            f"controller re-timing budget {budget} fs does not fit in a "
            f"{trip} fs trip at {cfg.frequency_hz} Hz"
        )
    return trip - budget


def build_controller(cfg: SimConfig) -> Netlist:
    """Assemble the controller netlist plus the storage-loop connection."""
    if cfg.loop_delay_fs is not None and cfg.loop_delay_fs <= 0:
        raise ConfigError("loop_delay", "must be positive")
    loop_delay = cfg.loop_delay_fs if cfg.loop_delay_fs is not None else required_loop_delay(cfg)

    trip = trip_duration(cfg)
    offsets = tuple((t * trip, off) for t, off in enumerate(cfg.loop_jitter_fs))
    if offsets:
        offsets += ((len(cfg.loop_jitter_fs) * trip, 0),)

    cells = default_cell_params(cfg.cell_overrides)
    connections = (
        Connection("write_data", "write_dro.data"),
        Connection("write_address", "write_dro.clock"),
        Connection("write_address", "recirc_dro2r.clock1"),
        Connection("not_write_address", "recirc_dro2r.clock0"),
        Connection("loop_data_out", "recirc_dro2r.data"),
        Connection("write_dro.out", "write_dro_out"),
        Connection("write_dro_out", "merger.in0"),
        Connection("recirc_dro2r.out0", "recirc_out"),
        Connection("recirc_out", "merger.in1"),
        Connection("recirc_dro2r.out1", "recirc_discard"),
        Connection("merger.out", "merged"),
        Connection("merged", "fanout.in"),
        Connection("fanout.out_a", "loop_data_in"),
        Connection("fanout.out_b", "read_clock"),
        Connection("read_clock", "read_dro2r.clock0"),
        Connection("loop_data_in", "loop_data_out", delay_fs=loop_delay, offset_schedule=offsets, is_loop=True),
        Connection("read_address", "read_dro2r.data"),
        Connection("not_read_address", "read_dro2r.clock1"),
        Connection("read_dro2r.out0", "read_data"),
        Connection("read_dro2r.out1", "read_discard"),
    )
    return Netlist(
        cells=cells,
        connections=connections,
        external_inputs=frozenset(INPUT_LINES),
        observed=OBSERVED_LINES,
    )


def stimulus_for(program: MemoryProgram, cfg: SimConfig) -> list[PulseEvent]:
    """Temporally-encoded differential stimulus for a program.

    In every address interval exactly one of each complement pair fires;
    write_data appears in the header only for trips writing a 1.
    """
    _check_program(program, cfg.num_addresses)
    interval = interval_duration(cfg)
    trip = trip_duration(cfg)
    ph_read, ph_write, ph_data = phase_instants(cfg)
    header = cfg.header_intervals * interval

    pulses: list[PulseEvent] = []
    for t, op in enumerate(program.trips):
        trip_start = t * trip
        if op.write is not None and op.write[1] == 1:
            pulses.append(PulseEvent(trip_start + ph_data, "write_data"))
        reads = set(op.reads)
        for k in range(cfg.num_addresses):
            slot = trip_start + header + k * interval
            writing = op.write is not None and op.write[0] == k
            pulses.append(PulseEvent(slot + ph_write, "write_address" if writing else "not_write_address"))
            pulses.append(PulseEvent(slot + ph_read, "read_address" if k in reads else "not_read_address"))
    return sorted(pulses)


def read_window_offset(cfg: SimConfig, bias: BiasPoint | None = None) -> int:
    """Offset from an interval's write instant to its read_data release.

    Uses the same per-cell bias clamping and rounding as the engine, so the
    decode window starts exactly where the release lands.
    """
    bias = bias if bias is not None else cfg.bias
    cells = default_cell_params(cfg.cell_overrides)

    def at(name: str) -> int:
        params = cells[name]
        return params.delay(params.clamped_bias(bias))

    shared = at("merger") + at("fanout")
    return min(at("write_dro"), at("recirc_dro2r")) + shared + at("read_dro2r")


def run_program(program: MemoryProgram, cfg: SimConfig) -> MemoryResult:
    """Simulate a program and decode its reads from the read_data line.

    A read of address k in trip t reports 1 iff a read_data pulse lands in
    the one-interval window opening at that interval's release offset.
    """
    _check_program(program, cfg.num_addresses)
    netlist = build_controller(cfg)
    stimulus = stimulus_for(program, cfg)
    trip = trip_duration(cfg)
    t_end = (len(program.trips) + 2) * trip

    prepared = schedule(netlist, stimulus)
    trace = run_until(prepared, t_end, cfg.bias, cfg.max_events)

    interval = interval_duration(cfg)
    _, ph_write, _ = phase_instants(cfg)
    header = cfg.header_intervals * interval
    offset = read_window_offset(cfg)

    read_times = trace.pulses_on("read_data")
    reads: dict[tuple[int, int], int] = {}
    for t, op in enumerate(program.trips):
        for k in op.reads:
            w0 = t * trip + header + k * interval + ph_write + offset
            w1 = w0 + interval
            reads[(t, k)] = 1 if any(w0 <= rt < w1 for rt in read_times) else 0

    return MemoryResult(reads=reads, trace=trace, passed=not trace.failed)


def oracle(program: MemoryProgram, num_addresses: int) -> dict[tuple[int, int], int]:
    """Abstract-array reference semantics: writes apply before same-trip reads."""
    _check_program(program, num_addresses)
    bits = [0] * num_addresses
    expected: dict[tuple[int, int], int] = {}
    for t, op in enumerate(program.trips):
        if op.write is not None:
            addr, bit = op.write
            bits[addr] = bit
        for k in op.reads:
            expected[(t, k)] = bits[k]
    return expected


def pulse_spacing(velocity_mps: float, frequency_hz: float) -> float:
    """Physical distance between adjacent circulating bits (meters)."""
    if velocity_mps <= 0 or frequency_hz <= 0:
        raise ValueError("velocity and frequency must be positive")
    return velocity_mps / frequency_hz


# --- canned scenarios -------------------------------------------------------

def scenario_write_read(address: int = 1, trips: int = 3) -> MemoryProgram:
    """Write a 1, then read it back every trip (non-destructive readout)."""
    ops = [TripOp(write=(address, 1), reads=(address,))]
    ops += [TripOp(reads=(address,)) for _ in range(trips - 1)]
    return MemoryProgram(trips=tuple(ops))


def scenario_overwrite(address: int = 1) -> MemoryProgram:
    """Write a 1, overwrite it with 0 next trip, then confirm it is gone."""
    return MemoryProgram(
        trips=(
            TripOp(write=(address, 1), reads=(address,)),
            TripOp(write=(address, 0)),
            TripOp(reads=(address,)),
            TripOp(),
        )
    )


def scenario_address_sweep(num_addresses: int) -> MemoryProgram:
    """Write every address in turn, then read them all back in one trip."""
    ops = [TripOp(write=(a, 1), reads=(a,)) for a in range(num_addresses)]
    ops.append(TripOp(reads=tuple(range(num_addresses))))
    return MemoryProgram(trips=tuple(ops))


def default_margin_suite(cfg: SimConfig) -> tuple[MemoryProgram, ...]:
    address = min(1, cfg.num_addresses - 1)
    return (
        scenario_write_read(address=address),
        scenario_overwrite(address=address),
        scenario_address_sweep(cfg.num_addresses),
    )


# --- loop jitter ------------------------------------------------------------

@dataclass(frozen=True)
class JitterWindow:
    """Tolerated per-trip loop-delay error, and where excess is detectable.

    Within [lo_fs, hi_fs] the re-timing clock fully absorbs the error:
    loop_data_in times are unchanged.  In the adjacent detectable bands a
    SETUP or HOLD violation is guaranteed at the re-timing cell.  Beyond
    those bands the bit aliases into a neighboring interval slot, which no
    local timing check can see — inherent to any delay-line store.
    """

    lo_fs: int
    hi_fs: int
    detect_below: tuple[int, int]
    detect_above: tuple[int, int]


def jitter_tolerance(cfg: SimConfig) -> JitterWindow:
    """Compute the re-timing tolerance window at nominal bias.

    The recirculated bit arrives (setup + guard) before its re-timing
    clock, so positive jitter up to the guard keeps the setup check whole;
    negative jitter is bounded by the hold check against the previous
    interval's clock.
    """
    cells = default_cell_params(cfg.cell_overrides)
    interval = interval_duration(cfg)
    setup = cells["recirc_dro2r"].setup_fs
    hold = cells["recirc_dro2r"].hold_fs
    guard = cfg.retiming_guard_fs
    hi = guard
    lo = -(interval - setup - guard - hold)
    if lo > 0:
        raise InfeasibleFrequencyError(
            "no re-timing slack at this frequency: the interval is shorter "
            "than the cell's setup/hold budget plus guard"
        )
    return JitterWindow(
        lo_fs=lo,
        hi_fs=hi,
        detect_below=(lo - setup - hold + 1, lo - 1),
        detect_above=(hi + 1, hi + setup + hold - 1),
    )
