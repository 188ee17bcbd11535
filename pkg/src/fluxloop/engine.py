"""Deterministic discrete-event kernel.

A netlist joins cell instances through named signal lines.  Pulses are
events on lines; a cell consumes the lines wired to its input ports and
emits onto the lines wired to its outputs.  Two connection shapes exist:

* line -> cell port  — zero-delay wiring (the cell steps synchronously
  when the line pulses);
* line -> line       — a delayed tap; the storage loop is the one delayed,
  cyclic connection in the controller.  A tap may carry a piecewise
  schedule of extra delay offsets (per-trip loop jitter).

Events at equal timestamps are ordered by line name, then insertion order,
so reruns of an identical (netlist, stimulus, bias) triple produce
bit-identical traces.
"""

from __future__ import annotations

import heapq
from bisect import bisect_right
from dataclasses import dataclass

from .core import BiasPoint, FluxloopError, PulseEvent, format_ratio
from .cells import (
    CellKind,
    CellParams,
    CellState,
    TimingViolation,
    ViolationKind,
    step_cell,
)

_INPUT_PORTS = {
    CellKind.DRO: ("data", "clock"),
    CellKind.DRO2R: ("data", "clock0", "clock1"),
    CellKind.MERGER: ("in0", "in1"),
    CellKind.FANOUT: ("in",),
}

_OUTPUT_PORTS = {
    CellKind.DRO: ("out",),
    CellKind.DRO2R: ("out0", "out1"),
    CellKind.MERGER: ("out",),
    CellKind.FANOUT: ("out_a", "out_b"),
}


class NetlistError(FluxloopError):
    """The netlist is structurally invalid."""


class UnknownLineError(FluxloopError):
    pass


class DuplicatePulseError(FluxloopError):
    pass


class RunawayQueueError(FluxloopError):
    """Event queue grew past its bound — runaway feedback."""


@dataclass(frozen=True)
class Connection:
    """One wire: ``src`` -> ``dst``.

    ``src`` is a line name or ``cell.port``; same for ``dst``.  Only
    line -> line taps may carry a delay; ``offset_schedule`` is a sorted
    tuple of (start_fs, extra_delay_fs) entries — a pulse entering at time
    t picks up the offset of the last entry whose start is <= t.
    """

    src: str
    dst: str
    delay_fs: int = 0
    offset_schedule: tuple[tuple[int, int], ...] = ()
    is_loop: bool = False


@dataclass(frozen=True)
class Netlist:
    cells: dict[str, CellParams]
    connections: tuple[Connection, ...]
    external_inputs: frozenset[str]
    observed: tuple[str, ...]

    def __post_init__(self) -> None:
        _validate(self)


def _is_port(endpoint: str) -> bool:
    return "." in endpoint


def _split_port(endpoint: str) -> tuple[str, str]:
    cell, _, port = endpoint.partition(".")
    return cell, port


def _validate(net: Netlist) -> None:
    for name in net.cells:
        if "." in name:
            raise NetlistError(f"cell name {name!r} must not contain '.'")

    input_drivers: dict[tuple[str, str], str] = {}
    for conn in net.connections:
        for endpoint in (conn.src, conn.dst):
            if _is_port(endpoint):
                cell, port = _split_port(endpoint)
                if cell not in net.cells:
                    raise NetlistError(f"connection endpoint {endpoint!r} references unknown cell")
                kind = net.cells[cell].kind
                valid = _INPUT_PORTS.get(kind, ()) + _OUTPUT_PORTS.get(kind, ())
                if port not in valid:
                    raise NetlistError(f"cell {cell!r} ({kind.value}) has no port {port!r}")
        if _is_port(conn.src) and _is_port(conn.dst):
            raise NetlistError(f"{conn.src} -> {conn.dst}: cell ports must connect through a line")
        if _is_port(conn.dst):
            cell, port = _split_port(conn.dst)
            if port not in _INPUT_PORTS[net.cells[cell].kind]:
                raise NetlistError(f"{conn.dst} is not an input port")
            if conn.delay_fs != 0 or conn.offset_schedule:
                raise NetlistError(f"{conn.src} -> {conn.dst}: line-to-port wiring must have zero delay")
            if (cell, port) in input_drivers:
                raise NetlistError(f"input port {conn.dst} has more than one driver")
            input_drivers[(cell, port)] = conn.src
        if _is_port(conn.src):
            cell, port = _split_port(conn.src)
            if port not in _OUTPUT_PORTS[net.cells[cell].kind]:
                raise NetlistError(f"{conn.src} is not an output port")
        if not _is_port(conn.src) and not _is_port(conn.dst):
            if conn.delay_fs <= 0 and not conn.is_loop:
                raise NetlistError(f"line tap {conn.src} -> {conn.dst} needs a positive delay")
        starts = [s for s, _ in conn.offset_schedule]
        if starts != sorted(starts):
            raise NetlistError(f"{conn.src} -> {conn.dst}: offset schedule must be sorted by start time")

    # the only permitted cycle is through connections marked as the loop
    adjacency: dict[str, set[str]] = {}
    for conn in net.connections:
        if conn.is_loop:
            continue
        src = _split_port(conn.src)[0] if _is_port(conn.src) else conn.src
        dst = _split_port(conn.dst)[0] if _is_port(conn.dst) else conn.dst
        adjacency.setdefault(src, set()).add(dst)
    state: dict[str, int] = {}  # 1 = on stack, 2 = done

    def visit(node: str) -> None:
        state[node] = 1
        for nxt in sorted(adjacency.get(node, ())):
            if state.get(nxt) == 1:
                raise NetlistError(f"combinational cycle through {nxt!r}; only the storage loop may cycle")
            if state.get(nxt) is None:
                visit(nxt)
        state[node] = 2

    for node in sorted(adjacency):
        if state.get(node) is None:
            visit(node)


@dataclass(frozen=True)
class Trace:
    """Everything one run produced: pulses on observed lines + violations."""

    events: tuple[PulseEvent, ...]
    violations: tuple[TimingViolation, ...]
    observed: tuple[str, ...]
    t_end_fs: int
    bias: BiasPoint

    @property
    def failed(self) -> bool:
        return bool(self.violations)

    def pulses_on(self, line: str) -> tuple[int, ...]:
        if line not in self.observed:
            raise UnknownLineError(f"line {line!r} is not observed by this trace")
        return tuple(e.time_fs for e in self.events if e.line == line)


@dataclass
class PreparedRun:
    netlist: Netlist
    stimulus: tuple[PulseEvent, ...] = ()


def schedule(netlist: Netlist, stimulus: list[PulseEvent]) -> PreparedRun:
    """Load stimulus, rejecting pulses on undeclared lines and duplicates."""
    seen: set[tuple[int, str]] = set()
    for pulse in stimulus:
        if pulse.line not in netlist.external_inputs:
            raise UnknownLineError(f"line {pulse.line!r} is not a declared external input")
        key = (pulse.time_fs, pulse.line)
        if key in seen:
            raise DuplicatePulseError(f"duplicate pulse on {pulse.line!r} at {pulse.time_fs} fs")
        seen.add(key)
    return PreparedRun(netlist, tuple(sorted(stimulus)))


def _tap_offset(schedule_: tuple[tuple[int, int], ...], t: int) -> int:
    if not schedule_:
        return 0
    idx = bisect_right(schedule_, (t, float("inf"))) - 1
    if idx < 0:
        return 0
    return schedule_[idx][1]


def run_until(prepared: PreparedRun, t_end_fs: int, bias: BiasPoint, max_events: int = 10_000_000) -> Trace:
    """Execute all events in [0, t_end_fs) and collect the trace.

    A bias outside a cell's electrical operating range records one
    ELECTRICAL violation for that cell at t=0 and evaluates its delays at
    the nearest range edge, so the trace remains collectible while the run
    is marked failed.
    """
    if t_end_fs < 0:
        raise ValueError("t_end must be non-negative")
    net = prepared.netlist

    consumers: dict[str, list[tuple[str, str]]] = {}
    taps: dict[str, list[Connection]] = {}
    out_lines: dict[tuple[str, str], str] = {}
    for conn in net.connections:
        if _is_port(conn.dst):
            consumers.setdefault(conn.src, []).append(_split_port(conn.dst))
        elif _is_port(conn.src):
            out_lines[_split_port(conn.src)] = conn.dst
        else:
            taps.setdefault(conn.src, []).append(conn)
    for key in consumers:
        consumers[key].sort()

    states = {name: CellState() for name in net.cells}
    violations: list[TimingViolation] = []
    cell_bias: dict[str, BiasPoint] = {}
    for name in sorted(net.cells):
        rng = net.cells[name].operating_range()
        if rng is None or rng[0] <= bias.ratio <= rng[1]:
            cell_bias[name] = bias
        else:
            violations.append(
                TimingViolation(
                    name,
                    ViolationKind.ELECTRICAL,
                    0,
                    f"bias {format_ratio(bias.ratio)} outside operating range "
                    f"[{format_ratio(rng[0])}, {format_ratio(rng[1])}]",
                )
            )
            cell_bias[name] = net.cells[name].clamped_bias(bias)

    heap: list[tuple[int, str, int]] = []
    seq = 0
    queued: set[tuple[int, str]] = set()

    def push(t: int, line: str) -> None:
        nonlocal seq
        key = (t, line)
        if key in queued:
            # two coincident pulses on one line merge into a single pulse
            # (the collision itself is reported by the emitting cell)
            return
        queued.add(key)
        heapq.heappush(heap, (t, line, seq))
        seq += 1
        if len(heap) > max_events:
            raise RunawayQueueError(f"event queue exceeded {max_events} events — runaway feedback")

    for pulse in prepared.stimulus:
        push(pulse.time_fs, pulse.line)

    observed_set = set(net.observed)
    recorded: list[PulseEvent] = []

    while heap:
        t, line, _ = heapq.heappop(heap)
        if t >= t_end_fs:
            break
        if line in observed_set:
            recorded.append(PulseEvent(t, line))
        for cell, port in consumers.get(line, ()):
            emissions, cell_violations = step_cell(
                cell, net.cells[cell], states[cell], port, t, cell_bias[cell]
            )
            violations.extend(cell_violations)
            for out_port, t_out in emissions:
                target = out_lines.get((cell, out_port))
                if target is not None:
                    push(t_out, target)
        for tap in taps.get(line, ()):
            arrival = t + tap.delay_fs + _tap_offset(tap.offset_schedule, t)
            if arrival <= t:
                raise FluxloopError(
                    f"tap {tap.src} -> {tap.dst}: effective delay must stay positive "
                    f"(got {arrival - t} fs at t={t})"
                )
            push(arrival, tap.dst)

    return Trace(
        events=tuple(recorded),
        violations=tuple(violations),
        observed=net.observed,
        t_end_fs=t_end_fs,
        bias=bias,
    )


def query_pulses(trace: Trace, line: str, t0: int, t1: int) -> tuple[int, ...]:
    """Pulse timestamps on ``line`` within the half-open window [t0, t1)."""
    if t0 >= t1:
        raise ValueError("query window must satisfy t0 < t1")
    return tuple(t for t in trace.pulses_on(line) if t0 <= t < t1)


# --- export ----------------------------------------------------------------

def trace_to_csv(trace: Trace) -> str:
    """Render a trace as CSV rows (time_fs, line, kind, detail).

    Violation rows carry the cell name in the line column and the violation
    kind as the detail prefix.  Rows are sorted by time, pulses before
    violations at equal times.
    """
    rows: list[tuple[int, int, str, str, str]] = []
    for event in trace.events:
        rows.append((event.time_fs, 0, event.line, "pulse", ""))
    for v in trace.violations:
        rows.append((v.time_fs, 1, v.cell, "violation", f"{v.kind.value}: {v.detail}"))
    rows.sort()
    lines = ["time_fs,line,kind,detail"]
    for time_fs, _, name, kind, detail in rows:
        if "," in detail or '"' in detail:
            detail = '"' + detail.replace('"', '""') + '"'
        lines.append(f"{time_fs},{name},{kind},{detail}")
    return "\n".join(lines) + "\n"


def trace_to_vcd(trace: Trace) -> str:
    """Render a trace as a VCD document (1 fs timescale, toggle per pulse)."""
    ids = {}
    for i, line in enumerate(trace.observed):
        if i >= 94:
            raise FluxloopError("too many observed lines for single-character VCD ids")
        ids[line] = chr(33 + i)
    out = [
        "$timescale 1fs $end",
        "$scope module fluxloop $end",
    ]
    for line in trace.observed:
        out.append(f"$var wire 1 {ids[line]} {line} $end")
    out.append("$upscope $end")
    out.append("$enddefinitions $end")

    by_time: dict[int, list[str]] = {}
    for event in trace.events:
        by_time.setdefault(event.time_fs, []).append(event.line)

    level = {line: 0 for line in trace.observed}
    out.append("#0")
    for line in trace.observed:
        if line in by_time.get(0, ()):
            level[line] = 1
        out.append(f"{level[line]}{ids[line]}")
    for t in sorted(by_time):
        if t == 0:
            continue
        out.append(f"#{t}")
        for line in sorted(by_time[t]):
            level[line] ^= 1
            out.append(f"{level[line]}{ids[line]}")
    return "\n".join(out) + "\n"
