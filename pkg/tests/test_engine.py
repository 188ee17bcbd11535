"""Event kernel: netlist validation, scheduling, determinism, exports."""

from __future__ import annotations

import pytest

from fluxloop import FluxloopError
from fluxloop.cells import BiasDelayModel, CellKind, CellParams, TimingViolation, ViolationKind
from fluxloop.core import NOMINAL_BIAS, BiasPoint, PulseEvent
from fluxloop.engine import (
    Connection,
    DuplicatePulseError,
    Netlist,
    NetlistError,
    RunawayQueueError,
    Trace,
    UnknownLineError,
    query_pulses,
    run_until,
    schedule,
    trace_to_csv,
    trace_to_vcd,
)

DRO = CellParams(kind=CellKind.DRO, prop_delay_fs=5000, setup_fs=2000, hold_fs=1000)
MERGER = CellParams(kind=CellKind.MERGER, prop_delay_fs=1500, min_separation_fs=2000)
FANOUT = CellParams(kind=CellKind.FANOUT, prop_delay_fs=500)


def dro_netlist() -> Netlist:
    return Netlist(
        cells={"d": DRO},
        connections=(
            Connection("din", "d.data"),
            Connection("clk", "d.clock"),
            Connection("d.out", "out"),
        ),
        external_inputs=frozenset({"din", "clk"}),
        observed=("din", "clk", "out"),
    )


def run(net: Netlist, pulses: list[tuple[int, str]], t_end: int = 10**6, **kw) -> Trace:
    prepared = schedule(net, [PulseEvent(t, line) for t, line in pulses])
    return run_until(prepared, t_end, kw.pop("bias", NOMINAL_BIAS), **kw)


class TestNetlistValidation:
    def test_port_to_port_rejected(self):
        with pytest.raises(NetlistError, match="cell ports must connect through a line"):
            Netlist(
                cells={"d": DRO, "m": MERGER},
                connections=(Connection("d.out", "m.in0"),),
                external_inputs=frozenset(),
                observed=(),
            )

    def test_unknown_cell_and_port(self):
        with pytest.raises(NetlistError, match="references unknown cell"):
            Netlist(cells={}, connections=(Connection("x", "ghost.data"),), external_inputs=frozenset(), observed=())
        with pytest.raises(NetlistError, match="has no port 'clk'"):
            Netlist(cells={"d": DRO}, connections=(Connection("x", "d.clk"),), external_inputs=frozenset(), observed=())

    def test_direction_checks(self):
        with pytest.raises(NetlistError, match="is not an input port"):
            Netlist(cells={"d": DRO}, connections=(Connection("x", "d.out"),), external_inputs=frozenset(), observed=())
        with pytest.raises(NetlistError, match="is not an output port"):
            Netlist(cells={"d": DRO}, connections=(Connection("d.data", "x"),), external_inputs=frozenset(), observed=())

    def test_port_wiring_must_be_instant(self):
        with pytest.raises(NetlistError, match="must have zero delay"):
            Netlist(
                cells={"d": DRO},
                connections=(Connection("x", "d.data", delay_fs=10),),
                external_inputs=frozenset(),
                observed=(),
            )

    def test_single_driver_per_input(self):
        with pytest.raises(NetlistError, match="more than one driver"):
            Netlist(
                cells={"d": DRO},
                connections=(Connection("x", "d.data"), Connection("y", "d.data")),
                external_inputs=frozenset(),
                observed=(),
            )

    def test_tap_needs_positive_delay(self):
        with pytest.raises(NetlistError, match="needs a positive delay"):
            Netlist(cells={}, connections=(Connection("a", "b"),), external_inputs=frozenset(), observed=())

    def test_offset_schedule_must_be_sorted(self):
        with pytest.raises(NetlistError, match="sorted by start time"):
            Netlist(
                cells={},
                connections=(Connection("a", "b", delay_fs=10, offset_schedule=((100, 0), (50, 5))),),
                external_inputs=frozenset(),
                observed=(),
            )

    def test_cycle_detection(self):
        with pytest.raises(NetlistError, match="only the storage loop may cycle"):
            Netlist(
                cells={"d": DRO},
                connections=(
                    Connection("x", "d.data"),
                    Connection("d.out", "y"),
                    Connection("y", "x", delay_fs=100),
                ),
                external_inputs=frozenset(),
                observed=(),
            )

    def test_loop_marked_cycle_is_allowed(self):
        net = Netlist(
            cells={"d": DRO},
            connections=(
                Connection("x", "d.data"),
                Connection("d.out", "y"),
                Connection("y", "x", delay_fs=100, is_loop=True),
            ),
            external_inputs=frozenset({"x"}),
            observed=("x", "y"),
        )
        assert net.connections[-1].is_loop

    def test_dotted_cell_name_rejected(self):
        with pytest.raises(NetlistError, match="must not contain"):
            Netlist(cells={"a.b": DRO}, connections=(), external_inputs=frozenset(), observed=())


class TestSchedule:
    def test_rejects_unknown_line(self):
        with pytest.raises(UnknownLineError, match="not a declared external input"):
            schedule(dro_netlist(), [PulseEvent(0, "mystery")])

    def test_rejects_duplicates(self):
        with pytest.raises(DuplicatePulseError, match="duplicate pulse on 'din' at 5 fs"):
            schedule(dro_netlist(), [PulseEvent(5, "din"), PulseEvent(5, "din")])

    def test_sorts_stimulus(self):
        prepared = schedule(dro_netlist(), [PulseEvent(10, "din"), PulseEvent(2, "clk")])
        assert prepared.stimulus == (PulseEvent(2, "clk"), PulseEvent(10, "din"))


class TestRunUntil:
    def test_store_release_through_netlist(self):
        trace = run(dro_netlist(), [(0, "din"), (20000, "clk")])
        assert trace.pulses_on("out") == (25000,)
        assert not trace.failed

    def test_t_end_is_exclusive(self):
        net = dro_netlist()
        trace = run(net, [(0, "din"), (20000, "clk")], t_end=25000)
        assert trace.pulses_on("out") == ()
        trace = run(net, [(0, "din"), (20000, "clk")], t_end=25001)
        assert trace.pulses_on("out") == (25000,)

    def test_coincident_pulses_on_a_line_merge(self):
        # both merger inputs fire at t=0; the outputs land on one line at
        # the same instant and must merge into a single pulse
        net = Netlist(
            cells={"m": MERGER},
            connections=(
                Connection("a", "m.in0"),
                Connection("b", "m.in1"),
                Connection("m.out", "merged"),
            ),
            external_inputs=frozenset({"a", "b"}),
            observed=("merged",),
        )
        trace = run(net, [(0, "a"), (0, "b")])
        assert trace.pulses_on("merged") == (1500,)
        assert [v.kind for v in trace.violations] == [ViolationKind.ELECTRICAL]

    def test_clock_consumed_before_data_on_ties(self):
        # one line drives both ports: the release happens before the new
        # store, so a full cell emits exactly one pulse per shared tick
        net = Netlist(
            cells={"d": DRO},
            connections=(
                Connection("stim", "d.clock"),
                Connection("stim", "d.data"),
                Connection("d.out", "out"),
            ),
            external_inputs=frozenset({"stim"}),
            observed=("out",),
        )
        trace = run(net, [(1000, "stim"), (20000, "stim")])
        assert trace.pulses_on("out") == (25000,)

    def test_out_of_range_bias_flags_and_clamps(self):
        params = CellParams(
            kind=CellKind.DRO,
            prop_delay_fs=3000,
            setup_fs=2000,
            hold_fs=1000,
            delay_model=BiasDelayModel.scaled(3000),
        )
        net = Netlist(
            cells={"d": params},
            connections=(
                Connection("din", "d.data"),
                Connection("clk", "d.clock"),
                Connection("d.out", "out"),
            ),
            external_inputs=frozenset({"din", "clk"}),
            observed=("out",),
        )
        trace = run(net, [(0, "din"), (20000, "clk")], bias=BiasPoint.of(0.5))
        assert trace.failed
        v = trace.violations[0]
        assert (v.cell, v.kind, v.time_fs) == ("d", ViolationKind.ELECTRICAL, 0)
        assert v.detail == "bias 0.5 outside operating range [0.76, 1.24]"
        # delays evaluate at the clamped range edge (0.76 -> multiplier 1.39)
        assert trace.pulses_on("out") == (24170,)


class TestTaps:
    def test_plain_delay(self):
        net = Netlist(
            cells={},
            connections=(Connection("a", "b", delay_fs=100),),
            external_inputs=frozenset({"a"}),
            observed=("a", "b"),
        )
        trace = run(net, [(10, "a")])
        assert trace.pulses_on("b") == (110,)

    def test_offset_schedule_selects_by_entry_time(self):
        net = Netlist(
            cells={},
            connections=(
                Connection("a", "b", delay_fs=100, offset_schedule=((0, 0), (50, 25), (200, -30))),
            ),
            external_inputs=frozenset({"a"}),
            observed=("b",),
        )
        trace = run(net, [(10, "a"), (50, "a"), (199, "a"), (200, "a")])
        assert trace.pulses_on("b") == (110, 175, 270, 324)

    def test_pulse_before_first_schedule_entry_gets_no_offset(self):
        net = Netlist(
            cells={},
            connections=(Connection("a", "b", delay_fs=100, offset_schedule=((20, 5),)),),
            external_inputs=frozenset({"a"}),
            observed=("b",),
        )
        trace = run(net, [(10, "a")])
        assert trace.pulses_on("b") == (110,)

    def test_nonpositive_effective_delay_refused(self):
        net = Netlist(
            cells={},
            connections=(Connection("a", "b", delay_fs=100, offset_schedule=((0, -100),), is_loop=True),),
            external_inputs=frozenset({"a"}),
            observed=("b",),
        )
        with pytest.raises(FluxloopError, match="effective delay must stay positive"):
            run(net, [(10, "a")])

    def test_runaway_feedback_is_bounded(self):
        # a fanout whose outputs both re-enter its input at slightly
        # different delays doubles the pulse count every pass
        net = Netlist(
            cells={"f": FANOUT},
            connections=(
                Connection("x", "f.in"),
                Connection("f.out_a", "la"),
                Connection("f.out_b", "lb"),
                Connection("la", "x", delay_fs=100, is_loop=True),
                Connection("lb", "x", delay_fs=101, is_loop=True),
            ),
            external_inputs=frozenset({"x"}),
            observed=("x",),
        )
        with pytest.raises(RunawayQueueError, match="runaway feedback"):
            run(net, [(0, "x")], max_events=1000)


class TestTraceQueries:
    def test_query_pulses_window_is_half_open(self):
        trace = run(dro_netlist(), [(0, "din"), (20000, "clk"), (30000, "din"), (50000, "clk")])
        assert trace.pulses_on("out") == (25000, 55000)
        assert query_pulses(trace, "out", 25000, 55000) == (25000,)
        assert query_pulses(trace, "out", 0, 25000) == ()
        with pytest.raises(ValueError, match="t0 < t1"):
            query_pulses(trace, "out", 10, 10)

    def test_unobserved_line_rejected(self):
        trace = run(dro_netlist(), [(0, "din")])
        with pytest.raises(UnknownLineError, match="not observed"):
            trace.pulses_on("d.out")

    def test_reruns_are_identical(self):
        pulses = [(0, "din"), (20000, "clk"), (30000, "din"), (50000, "clk")]
        assert run(dro_netlist(), pulses) == run(dro_netlist(), pulses)


class TestExports:
    TRACE = Trace(
        events=(PulseEvent(0, "a"), PulseEvent(1500, "b")),
        violations=(
            TimingViolation("m", ViolationKind.ELECTRICAL, 1500, "inputs 1000 fs apart (min separation 2000 fs)"),
            TimingViolation("d", ViolationKind.SETUP, 2000, 'needs "quoting", badly'),
        ),
        observed=("a", "b"),
        t_end_fs=10000,
        bias=NOMINAL_BIAS,
    )

    def test_trace_to_csv(self):
        assert trace_to_csv(self.TRACE) == (
            "time_fs,line,kind,detail\n"
            "0,a,pulse,\n"
            "1500,b,pulse,\n"
            "1500,m,violation,ELECTRICAL: inputs 1000 fs apart (min separation 2000 fs)\n"
            '2000,d,violation,"SETUP: needs ""quoting"", badly"\n'
        )

    def test_trace_to_vcd(self):
        trace = Trace(
            events=(PulseEvent(0, "a"), PulseEvent(1500, "b"), PulseEvent(2000, "a")),
            violations=(),
            observed=("a", "b"),
            t_end_fs=10000,
            bias=NOMINAL_BIAS,
        )
        assert trace_to_vcd(trace) == (
            "$timescale 1fs $end\n"
            "$scope module fluxloop $end\n"
            "$var wire 1 ! a $end\n"
            '$var wire 1 " b $end\n'
            "$upscope $end\n"
            "$enddefinitions $end\n"
            "#0\n"
            "1!\n"
            '0"\n'
            "#1500\n"
            '1"\n'
            "#2000\n"
            "0!\n"
        )

    def test_vcd_line_budget(self):
        trace = Trace(
            events=(),
            violations=(),
            observed=tuple(f"l{i}" for i in range(95)),
            t_end_fs=0,
            bias=NOMINAL_BIAS,
        )
        with pytest.raises(FluxloopError, match="too many observed lines"):
            trace_to_vcd(trace)
