"""Pulse-level behavioral models of the controller's cells.

Each cell is a tiny state machine over timestamped SFQ pulses:

* DRO   — stores one flux quantum until a clock pulse releases it.
* DRO2R — a DRO with two clock/output port pairs sharing one storage loop.
* MERGER — forwards pulses from either input to its single output.
* FANOUT — ideal passive one-to-two splitter.

Propagation delays depend on the bias supply through a piecewise-linear,
strictly decreasing delay-vs-bias curve.  Setup/hold windows are checked on
every arrival; violations are recorded (they mark a run as failed) but never
halt processing, so margin sweeps can classify the failure kind.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Any, Iterable, Mapping

from .core import BiasPoint, FluxloopError, format_ratio, round_half_up

#: Default delay-vs-bias curve, as multipliers of the nominal delay.  The
#: shape is convex and strictly decreasing (cells slow down when starved of
#: bias); the knots double as the calibration fixture for the margin search.
DEFAULT_BIAS_CURVE: tuple[tuple[Fraction, Fraction], ...] = (
    (Fraction("0.76"), Fraction("1.39")),
    (Fraction("0.86"), Fraction("1.21")),
    (Fraction("1.00"), Fraction("1.00")),
    (Fraction("1.14"), Fraction("0.79")),
    (Fraction("1.24"), Fraction("0.59")),
)

DEFAULT_OPERATING_RANGE: tuple[Fraction, Fraction] = (Fraction("0.76"), Fraction("1.24"))

DEFAULT_MERGER_MIN_SEPARATION_FS = 2000


class CellKind(enum.Enum):
    DRO = "DRO"
    DRO2R = "DRO2R"
    MERGER = "MERGER"
    FANOUT = "FANOUT"


class ViolationKind(enum.Enum):
    SETUP = "SETUP"
    HOLD = "HOLD"
    ELECTRICAL = "ELECTRICAL"


class BiasRangeError(FluxloopError):
    """Bias ratio lies outside a cell's electrical operating range."""


@dataclass(frozen=True)
class TimingViolation:
    cell: str
    kind: ViolationKind
    time_fs: int
    detail: str


@dataclass(frozen=True)
class BiasDelayModel:
    """Piecewise-linear delay vs bias over an electrical operating range.

    ``points`` are (bias ratio, delay fs) knots, strictly increasing in
    ratio and strictly decreasing in delay.  The knots must span the
    operating range ``[range_lo, range_hi]``.
    """

    points: tuple[tuple[Fraction, int], ...]
    range_lo: Fraction
    range_hi: Fraction

    def __post_init__(self) -> None:
        if len(self.points) < 2:
            raise ValueError("delay model needs at least two knots")
        ratios = [r for r, _ in self.points]
        delays = [d for _, d in self.points]
        if any(b <= a for a, b in zip(ratios, ratios[1:])):
            raise ValueError("knot ratios must be strictly increasing")
        if any(b >= a for a, b in zip(delays, delays[1:])):
            raise ValueError("knot delays must be strictly decreasing")
        if not (self.range_lo < 1 < self.range_hi):
            raise ValueError("operating range must bracket the nominal ratio 1.0")
        if ratios[0] > self.range_lo or ratios[-1] < self.range_hi:
            raise ValueError("knots must span the operating range")

    @classmethod
    def scaled(
        cls,
        nominal_fs: int,
        curve: Iterable[tuple[Fraction, Fraction]] = DEFAULT_BIAS_CURVE,
        operating_range: tuple[Fraction, Fraction] = DEFAULT_OPERATING_RANGE,
    ) -> "BiasDelayModel":
        """Build an absolute model from a nominal delay and a multiplier curve."""
        points = tuple((ratio, round_half_up(nominal_fs * mult)) for ratio, mult in curve)
        return cls(points=points, range_lo=operating_range[0], range_hi=operating_range[1])

    def clamp(self, bias: BiasPoint) -> BiasPoint:
        """Pull an out-of-range bias to the nearest range edge."""
        if bias.ratio < self.range_lo:
            return BiasPoint(self.range_lo)
        if bias.ratio > self.range_hi:
            return BiasPoint(self.range_hi)
        return bias


@lru_cache(maxsize=None)
def _interpolate(model: BiasDelayModel, ratio: Fraction) -> int:
    points = model.points
    if ratio <= points[0][0]:
        return points[0][1]
    for (r0, d0), (r1, d1) in zip(points, points[1:]):
        if ratio <= r1:
            # exact rational interpolation; round once at the end
            exact = d0 + (d1 - d0) * (ratio - r0) / (r1 - r0)
            return round_half_up(exact)
    return points[-1][1]


def delay_at_bias(model: BiasDelayModel, bias: BiasPoint) -> int:
    """Propagation delay (fs) at a bias point; exact at knots.

    Raises ``BiasRangeError`` outside the electrical operating range.
    """
    if not (model.range_lo <= bias.ratio <= model.range_hi):
        raise BiasRangeError(
            f"bias {format_ratio(bias.ratio)} outside operating range "
            f"[{format_ratio(model.range_lo)}, {format_ratio(model.range_hi)}]"
        )
    return _interpolate(model, bias.ratio)


@dataclass(frozen=True)
class CellParams:
    """Static parameters of one cell instance."""

    kind: CellKind
    prop_delay_fs: int = 0
    setup_fs: int = 0
    hold_fs: int = 0
    delay_model: BiasDelayModel | None = None
    prop_delay_out1_fs: int | None = None
    delay_model_out1: BiasDelayModel | None = None
    min_separation_fs: int = 0

    def __post_init__(self) -> None:
        if self.setup_fs < 0 or self.hold_fs < 0:
            raise ValueError("setup and hold times must be non-negative")
        if self.prop_delay_fs < 0:
            raise ValueError("propagation delay must be non-negative")
        if self.delay_model is not None:
            nominal = _interpolate(self.delay_model, Fraction(1))
            if nominal != self.prop_delay_fs:
                raise ValueError(
                    f"nominal delay {self.prop_delay_fs} fs disagrees with the "
                    f"delay model at bias 1.0 ({nominal} fs)"
                )
        if self.delay_model_out1 is not None and self.prop_delay_out1_fs is not None:
            nominal1 = _interpolate(self.delay_model_out1, Fraction(1))
            if nominal1 != self.prop_delay_out1_fs:
                raise ValueError("out1 nominal delay disagrees with its delay model at bias 1.0")

    def delay(self, bias: BiasPoint) -> int:
        if self.delay_model is None:
            return self.prop_delay_fs
        return delay_at_bias(self.delay_model, bias)

    def delay_out1(self, bias: BiasPoint) -> int:
        if self.delay_model_out1 is None:
            return self.prop_delay_out1_fs if self.prop_delay_out1_fs is not None else self.delay(bias)
        return delay_at_bias(self.delay_model_out1, bias)

    def operating_range(self) -> tuple[Fraction, Fraction] | None:
        """Intersection of the electrical ranges of all delay models, if any."""
        ranges = [
            (model.range_lo, model.range_hi)
            for model in (self.delay_model, self.delay_model_out1)
            if model is not None
        ]
        if not ranges:
            return None
        return (max(lo for lo, _ in ranges), min(hi for _, hi in ranges))

    def clamped_bias(self, bias: BiasPoint) -> BiasPoint:
        """The bias this cell actually operates at (range edges saturate)."""
        rng = self.operating_range()
        if rng is None or rng[0] <= bias.ratio <= rng[1]:
            return bias
        return BiasPoint(rng[0] if bias.ratio < rng[0] else rng[1])


@dataclass
class CellState:
    """Mutable per-run state of one cell."""

    stored: bool = False
    last_data_fs: int | None = None
    last_clock_fs: int | None = None
    # merger bookkeeping: last arrival per input port
    last_in_fs: dict[str, int] = field(default_factory=dict)


def _check_setup(
    cell: str, params: CellParams, state: CellState, t: int, port: str
) -> TimingViolation | None:
    """Clock arriving within the setup window after a data pulse."""
    if state.last_data_fs is None:
        return None
    gap = t - state.last_data_fs
    if 0 <= gap < params.setup_fs:
        return TimingViolation(
            cell,
            ViolationKind.SETUP,
            t,
            f"{port} {gap} fs after data (setup {params.setup_fs} fs)",
        )
    return None


def _check_hold(cell: str, params: CellParams, state: CellState, t: int) -> TimingViolation | None:
    """Data arriving within the hold window after a clock pulse."""
    if state.last_clock_fs is None:
        return None
    gap = t - state.last_clock_fs
    if 0 <= gap < params.hold_fs:
        return TimingViolation(
            cell,
            ViolationKind.HOLD,
            t,
            f"data {gap} fs after clock (hold {params.hold_fs} fs)",
        )
    return None


def dro_step(
    cell: str,
    params: CellParams,
    state: CellState,
    port: str,
    t: int,
    bias: BiasPoint,
) -> tuple[list[tuple[str, int]], list[TimingViolation]]:
    """Advance a DRO by one input pulse on ``data`` or ``clock``.

    Data on an empty cell stores; data on a full cell is ignored (a storage
    loop holds at most one flux quantum).  Clock on a full cell releases the
    stored pulse on ``out`` after the propagation delay; clock on an empty
    cell is a no-op.
    """
    emitted: list[tuple[str, int]] = []
    violations: list[TimingViolation] = []
    if port == "data":
        v = _check_hold(cell, params, state, t)
        if v:
            violations.append(v)
        if not state.stored:
            state.stored = True
        state.last_data_fs = t
    elif port == "clock":
        v = _check_setup(cell, params, state, t, "clock")
        if v:
            violations.append(v)
        if state.stored:
            state.stored = False
            emitted.append(("out", t + params.delay(bias)))
        state.last_clock_fs = t
    else:
        raise ValueError(f"DRO has no port {port!r}")
    return emitted, violations


def dro2r_step(
    cell: str,
    params: CellParams,
    state: CellState,
    port: str,
    t: int,
    bias: BiasPoint,
) -> tuple[list[tuple[str, int]], list[TimingViolation]]:
    """Advance a DRO2R: like a DRO but with two clock/output port pairs.

    The storage loop is shared — whichever clock arrives first claims the
    stored pulse and pushes it to its own output.
    """
    emitted: list[tuple[str, int]] = []
    violations: list[TimingViolation] = []
    if port == "data":
        v = _check_hold(cell, params, state, t)
        if v:
            violations.append(v)
        if not state.stored:
            state.stored = True
        state.last_data_fs = t
    elif port in ("clock0", "clock1"):
        v = _check_setup(cell, params, state, t, port)
        if v:
            violations.append(v)
        if state.stored:
            state.stored = False
            if port == "clock0":
                emitted.append(("out0", t + params.delay(bias)))
            else:
                emitted.append(("out1", t + params.delay_out1(bias)))
        state.last_clock_fs = t
    else:
        raise ValueError(f"DRO2R has no port {port!r}")
    return emitted, violations


def merger_step(
    cell: str,
    params: CellParams,
    state: CellState,
    port: str,
    t: int,
    bias: BiasPoint,
) -> tuple[list[tuple[str, int]], list[TimingViolation]]:
    """Forward a pulse from either merger input to the output.

    Pulses on opposite inputs closer than the minimum separation record an
    ELECTRICAL collision (both pulses are still forwarded).
    """
    if port not in ("in0", "in1"):
        raise ValueError(f"merger has no port {port!r}")
    violations: list[TimingViolation] = []
    other = "in1" if port == "in0" else "in0"
    if other in state.last_in_fs and params.min_separation_fs > 0:
        gap = t - state.last_in_fs[other]
        if 0 <= gap < params.min_separation_fs:
            violations.append(
                TimingViolation(
                    cell,
                    ViolationKind.ELECTRICAL,
                    t,
                    f"inputs {gap} fs apart (min separation {params.min_separation_fs} fs)",
                )
            )
    state.last_in_fs[port] = t
    return [("out", t + params.delay(bias))], violations


def fanout_step(
    cell: str,
    params: CellParams,
    state: CellState,
    port: str,
    t: int,
    bias: BiasPoint,
) -> tuple[list[tuple[str, int]], list[TimingViolation]]:
    """Ideal passive fan-out: one input pulse, one pulse on each output."""
    if port != "in":
        raise ValueError(f"fanout has no port {port!r}")
    d = params.delay(bias)
    return [("out_a", t + d), ("out_b", t + d)], []


_STEPPERS = {
    CellKind.DRO: dro_step,
    CellKind.DRO2R: dro2r_step,
    CellKind.MERGER: merger_step,
    CellKind.FANOUT: fanout_step,
}


def step_cell(
    cell: str,
    params: CellParams,
    state: CellState,
    port: str,
    t: int,
    bias: BiasPoint,
) -> tuple[list[tuple[str, int]], list[TimingViolation]]:
    """Dispatch one input pulse to the right behavioral step function."""
    try:
        stepper = _STEPPERS[params.kind]
    except KeyError:
        raise ValueError(f"cell kind {params.kind} does not process pulses") from None
    return stepper(cell, params, state, port, t, bias)


# --- default cell set ------------------------------------------------------

def _model(nominal_fs: int, overrides: Mapping[str, Any]) -> BiasDelayModel:
    curve = overrides.get("bias_curve", DEFAULT_BIAS_CURVE)
    operating_range = overrides.get("operating_range", DEFAULT_OPERATING_RANGE)
    return BiasDelayModel.scaled(nominal_fs, curve, operating_range)


#: (kind, nominal prop fs, setup fs, hold fs) per controller cell.  The
#: read cell's setup + prop budget (10 ps) is the documented logic-path
#: figure that pins the design's maximum frequency at 100 GHz.
_DEFAULT_TIMINGS: dict[str, tuple[CellKind, int, int, int]] = {
    "write_dro": (CellKind.DRO, 3000, 2000, 1000),
    "recirc_dro2r": (CellKind.DRO2R, 3000, 3000, 1000),
    "merger": (CellKind.MERGER, 1500, 0, 0),
    "fanout": (CellKind.FANOUT, 500, 0, 0),
    "read_dro2r": (CellKind.DRO2R, 3000, 7000, 1000),
}


def default_cell_params(cell_overrides: Mapping[str, Mapping[str, Any]] | None = None) -> dict[str, CellParams]:
    """The calibrated default cell set, with per-instance overrides applied.

    Overrides use the normalized form produced by config parsing: durations
    in fs, ``bias_curve`` as (ratio, multiplier) knots, ``operating_range``
    as a ratio pair.
    """
    cell_overrides = cell_overrides or {}
    out: dict[str, CellParams] = {}
    for name, (kind, nominal, setup, hold) in _DEFAULT_TIMINGS.items():
        o = cell_overrides.get(name, {})
        prop = o.get("prop_delay", nominal)
        # a zero nominal cannot carry a strictly-decreasing curve; such
        # degenerate cells get a constant (bias-independent) delay instead
        params = dict(
            kind=kind,
            prop_delay_fs=prop,
            setup_fs=o.get("setup", setup),
            hold_fs=o.get("hold", hold),
            delay_model=_model(prop, o) if prop > 0 else None,
        )
        if kind == CellKind.DRO2R:
            prop1 = o.get("prop_delay_out1", o.get("prop_delay", nominal))
            params["prop_delay_out1_fs"] = prop1
            params["delay_model_out1"] = _model(prop1, o) if prop1 > 0 else None
        if kind == CellKind.MERGER:
            params["min_separation_fs"] = o.get("min_separation", DEFAULT_MERGER_MIN_SEPARATION_FS)
        out[name] = CellParams(**params)
    return out
