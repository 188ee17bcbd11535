"""Foundational types and configuration handling.

Time is kept as plain integers in femtoseconds throughout the package:
every schedule computation is exact integer arithmetic, so runs are
deterministic and platform independent.  Fractions are used wherever a
ratio (bias point, interval phase) enters a computation, with a single
documented rounding rule (round half up) applied at the moment a value
becomes a timestamp.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Mapping

FS_PER_SECOND = 10**15

#: Cell instance names of the controller, fixed by its topology.
CELL_NAMES = ("write_dro", "recirc_dro2r", "merger", "fanout", "read_dro2r")

#: Per-cell override keys accepted in a configuration document.
CELL_OVERRIDE_KEYS = (
    "prop_delay",
    "prop_delay_out1",
    "setup",
    "hold",
    "min_separation",
    "bias_curve",
    "operating_range",
)

_DURATION_UNITS = {"fs": 1, "ps": 10**3, "ns": 10**6}
_FREQUENCY_UNITS = {
    "hz": 1,
    "khz": 10**3,
    "mhz": 10**6,
    "ghz": 10**9,
    "thz": 10**12,
}

_UNIT_RE = re.compile(r"^\s*([+-]?[0-9][0-9_]*\.?[0-9]*(?:[eE][+-]?[0-9]+)?)\s*([a-zA-Z]*)\s*$")


class FluxloopError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(FluxloopError):
    """A configuration document is malformed or semantically invalid.

    ``field`` names the offending entry so callers (and the CLI) can point
    at it without parsing the message.
    """

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class InfeasibleFrequencyError(FluxloopError):
    """The controller cannot close timing at the requested frequency."""


def round_half_up(value: Fraction | int) -> int:
    """Round an exact rational to the nearest integer, ties toward +inf.

    All timestamp rounding in the package funnels through here so that the
    tie-break is uniform and float representation error can never flip a
    boundary case.
    """
    if isinstance(value, int):
        return value
    num, den = value.numerator, value.denominator
    floor, rem = divmod(num, den)
    # divmod on Fractions keeps 0 <= rem < den for positive den
    if 2 * rem >= den:
        return floor + 1
    return floor


def exact_ratio(value: float | int | str | Fraction) -> Fraction:
    """Convert a user-supplied ratio to an exact Fraction.

    Floats go through their shortest decimal repr, so a config value of
    0.87 becomes exactly 87/100 rather than the nearest binary float.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(str(value).strip())


def _ratio_to_json(value: Fraction) -> float | str:
    # Prefer a plain number when it survives the float round-trip exactly;
    # fall back to a "num/den" string for ratios like 1/3.
    as_float = float(value)
    if Fraction(repr(as_float)) == value:
        return as_float
    return f"{value.numerator}/{value.denominator}"


def format_ratio(value: Fraction) -> str:
    """Human-oriented decimal rendering of a ratio (deterministic)."""
    as_float = float(value)
    if Fraction(repr(as_float)) == value:
        return repr(as_float)
    return f"{value.numerator}/{value.denominator}"


def parse_duration(value: Any, field_name: str = "duration", *, allow_negative: bool = False) -> int:
    """Parse a duration into integer femtoseconds.

    Plain numbers are taken as femtoseconds; strings may carry an ``fs``,
    ``ps`` or ``ns`` suffix.  Fractional femtoseconds round half up.
    """
    if isinstance(value, bool):
        raise ConfigError(field_name, "expected a duration, got a boolean")
    if isinstance(value, (int, float)):
        fs = round_half_up(exact_ratio(value))
    elif isinstance(value, str):
        match = _UNIT_RE.match(value)
        if not match:
            raise ConfigError(field_name, f"cannot parse duration {value!r}")
        magnitude = Fraction(match.group(1).replace("_", ""))
        unit = match.group(2).lower() or "fs"
        if unit not in _DURATION_UNITS:
            raise ConfigError(field_name, f"unknown duration unit {match.group(2)!r} (use fs, ps or ns)")
        fs = round_half_up(magnitude * _DURATION_UNITS[unit])
    else:
        raise ConfigError(field_name, f"expected a duration, got {type(value).__name__}")
    if fs < 0 and not allow_negative:
        raise ConfigError(field_name, "duration must be non-negative")
    return fs


def parse_frequency(value: Any, field_name: str = "frequency") -> int:
    """Parse a frequency into integer hertz (suffixes Hz..THz accepted)."""
    if isinstance(value, bool):
        raise ConfigError(field_name, "expected a frequency, got a boolean")
    if isinstance(value, (int, float)):
        hz = round_half_up(exact_ratio(value))
    elif isinstance(value, str):
        match = _UNIT_RE.match(value)
        if not match:
            raise ConfigError(field_name, f"cannot parse frequency {value!r}")
        magnitude = Fraction(match.group(1).replace("_", ""))
        unit = match.group(2).lower() or "hz"
        if unit not in _FREQUENCY_UNITS:
            raise ConfigError(field_name, f"unknown frequency unit {match.group(2)!r}")
        hz = round_half_up(magnitude * _FREQUENCY_UNITS[unit])
    else:
        raise ConfigError(field_name, f"expected a frequency, got {type(value).__name__}")
    if hz <= 0:
        raise ConfigError(field_name, "frequency must be positive")
    return hz


@dataclass(frozen=True, order=True)
class PulseEvent:
    """A single SFQ pulse: a bare timestamp on a named signal line."""

    time_fs: int
    line: str

    def __post_init__(self) -> None:
        if self.time_fs < 0:
            raise ValueError(f"pulse time must be non-negative, got {self.time_fs}")


@dataclass(frozen=True)
class BiasPoint:
    """A bias supply level as a fraction of nominal (1.0 = nominal)."""

    ratio: Fraction

    def __post_init__(self) -> None:
        if self.ratio <= 0:
            raise ValueError("bias ratio must be positive")

    @classmethod
    def of(cls, value: float | int | str | Fraction) -> "BiasPoint":
        return cls(exact_ratio(value))

    @classmethod
    def nominal(cls) -> "BiasPoint":
        return cls(Fraction(1))

    def __str__(self) -> str:
        return format_ratio(self.ratio)


NOMINAL_BIAS = BiasPoint(Fraction(1))


@dataclass(frozen=True)
class SimConfig:
    """Validated run configuration shared by every module.

    ``cell_overrides`` holds normalized per-cell parameter overrides
    (durations already in fs, curve knots as exact ratios); the cell layer
    merges them over its defaults.
    """

    frequency_hz: int
    num_addresses: int
    bias: BiasPoint = NOMINAL_BIAS
    header_intervals: int = 1
    phase_read: Fraction = Fraction(1, 5)
    phase_write: Fraction = Fraction(1, 2)
    phase_data: Fraction = Fraction(1, 2)
    loop_delay_fs: int | None = None
    retiming_guard_fs: int = 2000
    loop_jitter_fs: tuple[int, ...] = ()
    cell_overrides: Mapping[str, Mapping[str, Any]] = field(default_factory=dict)
    max_events: int = 10_000_000
    search_ceiling_hz: int = 10**12

    def __post_init__(self) -> None:
        if self.frequency_hz <= 0:
            raise ConfigError("frequency", "must be positive")
        if self.num_addresses < 1:
            raise ConfigError("num_addresses", "must be at least 1")
        if self.header_intervals < 1:
            raise ConfigError("header_intervals", "must be at least 1")
        if not (0 <= self.phase_read < self.phase_write < 1):
            raise ConfigError("phase_read/phase_write", "need 0 <= phase_read < phase_write < 1")
        if not (0 <= self.phase_data < 1):
            raise ConfigError("phase_data", "must lie in [0, 1)")
        if self.loop_delay_fs is not None and self.loop_delay_fs <= 0:
            raise ConfigError("loop_delay", "must be positive when given")
        if self.retiming_guard_fs < 0:
            raise ConfigError("retiming_guard", "must be non-negative")
        if self.max_events < 1:
            raise ConfigError("max_events", "must be positive")
        if self.search_ceiling_hz <= 0:
            raise ConfigError("search_ceiling", "must be positive")
        for name in self.cell_overrides:
            if name not in CELL_NAMES:
                raise ConfigError(f"cells.{name}", f"unknown cell (valid: {', '.join(CELL_NAMES)})")

    def with_bias(self, bias: BiasPoint) -> "SimConfig":
        return replace_config(self, bias=bias)

    def with_frequency(self, frequency_hz: int) -> "SimConfig":
        return replace_config(self, frequency_hz=frequency_hz)


def replace_config(cfg: SimConfig, **changes: Any) -> SimConfig:
    """dataclasses.replace with our validation re-run (frozen class)."""
    from dataclasses import replace

    return replace(cfg, **changes)


def interval_duration(cfg: SimConfig) -> int:
    """Duration of one address interval in fs (1/frequency, round half up)."""
    return round_half_up(Fraction(FS_PER_SECOND, cfg.frequency_hz))


def trip_duration(cfg: SimConfig) -> int:
    """One full loop rotation: header interval(s) plus one per address."""
    return (cfg.num_addresses + cfg.header_intervals) * interval_duration(cfg)


def _parse_curve(raw: Any, field_name: str) -> tuple[tuple[Fraction, Fraction], ...]:
    if not isinstance(raw, list) or not raw:
        raise ConfigError(field_name, "expected a non-empty list of [ratio, multiplier] pairs")
    knots = []
    for i, pair in enumerate(raw):
        if not isinstance(pair, list) or len(pair) != 2:
            raise ConfigError(f"{field_name}[{i}]", "expected a [ratio, multiplier] pair")
        knots.append((exact_ratio(pair[0]), exact_ratio(pair[1])))
    return tuple(knots)


def _parse_cell_overrides(raw: Any) -> dict[str, dict[str, Any]]:
    if not isinstance(raw, dict):
        raise ConfigError("cells", "expected an object of per-cell overrides")
    out: dict[str, dict[str, Any]] = {}
    for name, overrides in raw.items():
        if not isinstance(overrides, dict):
            raise ConfigError(f"cells.{name}", "expected an object of parameter overrides")
        entry: dict[str, Any] = {}
        for key, value in overrides.items():
            qualified = f"cells.{name}.{key}"
            if key not in CELL_OVERRIDE_KEYS:
                raise ConfigError(qualified, f"unknown parameter (valid: {', '.join(CELL_OVERRIDE_KEYS)})")
            if key in ("prop_delay", "prop_delay_out1", "setup", "hold", "min_separation"):
                entry[key] = parse_duration(value, qualified)
            elif key == "bias_curve":
                entry[key] = _parse_curve(value, qualified)
            else:  # operating_range
                if not isinstance(value, list) or len(value) != 2:
                    raise ConfigError(qualified, "expected [low, high] bias ratios")
                entry[key] = (exact_ratio(value[0]), exact_ratio(value[1]))
        out[name] = entry
    return out


def parse_config(text: str) -> SimConfig:
    """Parse and validate a JSON configuration document.

    Missing optional fields take the documented defaults; every error
    names the offending field.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<document>", f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("<document>", "top level must be an object")

    known = {
        "frequency",
        "num_addresses",
        "bias",
        "header_intervals",
        "phase_read",
        "phase_write",
        "phase_data",
        "loop_delay",
        "retiming_guard",
        "loop_jitter",
        "cells",
        "max_events",
        "search_ceiling",
    }
    for key in doc:
        if key not in known:
            raise ConfigError(key, "unknown configuration field")

    if "frequency" not in doc:
        raise ConfigError("frequency", "required field is missing")
    if "num_addresses" not in doc:
        raise ConfigError("num_addresses", "required field is missing")

    frequency_hz = parse_frequency(doc["frequency"], "frequency")

    num_addresses = doc["num_addresses"]
    if not isinstance(num_addresses, int) or isinstance(num_addresses, bool):
        raise ConfigError("num_addresses", "expected an integer")

    kwargs: dict[str, Any] = {
        "frequency_hz": frequency_hz,
        "num_addresses": num_addresses,
    }

    if "bias" in doc:
        try:
            kwargs["bias"] = BiasPoint(exact_ratio(doc["bias"]))
        except (ValueError, ZeroDivisionError):
            raise ConfigError("bias", f"invalid bias ratio {doc['bias']!r}") from None
    if "header_intervals" in doc:
        value = doc["header_intervals"]
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigError("header_intervals", "expected an integer")
        kwargs["header_intervals"] = value
    for phase_key in ("phase_read", "phase_write", "phase_data"):
        if phase_key in doc:
            try:
                kwargs[phase_key] = exact_ratio(doc[phase_key])
            except (ValueError, ZeroDivisionError):
                raise ConfigError(phase_key, f"invalid ratio {doc[phase_key]!r}") from None
    if "loop_delay" in doc and doc["loop_delay"] is not None:
        kwargs["loop_delay_fs"] = parse_duration(doc["loop_delay"], "loop_delay")
    if "retiming_guard" in doc:
        kwargs["retiming_guard_fs"] = parse_duration(doc["retiming_guard"], "retiming_guard")
    if "loop_jitter" in doc:
        raw = doc["loop_jitter"]
        if not isinstance(raw, list):
            raise ConfigError("loop_jitter", "expected a list of per-trip offsets")
        kwargs["loop_jitter_fs"] = tuple(
            parse_duration(item, f"loop_jitter[{i}]", allow_negative=True) for i, item in enumerate(raw)
        )
    if "cells" in doc:
        kwargs["cell_overrides"] = _parse_cell_overrides(doc["cells"])
    if "max_events" in doc:
        value = doc["max_events"]
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigError("max_events", "expected an integer")
        kwargs["max_events"] = value
    if "search_ceiling" in doc:
        kwargs["search_ceiling_hz"] = parse_frequency(doc["search_ceiling"], "search_ceiling")

    return SimConfig(**kwargs)


def serialize_config(cfg: SimConfig) -> str:
    """Serialize a config to JSON such that parse_config round-trips it."""
    doc: dict[str, Any] = {
        "frequency": cfg.frequency_hz,
        "num_addresses": cfg.num_addresses,
        "bias": _ratio_to_json(cfg.bias.ratio),
        "header_intervals": cfg.header_intervals,
        "phase_read": _ratio_to_json(cfg.phase_read),
        "phase_write": _ratio_to_json(cfg.phase_write),
        "phase_data": _ratio_to_json(cfg.phase_data),
        "loop_delay": cfg.loop_delay_fs,
        "retiming_guard": cfg.retiming_guard_fs,
        "loop_jitter": list(cfg.loop_jitter_fs),
        "max_events": cfg.max_events,
        "search_ceiling": cfg.search_ceiling_hz,
    }
    cells: dict[str, Any] = {}
    for name, overrides in cfg.cell_overrides.items():
        entry: dict[str, Any] = {}
        for key, value in overrides.items():
            if key == "bias_curve":
                entry[key] = [[_ratio_to_json(r), _ratio_to_json(m)] for r, m in value]
            elif key == "operating_range":
                entry[key] = [_ratio_to_json(value[0]), _ratio_to_json(value[1])]
            else:
                entry[key] = value
        cells[name] = entry
    if cells:
        doc["cells"] = cells
    return json.dumps(doc, indent=2, sort_keys=True)


def config_fingerprint(cfg: SimConfig) -> str:
    """Stable one-line summary used in trace metadata."""
    return f"f={cfg.frequency_hz}Hz N={cfg.num_addresses} bias={cfg.bias}"
