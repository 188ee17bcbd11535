"""fluxloop: pulse-level simulation and analysis of a delay-line memory.

The package models a recirculating superconducting delay-line store at the
level of individual timestamped pulses: a deterministic event kernel
(:mod:`fluxloop.engine`) drives behavioral storage/merge cells
(:mod:`fluxloop.cells`) wired into the memory controller
(:mod:`fluxloop.memory`), with static timing and empirical bias-margin
analysis (:mod:`fluxloop.timing`) and storage-density estimates for the
transmission-line medium (:mod:`fluxloop.density`) alongside.
"""

from .cells import (
    BiasDelayModel,
    BiasRangeError,
    CellKind,
    CellParams,
    TimingViolation,
    ViolationKind,
    default_cell_params,
)
from .core import (
    BiasPoint,
    ConfigError,
    FluxloopError,
    InfeasibleFrequencyError,
    PulseEvent,
    SimConfig,
    interval_duration,
    parse_config,
    parse_duration,
    parse_frequency,
    serialize_config,
    trip_duration,
)
from .density import (
    LineSpec,
    PRESETS,
    density_mbit_per_cm2,
    inductance_from_sheet,
    reproduce_published,
    resolve_preset,
    speed_factor,
    velocity_mps,
)
from .engine import (
    Connection,
    Netlist,
    Trace,
    query_pulses,
    run_until,
    schedule,
    trace_to_csv,
    trace_to_vcd,
)
from .memory import (
    JitterWindow,
    MemoryProgram,
    MemoryResult,
    TripOp,
    build_controller,
    jitter_tolerance,
    oracle,
    parse_program,
    pulse_spacing,
    required_loop_delay,
    run_program,
    scenario_address_sweep,
    scenario_overwrite,
    scenario_write_read,
    serialize_program,
    stimulus_for,
)
from .timing import (
    MarginReport,
    StaReport,
    bias_margin,
    characterize_cell,
    margin_sweep,
    max_frequency,
    sta,
)

__version__ = "0.1.0"

__all__ = [
    "BiasDelayModel",
    "BiasPoint",
    "BiasRangeError",
    "CellKind",
    "CellParams",
    "ConfigError",
    "Connection",
    "FluxloopError",
    "InfeasibleFrequencyError",
    "JitterWindow",
    "LineSpec",
    "MarginReport",
    "MemoryProgram",
    "MemoryResult",
    "Netlist",
    "PRESETS",
    "PulseEvent",
    "SimConfig",
    "StaReport",
    "Trace",
    "TimingViolation",
    "TripOp",
    "ViolationKind",
    "bias_margin",
    "build_controller",
    "characterize_cell",
    "default_cell_params",
    "density_mbit_per_cm2",
    "inductance_from_sheet",
    "interval_duration",
    "jitter_tolerance",
    "margin_sweep",
    "max_frequency",
    "oracle",
    "parse_config",
    "parse_duration",
    "parse_frequency",
    "parse_program",
    "pulse_spacing",
    "query_pulses",
    "reproduce_published",
    "required_loop_delay",
    "resolve_preset",
    "run_program",
    "run_until",
    "scenario_address_sweep",
    "scenario_overwrite",
    "scenario_write_read",
    "schedule",
    "serialize_config",
    "serialize_program",
    "speed_factor",
    "sta",
    "stimulus_for",
    "trace_to_csv",
    "trace_to_vcd",
    "trip_duration",
    "velocity_mps",
]
