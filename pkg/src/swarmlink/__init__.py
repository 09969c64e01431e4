"""Deterministic lockstep multi-vehicle flocking simulator.

One simulator process advances a shared world in fixed ticks; one
autopilot per vehicle answers each state report with an acceleration
command over a per-instance datagram port pair. Runs are reproducible to
the byte for a given seed, and swarm metrics are recomputable offline
from the state log alone.
"""

from .autopilot import AutopilotController, AutopilotMode
from .config import ConfigError, ExperimentConfig, load_config, validate_config, write_config
from .errors import PortBindConflict, ProtocolError, SwarmlinkError
from .flocking import FlockingParams, flocking_velocity
from .harness import ExperimentReport, run_experiment, run_experiment_loopback
from .metrics import (
    MetricsSample,
    StateRow,
    compute_metrics_timeseries,
    read_metrics_csv,
    read_state_log,
    write_metrics_csv,
)
from .simcore import (
    DynamicsParams,
    TickTimeout,
    VehicleState,
    WorldState,
    run_simulation,
)
from .wire import (
    ActuatorCommand,
    NeighborState,
    PortPair,
    PortRangeExceeded,
    Shutdown,
    StateReport,
    allocate_ports,
    decode_frame,
    encode_frame,
)

__version__ = "0.1.0"

__all__ = [
    "ActuatorCommand",
    "AutopilotController",
    "AutopilotMode",
    "ConfigError",
    "DynamicsParams",
    "ExperimentConfig",
    "ExperimentReport",
    "FlockingParams",
    "MetricsSample",
    "NeighborState",
    "PortBindConflict",
    "PortPair",
    "PortRangeExceeded",
    "ProtocolError",
    "Shutdown",
    "StateReport",
    "StateRow",
    "SwarmlinkError",
    "TickTimeout",
    "VehicleState",
    "WorldState",
    "allocate_ports",
    "compute_metrics_timeseries",
    "decode_frame",
    "encode_frame",
    "flocking_velocity",
    "load_config",
    "read_metrics_csv",
    "read_state_log",
    "run_experiment",
    "run_experiment_loopback",
    "run_simulation",
    "validate_config",
    "write_config",
    "write_metrics_csv",
]
