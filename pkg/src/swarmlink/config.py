"""Experiment configuration: defaults, INI loading, validation, snapshots.

One frozen ExperimentConfig carries everything a run needs. The same INI
file drives both sides: the run harness reads it to size the fleet and
the ports, and each autopilot process re-reads the snapshot the harness
writes into the output directory, so controller gains can never drift
between the two ends of the wire.
"""

from __future__ import annotations

import configparser
import logging
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .flocking import FlockingParams
from .metrics import DEFAULT_EPS_H
from .simcore import DynamicsParams
from .wire import PortPair, allocate_ports

log = logging.getLogger(__name__)

# Runs that would log more rows than this warn before starting.
ROW_BUDGET = 10_000_000


class ConfigError(Exception):
    """A configuration value is missing, malformed, or inconsistent."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Complete description of one experiment run."""

    n_vehicles: int = 5
    duration: float = 120.0      # seconds of simulated time
    seed: int = 0
    grid_spacing: float = 4.0    # meters between launch grid slots
    z_target: float = 10.0       # cruise altitude, meters
    output_dir: str = "out"

    base_in: int = 9002
    base_out: int = 9003
    stride: int = 10

    tick_timeout: float = 2.0    # seconds the barrier waits per tick
    connect_window: float = 5.0  # first-tick grace for autopilot startup
    idle_timeout: float = 10.0   # autopilot exits after this much silence
    hold_last: bool = False      # reuse last command instead of failing a tick

    takeoff_kp: float = 2.0
    takeoff_kd: float = 2.8
    eps_h: float = DEFAULT_EPS_H

    dynamics: DynamicsParams = field(default_factory=DynamicsParams)
    flocking: FlockingParams = field(default_factory=FlockingParams)

    def port_pair(self, instance: int) -> PortPair:
        return allocate_ports(instance, self.base_in, self.base_out, self.stride)

    def total_ticks(self) -> int:
        return round(self.duration / self.dynamics.dt)


def validate_config(config: ExperimentConfig) -> ExperimentConfig:
    """Cross-field checks beyond what the component dataclasses enforce.

    Raises:
        ConfigError: naming the offending section.key.
    """
    def bad(key: str, why: str):
        raise ConfigError(f"{key}: {why}")

    if config.n_vehicles < 1:
        bad("experiment.n_vehicles", f"must be at least 1, got {config.n_vehicles}")
    if not config.duration > 0:
        bad("experiment.duration", f"must be positive, got {config.duration}")
    if not config.grid_spacing > 0:
        bad("experiment.grid_spacing", f"must be positive, got {config.grid_spacing}")
    if not config.z_target > 0:
        bad("experiment.z_target", f"must be positive, got {config.z_target}")
    if not config.tick_timeout > 0:
        bad("timing.tick_timeout", f"must be positive, got {config.tick_timeout}")
    if not config.connect_window > 0:
        bad("timing.connect_window", f"must be positive, got {config.connect_window}")
    if not config.idle_timeout > 0:
        bad("timing.idle_timeout", f"must be positive, got {config.idle_timeout}")
    if not config.takeoff_kp > 0:
        bad("takeoff.kp", f"must be positive, got {config.takeoff_kp}")
    if config.takeoff_kd < 0:
        bad("takeoff.kd", f"must be non-negative, got {config.takeoff_kd}")
    if not config.eps_h > 0:
        bad("metrics.eps_h", f"must be positive, got {config.eps_h}")
    if config.flocking.v_cruise > config.dynamics.v_max:
        bad("flocking.v_cruise",
            f"cruise speed {config.flocking.v_cruise} exceeds "
            f"dynamics.v_max {config.dynamics.v_max}")
    # Every instance's ports must fit the range; probing the last suffices.
    try:
        config.port_pair(config.n_vehicles - 1)
    except Exception as exc:
        bad("ports", str(exc))
    rows = config.total_ticks() * config.n_vehicles
    if rows > ROW_BUDGET:
        log.warning(
            "run will log %d state rows; expect a large states.csv", rows
        )
    return config


_SCHEMA = {
    "experiment": {
        "n_vehicles": int, "duration": float, "seed": int,
        "grid_spacing": float, "z_target": float, "output_dir": str,
    },
    "ports": {"base_in": int, "base_out": int, "stride": int},
    "timing": {
        "tick_timeout": float, "connect_window": float,
        "idle_timeout": float, "hold_last": bool,
    },
    "takeoff": {"kp": float, "kd": float},
    "metrics": {"eps_h": float},
    "dynamics": {"dt": float, "a_max": float, "v_max": float, "drag_coeff": float},
    "flocking": {
        "r_neighbor": float, "d_sep": float, "w_sep": float, "w_align": float,
        "w_coh": float, "v_cruise": float, "k_v": float,
    },
}

# Schema keys whose config-object attribute differs from the INI key.
_RENAMES = {("takeoff", "kp"): "takeoff_kp", ("takeoff", "kd"): "takeoff_kd"}


def load_config(path) -> ExperimentConfig:
    """Read an INI file; absent sections and keys keep their defaults.

    Raises:
        ConfigError: unknown section or key, unparseable value, or a
            value failing validation, always named as section.key.
    """
    parser = configparser.ConfigParser()
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc

    top: dict = {}
    dyn: dict = {}
    flk: dict = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}] in {path}")
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {section}.{key} in {path}")
            kind = _SCHEMA[section][key]
            try:
                if kind is bool:
                    value = parser.getboolean(section, key)
                else:
                    value = kind(raw)
            except ValueError as exc:
                raise ConfigError(
                    f"{section}.{key}: cannot parse {raw!r} as {kind.__name__}"
                ) from exc
            if section == "dynamics":
                dyn[key] = value
            elif section == "flocking":
                flk[key] = value
            else:
                top[_RENAMES.get((section, key), key)] = value

    try:
        config = ExperimentConfig(
            dynamics=DynamicsParams(**dyn),
            flocking=FlockingParams(**flk),
            **top,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return validate_config(config)


def write_config(config: ExperimentConfig, path) -> Path:
    """Write a complete INI snapshot; load_config(write_config(c)) == c."""
    parser = configparser.ConfigParser()

    def attr_of(section, key):
        return _RENAMES.get((section, key), key)

    for section, keys in _SCHEMA.items():
        parser[section] = {}
        for key in keys:
            if section == "dynamics":
                value = getattr(config.dynamics, key)
            elif section == "flocking":
                value = getattr(config.flocking, key)
            else:
                value = getattr(config, attr_of(section, key))
            parser[section][key] = repr(value) if isinstance(value, float) else str(value)
    path = Path(path)
    with open(path, "w", newline="") as fh:
        parser.write(fh)
    return path


def config_overrides(config: ExperimentConfig, **changes) -> ExperimentConfig:
    """New config with top-level fields replaced, re-validated."""
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = set(changes) - known
    if unknown:
        raise ConfigError(f"unknown config field(s): {sorted(unknown)}")
    return validate_config(replace(config, **changes))
