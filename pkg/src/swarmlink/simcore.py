"""World state, lockstep physics, neighborhoods, and the datagram transport.

The simulator owns all vehicle state and advances it in deterministic
lockstep: each tick it sends every autopilot a state report, blocks until a
matching-tick actuator command has arrived from every vehicle (or the tick
times out), then integrates. Commands are applied in ascending vehicle id,
so the resulting world never depends on network arrival order.

Physics is a clamped double integrator, semi-implicit Euler:

    a  = clamp_norm(cmd, a_max) - drag_coeff * v
    v' = clamp_norm(v + a * dt, v_max)
    x' = x + v' * dt

Time is reconstructed as tick * dt every step rather than accumulated, so
logged timestamps carry no summation drift.
"""

from __future__ import annotations

import logging
import math
import selectors
import socket
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Mapping, Protocol, Sequence

from .errors import PortBindConflict, ProtocolError
from .metrics import DEFAULT_EPS_H, STATE_LOG_HEADER, fmt_float
from .seeding import entry_heading
from .wire import (
    ActuatorCommand,
    NeighborState,
    PortPair,
    Shutdown,
    StateReport,
    Vec3,
    decode_actuator_command,
    encode_shutdown,
    encode_state_report,
)

log = logging.getLogger(__name__)

# Numerical slack allowed on the speed cap after clamping.
SPEED_SLACK = 1e-9

# How often undelivered state reports are re-sent while a tick waits.
RESEND_INTERVAL = 0.25


class NonFiniteState(Exception):
    """A vehicle state or command contained NaN or infinity."""


class UnknownVehicle(Exception):
    """A vehicle id outside the fleet was referenced."""


class TickTimeout(Exception):
    """The barrier closed before every vehicle's command arrived."""

    def __init__(self, vehicle_ids: Sequence[int], tick: int):
        self.vehicle_ids = tuple(vehicle_ids)
        self.vehicle_id = self.vehicle_ids[0]
        self.tick = tick
        ids = ", ".join(str(v) for v in self.vehicle_ids)
        super().__init__(f"no command from vehicle(s) {ids} at tick {tick}")


@dataclass(frozen=True)
class DynamicsParams:
    """Integrator parameters for the point-mass vehicle model."""

    dt: float = 0.02          # seconds; 50 Hz control rate
    a_max: float = 5.0        # m/s^2
    v_max: float = 3.0        # m/s
    drag_coeff: float = 0.0   # 1/s

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.a_max > 0:
            raise ValueError(f"a_max must be positive, got {self.a_max}")
        if not self.v_max > 0:
            raise ValueError(f"v_max must be positive, got {self.v_max}")
        if self.drag_coeff < 0:
            raise ValueError(f"drag_coeff must be non-negative, got {self.drag_coeff}")


@dataclass(frozen=True)
class VehicleState:
    """Position, velocity, and retained heading of one vehicle."""

    vehicle_id: int
    position: Vec3
    velocity: Vec3
    last_heading: float = 0.0


@dataclass(frozen=True)
class WorldState:
    """All vehicle states at one tick; vehicles are indexed by id, 0..N-1."""

    tick: int
    sim_time: float
    vehicles: tuple[VehicleState, ...]

    def __post_init__(self):
        ids = [v.vehicle_id for v in self.vehicles]
        if ids != list(range(len(ids))):
            raise ValueError(f"vehicle ids must be 0..N-1 in order, got {ids}")


def clamp_norm(v: Vec3, limit: float) -> Vec3:
    """Rescale v to norm `limit` if it is longer; v unchanged otherwise."""
    norm = math.sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
    if norm <= limit or norm == 0.0:
        return v
    scale = limit / norm
    return (v[0] * scale, v[1] * scale, v[2] * scale)


def _require_finite(values: Sequence[float], what: str) -> None:
    for x in values:
        if not math.isfinite(x):
            raise NonFiniteState(f"{what} contains NaN or infinity")


def step_dynamics(state: VehicleState, cmd: Vec3, params: DynamicsParams) -> VehicleState:
    """Advance one vehicle by dt under an acceleration command.

    The command is clamped to a_max before use (the sender already clamps;
    this is the defensive re-clamp), the updated velocity is clamped to
    v_max, and the retained heading follows the new velocity whenever its
    horizontal speed reaches the heading threshold.
    """
    _require_finite(state.position, "position")
    _require_finite(state.velocity, "velocity")
    _require_finite(cmd, "command")

    ax, ay, az = clamp_norm(cmd, params.a_max)
    dt = params.dt
    k = params.drag_coeff
    vx = state.velocity[0] + (ax - k * state.velocity[0]) * dt
    vy = state.velocity[1] + (ay - k * state.velocity[1]) * dt
    vz = state.velocity[2] + (az - k * state.velocity[2]) * dt
    velocity = clamp_norm((vx, vy, vz), params.v_max)
    position = (
        state.position[0] + velocity[0] * dt,
        state.position[1] + velocity[1] * dt,
        state.position[2] + velocity[2] * dt,
    )
    heading = state.last_heading
    if math.hypot(velocity[0], velocity[1]) >= DEFAULT_EPS_H:
        heading = math.atan2(velocity[1], velocity[0])
    return replace(state, position=position, velocity=velocity, last_heading=heading)


def compute_neighborhood(world: WorldState, vehicle_id: int, radius: float) -> list[NeighborState]:
    """Vehicles within `radius` of the given one (inclusive), sorted by id.

    Distance-only: no field-of-view or angular restriction.
    """
    if not 0 <= vehicle_id < len(world.vehicles):
        raise UnknownVehicle(f"vehicle {vehicle_id} not in fleet of {len(world.vehicles)}")
    if not radius > 0:
        raise ValueError(f"radius must be positive, got {radius}")
    own = world.vehicles[vehicle_id].position
    out = []
    for other in world.vehicles:
        if other.vehicle_id == vehicle_id:
            continue
        dx = own[0] - other.position[0]
        dy = own[1] - other.position[1]
        dz = own[2] - other.position[2]
        if math.sqrt(dx * dx + dy * dy + dz * dz) <= radius:
            out.append(NeighborState(other.vehicle_id, other.position, other.velocity))
    return out


def initial_world(n_vehicles: int, grid_spacing: float, seed: int) -> WorldState:
    """Fleet at rest on a planar grid at z=0, centered on the origin.

    Rows hold ceil(sqrt(N)) vehicles. Retained headings start at each
    vehicle's entry heading so the heading a vehicle will adopt when it
    starts flocking is already its held course.
    """
    if n_vehicles < 1:
        raise ValueError("fleet must have at least one vehicle")
    cols = math.isqrt(n_vehicles)
    if cols * cols < n_vehicles:
        cols += 1
    rows = (n_vehicles + cols - 1) // cols
    vehicles = []
    for k in range(n_vehicles):
        col = k % cols
        row = k // cols
        position = (
            (col - (cols - 1) / 2.0) * grid_spacing,
            (row - (rows - 1) / 2.0) * grid_spacing,
            0.0,
        )
        vehicles.append(
            VehicleState(
                vehicle_id=k,
                position=position,
                velocity=(0.0, 0.0, 0.0),
                last_heading=entry_heading(seed, k),
            )
        )
    return WorldState(tick=0, sim_time=0.0, vehicles=tuple(vehicles))


class ChannelSet(Protocol):
    """Transport between the simulator and its autopilots.

    send() delivers one frame to a vehicle's autopilot; recv() returns any
    (vehicle_id, frame) pairs that arrived by the deadline, possibly empty.
    """

    def send(self, vehicle_id: int, frame: bytes) -> None: ...

    def recv(self, deadline: float) -> list[tuple[int, bytes]]: ...

    def close(self) -> None: ...


class UdpChannelSet:
    """One bound datagram socket per vehicle on the instance's output port.

    Binding happens at construction, before any autopilot is spawned, so a
    port collision surfaces immediately as PortBindConflict.
    """

    def __init__(self, port_pairs: Sequence[PortPair], host: str = "127.0.0.1"):
        self._host = host
        self._socks: dict[int, socket.socket] = {}
        self._dest: dict[int, tuple[str, int]] = {}
        self._selector = selectors.DefaultSelector()
        try:
            for pp in port_pairs:
                sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
                try:
                    sock.bind((host, pp.output_port))
                except OSError as exc:
                    sock.close()
                    raise PortBindConflict(pp.output_port) from exc
                sock.setblocking(False)
                self._socks[pp.instance] = sock
                self._dest[pp.instance] = (host, pp.input_port)
                self._selector.register(sock, selectors.EVENT_READ, pp.instance)
        except Exception:
            self.close()
            raise

    def send(self, vehicle_id: int, frame: bytes) -> None:
        self._socks[vehicle_id].sendto(frame, self._dest[vehicle_id])

    def recv(self, deadline: float) -> list[tuple[int, bytes]]:
        timeout = max(0.0, deadline - time.monotonic())
        events = self._selector.select(timeout)
        out = []
        for key, _ in events:
            sock = key.fileobj
            while True:
                try:
                    frame, _addr = sock.recvfrom(65536)
                except BlockingIOError:
                    break
                out.append((key.data, frame))
        return out

    def close(self) -> None:
        for sock in self._socks.values():
            try:
                self._selector.unregister(sock)
            except (KeyError, ValueError):
                pass
            sock.close()
        self._socks.clear()
        self._selector.close()


def build_report(world: WorldState, vehicle_id: int, r_neighbor: float) -> StateReport:
    """State report for one vehicle at the current tick."""
    own = world.vehicles[vehicle_id]
    return StateReport(
        vehicle_id=vehicle_id,
        tick=world.tick,
        sim_time=world.sim_time,
        own_position=own.position,
        own_velocity=own.velocity,
        neighbors=tuple(compute_neighborhood(world, vehicle_id, r_neighbor)),
    )


def lockstep_tick(
    world: WorldState,
    channels: ChannelSet,
    *,
    r_neighbor: float,
    dynamics: DynamicsParams,
    timeout: float,
    hold_last: bool,
    held_commands: dict[int, Vec3],
    watchdog: Callable[[], None] | None = None,
) -> WorldState:
    """Run one barrier round and integrate the fleet.

    Sends every vehicle its report, collects one matching-tick command per
    vehicle (re-sending reports periodically until the deadline), then
    applies commands in ascending vehicle id. held_commands is updated in
    place with the commands actually applied; with hold_last a silent
    vehicle reuses its previous entry instead of failing the tick.

    Raises:
        TickTimeout: naming the silent vehicles, when hold_last is off.
    """
    frames = {
        v.vehicle_id: encode_state_report(build_report(world, v.vehicle_id, r_neighbor))
        for v in world.vehicles
    }
    for vid, frame in frames.items():
        channels.send(vid, frame)

    pending = set(frames)
    commands: dict[int, Vec3] = {}
    start = time.monotonic()
    deadline = start + timeout
    next_resend = start + RESEND_INTERVAL
    while pending:
        now = time.monotonic()
        if now >= deadline:
            break
        for vid, frame in channels.recv(min(deadline, next_resend)):
            if watchdog is not None:
                watchdog()
            try:
                cmd = decode_actuator_command(frame)
            except ProtocolError as exc:
                log.warning("dropping undecodable frame on port of vehicle %d: %s", vid, exc)
                continue
            if cmd.vehicle_id != vid:
                log.warning(
                    "dropping command from vehicle %d on port of vehicle %d",
                    cmd.vehicle_id, vid,
                )
                continue
            if cmd.tick != world.tick or vid not in pending:
                continue  # stale duplicate or resend echo
            commands[vid] = cmd.accel_cmd
            pending.discard(vid)
        if watchdog is not None:
            watchdog()
        now = time.monotonic()
        if pending and now >= next_resend:
            for vid in pending:
                channels.send(vid, frames[vid])
            next_resend = now + RESEND_INTERVAL

    if pending:
        if not hold_last:
            raise TickTimeout(sorted(pending), world.tick)
        for vid in sorted(pending):
            held = held_commands.get(vid, (0.0, 0.0, 0.0))
            log.warning(
                "vehicle %d silent at tick %d; reusing previous command", vid, world.tick
            )
            commands[vid] = held
    held_commands.update(commands)

    next_tick = world.tick + 1
    vehicles = tuple(
        step_dynamics(v, commands[v.vehicle_id], dynamics) for v in world.vehicles
    )
    return WorldState(tick=next_tick, sim_time=next_tick * dynamics.dt, vehicles=vehicles)


class StateLogWriter:
    """Appends one CSV row per vehicle per tick, flushing whole tick blocks.

    Rows are ordered by (tick, vehicle_id) and floats are printed with 9
    significant digits, so identical world evolutions produce byte-identical
    logs.
    """

    def __init__(self, path):
        self.path = Path(path)
        self._fh = open(self.path, "w", newline="")
        self._fh.write(",".join(STATE_LOG_HEADER) + "\n")

    def log_world(self, world: WorldState) -> None:
        lines = []
        for v in world.vehicles:
            fields = [
                str(world.tick),
                fmt_float(world.sim_time),
                str(v.vehicle_id),
                fmt_float(v.position[0]),
                fmt_float(v.position[1]),
                fmt_float(v.position[2]),
                fmt_float(v.velocity[0]),
                fmt_float(v.velocity[1]),
                fmt_float(v.velocity[2]),
            ]
            lines.append(",".join(fields))
        self._fh.write("\n".join(lines) + "\n")
        self._fh.flush()

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.flush()
            self._fh.close()


def run_simulation(
    config,
    *,
    channels: ChannelSet | None = None,
    watchdog: Callable[[], None] | None = None,
    states_path=None,
) -> Path:
    """Drive the full lockstep loop and write the state log.

    With no channel set given, binds one datagram socket per vehicle on the
    configured output ports (PortBindConflict if any is taken). The first
    tick waits up to the configured connection window so autopilots that
    are still starting can join; later ticks use the normal tick timeout.

    Returns the path of the written state log.
    """
    own_channels = channels is None
    if channels is None:
        pairs = [
            config.port_pair(n) for n in range(config.n_vehicles)
        ]
        channels = UdpChannelSet(pairs)
    states_path = Path(states_path) if states_path is not None else Path(config.output_dir) / "states.csv"

    world = initial_world(config.n_vehicles, config.grid_spacing, config.seed)
    total_ticks = round(config.duration / config.dynamics.dt)
    held: dict[int, Vec3] = {}
    writer = StateLogWriter(states_path)
    try:
        for i in range(total_ticks):
            writer.log_world(world)
            timeout = config.tick_timeout
            if i == 0:
                timeout = max(timeout, config.connect_window)
            world = lockstep_tick(
                world,
                channels,
                r_neighbor=config.flocking.r_neighbor,
                dynamics=config.dynamics,
                timeout=timeout,
                hold_last=config.hold_last,
                held_commands=held,
                watchdog=watchdog,
            )
        # Redundant shutdown frames cover a dropped datagram.
        for _ in range(3):
            for v in world.vehicles:
                channels.send(v.vehicle_id, encode_shutdown(Shutdown(v.vehicle_id, world.tick)))
    finally:
        writer.close()
        if own_channels:
            channels.close()
    return states_path
