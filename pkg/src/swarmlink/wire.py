"""Port allocation and the binary frames exchanged between simulator and autopilots.

Each autopilot instance n talks to the simulator over two localhost datagram
ports derived from its index:

    input_port  = 9002 + 10*n   (autopilot listens; simulator sends state here)
    output_port = 9003 + 10*n   (simulator listens; autopilot sends commands here)

Frame layout (integers little-endian, floats IEEE-754 binary64):

    ┌───────────┬─────────┬──────────┬──────────────┬──────────┬─────────┐
    │ magic 4B  │ ver u8  │ type u8  │ vehicle u16  │ tick u64 │ payload │
    │ "SWL1"    │ = 1     │ 1/2/3    │              │          │         │
    └───────────┴─────────┴──────────┴──────────────┴──────────┴─────────┘

    type 1  StateReport      payload: sim_time f64, own_position f64*3,
                             own_velocity f64*3, neighbor_count u32, then
                             neighbor_count entries of
                             (neighbor_id u16, position f64*3, velocity f64*3)
    type 2  ActuatorCommand  payload: accel f64*3
    type 3  Shutdown         no payload (simulator tells an autopilot to exit)

Encoding is canonical: neighbors are sorted by id, floats must be finite and
negative zero is normalized away at construction, so byte equality of two
encodings is exactly semantic equality of the messages. One datagram carries
one frame.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from typing import Sequence, Union

from .errors import ProtocolError

MAGIC = b"SWL1"
VERSION = 1

MSG_STATE_REPORT = 1
MSG_ACTUATOR_COMMAND = 2
MSG_SHUTDOWN = 3

_HEADER = struct.Struct("<4sBBHQ")          # magic, version, msg_type, vehicle_id, tick
_STATE_FIXED = struct.Struct("<d3d3dI")     # sim_time, position, velocity, neighbor_count
_NEIGHBOR = struct.Struct("<H3d3d")         # neighbor_id, position, velocity
_ACCEL = struct.Struct("<3d")

HEADER_SIZE = _HEADER.size                          # 16
STATE_REPORT_BASE_SIZE = HEADER_SIZE + _STATE_FIXED.size  # 76 for zero neighbors
NEIGHBOR_ENTRY_SIZE = _NEIGHBOR.size                # 50
ACTUATOR_COMMAND_SIZE = HEADER_SIZE + _ACCEL.size   # 40
SHUTDOWN_SIZE = HEADER_SIZE

PORT_MIN = 1024
PORT_MAX = 65535

Vec3 = tuple[float, float, float]


class PortRangeExceeded(Exception):
    """A computed port fell outside the usable range [1024, 65535]."""


class BadMagic(ProtocolError):
    """Frame does not start with the protocol magic bytes."""


class VersionMismatch(ProtocolError):
    """Frame claims a protocol version this build does not speak."""


class WrongMsgType(ProtocolError):
    """Frame carries a different message type than the decoder expects."""


class TruncatedFrame(ProtocolError):
    """Frame length is inconsistent with its declared content."""


class NonCanonicalFrame(ProtocolError):
    """Frame decodes but is not in canonical form (unsorted or duplicate
    neighbors, a neighbor equal to the reporting vehicle, a non-finite
    float, or a negative-zero float)."""


def _canonical_vec3(value: Sequence[float], what: str) -> Vec3:
    if len(value) != 3:
        raise ValueError(f"{what} must have exactly 3 components")
    out = []
    for x in value:
        x = float(x)
        if not math.isfinite(x):
            raise ValueError(f"{what} contains a non-finite component")
        out.append(x + 0.0)  # fold -0.0 into 0.0 so encoding is canonical
    return (out[0], out[1], out[2])


def _check_u16(value: int, what: str) -> int:
    value = int(value)
    if not 0 <= value <= 0xFFFF:
        raise ValueError(f"{what} must fit in u16, got {value}")
    return value


def _check_u64(value: int, what: str) -> int:
    value = int(value)
    if not 0 <= value <= 0xFFFFFFFFFFFFFFFF:
        raise ValueError(f"{what} must fit in u64, got {value}")
    return value


@dataclass(frozen=True)
class PortPair:
    """Datagram port assignment for one autopilot instance."""

    instance: int
    input_port: int   # autopilot listens here for state reports
    output_port: int  # simulator listens here for actuator commands

    def __post_init__(self):
        if self.instance < 0:
            raise ValueError(f"instance must be non-negative, got {self.instance}")
        for port in (self.input_port, self.output_port):
            if not PORT_MIN <= port <= PORT_MAX:
                raise PortRangeExceeded(
                    f"port {port} for instance {self.instance} is outside "
                    f"[{PORT_MIN}, {PORT_MAX}]"
                )


def allocate_ports(
    n: int,
    base_in: int = 9002,
    base_out: int = 9003,
    stride: int = 10,
) -> PortPair:
    """Port assignment for instance n: (base_in + stride*n, base_out + stride*n).

    Raises:
        PortRangeExceeded: if either computed port leaves [1024, 65535].
        ValueError: if n is negative or stride is not positive.
    """
    if n < 0:
        raise ValueError(f"instance index must be non-negative, got {n}")
    if stride <= 0:
        raise ValueError(f"stride must be positive, got {stride}")
    return PortPair(
        instance=n,
        input_port=base_in + stride * n,
        output_port=base_out + stride * n,
    )


@dataclass(frozen=True)
class NeighborState:
    """Position and velocity snapshot of one neighbor, as seen by a vehicle."""

    neighbor_id: int
    position: Vec3
    velocity: Vec3

    def __post_init__(self):
        object.__setattr__(self, "neighbor_id", _check_u16(self.neighbor_id, "neighbor_id"))
        object.__setattr__(self, "position", _canonical_vec3(self.position, "neighbor position"))
        object.__setattr__(self, "velocity", _canonical_vec3(self.velocity, "neighbor velocity"))


@dataclass(frozen=True)
class StateReport:
    """Per-tick state the simulator sends to one autopilot.

    Neighbors are stored sorted by id regardless of construction order, must
    not contain the vehicle itself, and must not repeat an id.
    """

    vehicle_id: int
    tick: int
    sim_time: float
    own_position: Vec3
    own_velocity: Vec3
    neighbors: tuple[NeighborState, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "vehicle_id", _check_u16(self.vehicle_id, "vehicle_id"))
        object.__setattr__(self, "tick", _check_u64(self.tick, "tick"))
        sim_time = float(self.sim_time)
        if not math.isfinite(sim_time):
            raise ValueError("sim_time must be finite")
        object.__setattr__(self, "sim_time", sim_time + 0.0)
        object.__setattr__(self, "own_position", _canonical_vec3(self.own_position, "own_position"))
        object.__setattr__(self, "own_velocity", _canonical_vec3(self.own_velocity, "own_velocity"))
        ordered = tuple(sorted(self.neighbors, key=lambda nb: nb.neighbor_id))
        ids = [nb.neighbor_id for nb in ordered]
        if self.vehicle_id in ids:
            raise ValueError("neighbors must not include the reporting vehicle")
        if len(set(ids)) != len(ids):
            raise ValueError("neighbor ids must be unique")
        object.__setattr__(self, "neighbors", ordered)


@dataclass(frozen=True)
class ActuatorCommand:
    """Acceleration command an autopilot sends back for one tick."""

    vehicle_id: int
    tick: int
    accel_cmd: Vec3

    def __post_init__(self):
        object.__setattr__(self, "vehicle_id", _check_u16(self.vehicle_id, "vehicle_id"))
        object.__setattr__(self, "tick", _check_u64(self.tick, "tick"))
        object.__setattr__(self, "accel_cmd", _canonical_vec3(self.accel_cmd, "accel_cmd"))


@dataclass(frozen=True)
class Shutdown:
    """Simulator's end-of-run frame; the autopilot exits cleanly on receipt."""

    vehicle_id: int
    tick: int

    def __post_init__(self):
        object.__setattr__(self, "vehicle_id", _check_u16(self.vehicle_id, "vehicle_id"))
        object.__setattr__(self, "tick", _check_u64(self.tick, "tick"))


Message = Union[StateReport, ActuatorCommand, Shutdown]


def _header(msg_type: int, vehicle_id: int, tick: int) -> bytes:
    return _HEADER.pack(MAGIC, VERSION, msg_type, vehicle_id, tick)


def encode_state_report(report: StateReport) -> bytes:
    """Serialize a StateReport into its canonical frame."""
    parts = [
        _header(MSG_STATE_REPORT, report.vehicle_id, report.tick),
        _STATE_FIXED.pack(
            report.sim_time,
            *report.own_position,
            *report.own_velocity,
            len(report.neighbors),
        ),
    ]
    for nb in report.neighbors:
        parts.append(_NEIGHBOR.pack(nb.neighbor_id, *nb.position, *nb.velocity))
    return b"".join(parts)


def encode_actuator_command(cmd: ActuatorCommand) -> bytes:
    """Serialize an ActuatorCommand into its canonical frame."""
    return _header(MSG_ACTUATOR_COMMAND, cmd.vehicle_id, cmd.tick) + _ACCEL.pack(*cmd.accel_cmd)


def encode_shutdown(msg: Shutdown) -> bytes:
    return _header(MSG_SHUTDOWN, msg.vehicle_id, msg.tick)


def _decode_header(frame: bytes, expect_type: int | None) -> tuple[int, int, int]:
    """Validate the frame prefix; returns (msg_type, vehicle_id, tick)."""
    if len(frame) < HEADER_SIZE:
        raise TruncatedFrame(f"frame of {len(frame)} bytes is shorter than the header")
    magic, version, msg_type, vehicle_id, tick = _HEADER.unpack_from(frame)
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    if version != VERSION:
        raise VersionMismatch(f"version {version}, expected {VERSION}")
    if msg_type not in (MSG_STATE_REPORT, MSG_ACTUATOR_COMMAND, MSG_SHUTDOWN):
        raise WrongMsgType(f"unknown message type {msg_type}")
    if expect_type is not None and msg_type != expect_type:
        raise WrongMsgType(f"message type {msg_type}, expected {expect_type}")
    return msg_type, vehicle_id, tick


def _checked_floats(values: Sequence[float], what: str) -> tuple[float, ...]:
    for x in values:
        if not math.isfinite(x):
            raise NonCanonicalFrame(f"{what} contains a non-finite float")
        if x == 0.0 and math.copysign(1.0, x) < 0:
            raise NonCanonicalFrame(f"{what} contains negative zero")
    return tuple(values)


def decode_state_report(frame: bytes) -> StateReport:
    """Parse a StateReport frame; re-encoding the result reproduces the bytes.

    Raises:
        BadMagic, VersionMismatch, WrongMsgType, TruncatedFrame,
        NonCanonicalFrame: depending on how the frame is malformed.
    """
    _, vehicle_id, tick = _decode_header(frame, MSG_STATE_REPORT)
    if len(frame) < STATE_REPORT_BASE_SIZE:
        raise TruncatedFrame(
            f"state report of {len(frame)} bytes is shorter than the fixed part"
        )
    fixed = _STATE_FIXED.unpack_from(frame, HEADER_SIZE)
    sim_time = fixed[0]
    own_position = fixed[1:4]
    own_velocity = fixed[4:7]
    count = fixed[7]
    expected = STATE_REPORT_BASE_SIZE + count * NEIGHBOR_ENTRY_SIZE
    if len(frame) != expected:
        raise TruncatedFrame(
            f"state report with {count} neighbors should be {expected} bytes, got {len(frame)}"
        )
    _checked_floats((sim_time, *own_position, *own_velocity), "state report")
    neighbors = []
    prev_id = -1
    offset = STATE_REPORT_BASE_SIZE
    for _ in range(count):
        entry = _NEIGHBOR.unpack_from(frame, offset)
        nb_id = entry[0]
        if nb_id <= prev_id:
            raise NonCanonicalFrame("neighbor ids are not strictly ascending")
        if nb_id == vehicle_id:
            raise NonCanonicalFrame("neighbors include the reporting vehicle")
        _checked_floats(entry[1:], "neighbor entry")
        neighbors.append(NeighborState(nb_id, entry[1:4], entry[4:7]))
        prev_id = nb_id
        offset += NEIGHBOR_ENTRY_SIZE
    return StateReport(
        vehicle_id=vehicle_id,
        tick=tick,
        sim_time=sim_time,
        own_position=own_position,
        own_velocity=own_velocity,
        neighbors=tuple(neighbors),
    )


def decode_actuator_command(frame: bytes) -> ActuatorCommand:
    """Parse an ActuatorCommand frame; same error contract as decode_state_report."""
    _, vehicle_id, tick = _decode_header(frame, MSG_ACTUATOR_COMMAND)
    if len(frame) != ACTUATOR_COMMAND_SIZE:
        raise TruncatedFrame(
            f"actuator command should be {ACTUATOR_COMMAND_SIZE} bytes, got {len(frame)}"
        )
    accel = _ACCEL.unpack_from(frame, HEADER_SIZE)
    _checked_floats(accel, "actuator command")
    return ActuatorCommand(vehicle_id=vehicle_id, tick=tick, accel_cmd=accel)


def decode_shutdown(frame: bytes) -> Shutdown:
    _, vehicle_id, tick = _decode_header(frame, MSG_SHUTDOWN)
    if len(frame) != SHUTDOWN_SIZE:
        raise TruncatedFrame(f"shutdown frame should be {SHUTDOWN_SIZE} bytes, got {len(frame)}")
    return Shutdown(vehicle_id=vehicle_id, tick=tick)


def decode_frame(frame: bytes) -> Message:
    """Parse any frame, dispatching on the header's message type."""
    msg_type, _, _ = _decode_header(frame, None)
    if msg_type == MSG_STATE_REPORT:
        return decode_state_report(frame)
    if msg_type == MSG_ACTUATOR_COMMAND:
        return decode_actuator_command(frame)
    return decode_shutdown(frame)


def encode_frame(msg: Message) -> bytes:
    """Serialize any message to its frame."""
    if isinstance(msg, StateReport):
        return encode_state_report(msg)
    if isinstance(msg, ActuatorCommand):
        return encode_actuator_command(msg)
    if isinstance(msg, Shutdown):
        return encode_shutdown(msg)
    raise TypeError(f"not a wire message: {type(msg).__name__}")
