"""Per-vehicle autopilot: one process per vehicle, datagram in, command out.

Each autopilot binds its instance's input port, waits for state reports,
and answers every report with an acceleration command for the same tick.
Control runs a three-mode machine:

    GROUND   -> TAKEOFF on the first report
    TAKEOFF  -> vertical PD toward the target altitude, no lateral motion
    FLOCK    -> velocity tracking of the flocking rule output, plus the
                same vertical PD holding altitude

On entering FLOCK the tracked velocity for that single tick is the
vehicle's entry velocity: cruise speed along a per-vehicle pseudo-random
heading derived from (seed, vehicle id). From the next tick on the rules
take over. Report handling is idempotent per tick, so re-sent reports get
the identical command bytes back instead of advancing the mode machine
twice.

Exit codes: 0 clean shutdown, 2 input port already bound, 3 protocol
error on the wire, 4 idle timeout with no simulator traffic.
"""

from __future__ import annotations

import argparse
import enum
import math
import socket
import sys
import time

from .errors import PortBindConflict, ProtocolError
from .flocking import FlockingParams, flocking_velocity
from .metrics import DEFAULT_EPS_H, heading_from_velocity
from .seeding import entry_heading
from .wire import (
    ActuatorCommand,
    Shutdown,
    StateReport,
    Vec3,
    decode_frame,
    encode_actuator_command,
)

EXIT_OK = 0
EXIT_PORT_CONFLICT = 2
EXIT_PROTOCOL_ERROR = 3
EXIT_IDLE_TIMEOUT = 4


class AutopilotMode(enum.Enum):
    GROUND = "ground"
    TAKEOFF = "takeoff"
    FLOCK = "flock"


def takeoff_command(z: float, vz: float, z_target: float, kp: float, kd: float) -> float:
    """Vertical PD acceleration toward the target altitude."""
    return kp * (z_target - z) - kd * vz


def takeoff_complete(z: float, vz: float, z_target: float,
                     z_tol: float = 0.2, vz_tol: float = 0.1) -> bool:
    """True once the vehicle is at altitude and nearly stationary vertically."""
    return abs(z - z_target) < z_tol and abs(vz) < vz_tol


class AutopilotController:
    """Pure control logic: feed state reports in, get actuator commands out.

    Transport-free so the simulator's in-process test harness can drive it
    directly; the process wrapper below adds the datagram loop.
    """

    def __init__(
        self,
        vehicle_id: int,
        seed: int,
        *,
        flocking: FlockingParams | None = None,
        z_target: float = 10.0,
        takeoff_kp: float = 2.0,
        takeoff_kd: float = 2.8,
        a_max: float = 5.0,
        eps_h: float = DEFAULT_EPS_H,
        event_sink=None,
    ):
        self.vehicle_id = vehicle_id
        self.seed = seed
        self.flocking = flocking if flocking is not None else FlockingParams()
        self.z_target = z_target
        self.takeoff_kp = takeoff_kp
        self.takeoff_kd = takeoff_kd
        self.a_max = a_max
        self.eps_h = eps_h
        self.mode = AutopilotMode.GROUND
        self.entry_heading = entry_heading(seed, vehicle_id)
        self.last_heading = self.entry_heading
        self.flock_entry_tick: int | None = None
        self.done = False
        self._cached: tuple[int, ActuatorCommand] | None = None
        self._event_sink = event_sink

    def _event(self, text: str) -> None:
        if self._event_sink is not None:
            print(f"EVENT {text} instance={self.vehicle_id}",
                  file=self._event_sink, flush=True)

    def _clamp(self, a: Vec3) -> Vec3:
        norm = math.sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2])
        if norm <= self.a_max or norm == 0.0:
            return a
        s = self.a_max / norm
        return (a[0] * s, a[1] * s, a[2] * s)

    def handle(self, report: StateReport) -> ActuatorCommand:
        """Command for one state report; idempotent for repeated ticks."""
        if report.vehicle_id != self.vehicle_id:
            raise ProtocolError(
                f"report for vehicle {report.vehicle_id} "
                f"reached autopilot {self.vehicle_id}"
            )
        if self._cached is not None and self._cached[0] == report.tick:
            return self._cached[1]

        z = report.own_position[2]
        vz = report.own_velocity[2]

        if self.mode is AutopilotMode.GROUND:
            self.mode = AutopilotMode.TAKEOFF
            self._event(f"mode=takeoff tick={report.tick}")

        if self.mode is AutopilotMode.TAKEOFF and takeoff_complete(z, vz, self.z_target):
            self.mode = AutopilotMode.FLOCK
            self.flock_entry_tick = report.tick
            self._event(f"mode=flock tick={report.tick}")

        if self.mode is AutopilotMode.TAKEOFF:
            accel = (0.0, 0.0, takeoff_command(z, vz, self.z_target,
                                               self.takeoff_kp, self.takeoff_kd))
        else:
            v = report.own_velocity
            self.last_heading = heading_from_velocity(v, self.last_heading, self.eps_h)
            if report.tick == self.flock_entry_tick:
                v_des = (
                    self.flocking.v_cruise * math.cos(self.entry_heading),
                    self.flocking.v_cruise * math.sin(self.entry_heading),
                    0.0,
                )
            else:
                v_des = flocking_velocity(
                    report.own_position, v, self.last_heading,
                    report.neighbors, self.flocking,
                )
            k_v = self.flocking.k_v
            accel = (
                k_v * (v_des[0] - v[0]),
                k_v * (v_des[1] - v[1]),
                takeoff_command(z, vz, self.z_target, self.takeoff_kp, self.takeoff_kd),
            )

        cmd = ActuatorCommand(self.vehicle_id, report.tick, self._clamp(accel))
        self._cached = (report.tick, cmd)
        return cmd

    def handle_shutdown(self) -> None:
        self.done = True
        self._event("shutdown")


def run_autopilot(
    controller: AutopilotController,
    input_port: int,
    output_port: int,
    *,
    host: str = "127.0.0.1",
    idle_timeout: float = 10.0,
) -> int:
    """Datagram loop around a controller; returns the process exit code.

    Replies go to the source address of the most recent report, so the
    configured output port only matters until the first datagram arrives.
    """
    sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    try:
        try:
            sock.bind((host, input_port))
        except OSError as exc:
            print(f"EVENT error=port_conflict port={input_port} "
                  f"instance={controller.vehicle_id}", file=sys.stderr, flush=True)
            raise PortBindConflict(input_port) from exc
        sock.settimeout(0.2)
        reply_to = (host, output_port)
        last_traffic = time.monotonic()
        while not controller.done:
            try:
                frame, addr = sock.recvfrom(65536)
            except socket.timeout:
                if time.monotonic() - last_traffic > idle_timeout:
                    print(f"EVENT error=idle_timeout instance={controller.vehicle_id}",
                          file=sys.stderr, flush=True)
                    return EXIT_IDLE_TIMEOUT
                continue
            last_traffic = time.monotonic()
            msg = decode_frame(frame)
            if isinstance(msg, Shutdown):
                controller.handle_shutdown()
                continue
            if not isinstance(msg, StateReport):
                raise ProtocolError(f"unexpected message type {type(msg).__name__}")
            reply_to = addr
            cmd = controller.handle(msg)
            sock.sendto(encode_actuator_command(cmd), reply_to)
        return EXIT_OK
    finally:
        sock.close()


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swarmlink-autopilot",
        description="Single-vehicle autopilot process.",
    )
    parser.add_argument("--instance", type=int, required=True,
                        help="vehicle id, 0-based")
    parser.add_argument("--input-port", type=int, required=True,
                        help="UDP port to bind for incoming state reports")
    parser.add_argument("--output-port", type=int, required=True,
                        help="UDP port the simulator listens on for this vehicle")
    parser.add_argument("--seed", type=int, required=True,
                        help="experiment seed; fixes the entry heading")
    parser.add_argument("--config", type=str, default=None,
                        help="INI file with control parameters")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)

    flocking = None
    z_target = 10.0
    takeoff_kp = 2.0
    takeoff_kd = 2.8
    a_max = 5.0
    eps_h = DEFAULT_EPS_H
    idle_timeout = 10.0
    if args.config is not None:
        from .config import load_config

        cfg = load_config(args.config)
        flocking = cfg.flocking
        z_target = cfg.z_target
        takeoff_kp = cfg.takeoff_kp
        takeoff_kd = cfg.takeoff_kd
        a_max = cfg.dynamics.a_max
        eps_h = cfg.eps_h
        idle_timeout = cfg.idle_timeout

    controller = AutopilotController(
        args.instance,
        args.seed,
        flocking=flocking,
        z_target=z_target,
        takeoff_kp=takeoff_kp,
        takeoff_kd=takeoff_kd,
        a_max=a_max,
        eps_h=eps_h,
        event_sink=sys.stderr,
    )
    try:
        return run_autopilot(
            controller, args.input_port, args.output_port,
            idle_timeout=idle_timeout,
        )
    except PortBindConflict:
        return EXIT_PORT_CONFLICT
    except ProtocolError as exc:
        print(f"EVENT error=protocol detail={exc!r} instance={args.instance}",
              file=sys.stderr, flush=True)
        return EXIT_PROTOCOL_ERROR


if __name__ == "__main__":
    sys.exit(main())
