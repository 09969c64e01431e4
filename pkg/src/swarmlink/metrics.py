"""Swarm evaluation metrics: order, swarm velocity, geometric center.

The order value of N headings is |sum_k exp(i*theta_k)| / N: 1 for a fully
aligned swarm, near 0 for a disordered one. Headings are taken from the
horizontal velocity components, not from any attitude angle; below a small
horizontal speed the previous heading is retained so hovering vehicles do
not thrash the metric.

Swarm velocity is reported in both of its readings, which disagree whenever
velocities point in different directions:

    vs_avg_speed    mean of the velocity norms
    vs_center_norm  norm of the mean velocity

and vs_center_norm <= vs_avg_speed always (triangle inequality).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .wire import Vec3

# Horizontal speed below which a vehicle's heading is considered undefined
# and the previous value is retained.
DEFAULT_EPS_H = 0.05

STATE_LOG_HEADER = ["tick", "time", "vehicle_id", "px", "py", "pz", "vx", "vy", "vz"]
METRICS_HEADER = ["tick", "time", "order", "vs_avg_speed", "vs_center_norm", "cx", "cy", "cz"]


class EmptySwarm(Exception):
    """A metric over zero vehicles was requested."""


class MalformedLog(Exception):
    """The state log violates its schema or continuity guarantees."""


@dataclass(frozen=True)
class StateRow:
    """One parsed state-log record."""

    tick: int
    time: float
    vehicle_id: int
    position: Vec3
    velocity: Vec3


@dataclass(frozen=True)
class MetricsSample:
    """Metrics for one tick."""

    tick: int
    time: float
    order: float
    vs_avg_speed: float
    vs_center_norm: float
    center: Vec3


def heading_from_velocity(v: Vec3, last: float, eps_h: float = DEFAULT_EPS_H) -> float:
    """Four-quadrant heading of (vx, vy), or `last` below the speed threshold."""
    if math.hypot(v[0], v[1]) >= eps_h:
        return math.atan2(v[1], v[0])
    return last


def order_metric(headings: Sequence[float]) -> float:
    """Magnitude of the mean unit phasor of the headings, in [0, 1]."""
    n = len(headings)
    if n == 0:
        raise EmptySwarm("order metric needs at least one vehicle")
    re = sum(math.cos(t) for t in headings)
    im = sum(math.sin(t) for t in headings)
    return math.hypot(re, im) / n


def avg_speed(velocities: Sequence[Vec3]) -> float:
    """Mean of the velocity norms."""
    n = len(velocities)
    if n == 0:
        raise EmptySwarm("avg_speed needs at least one vehicle")
    return sum(math.sqrt(v[0] ** 2 + v[1] ** 2 + v[2] ** 2) for v in velocities) / n


def center_velocity_norm(velocities: Sequence[Vec3]) -> float:
    """Norm of the mean velocity; vanishes when velocities cancel."""
    n = len(velocities)
    if n == 0:
        raise EmptySwarm("center_velocity_norm needs at least one vehicle")
    mx = sum(v[0] for v in velocities) / n
    my = sum(v[1] for v in velocities) / n
    mz = sum(v[2] for v in velocities) / n
    return math.sqrt(mx * mx + my * my + mz * mz)


def geometric_center(positions: Sequence[Vec3]) -> Vec3:
    """Component-wise mean position."""
    n = len(positions)
    if n == 0:
        raise EmptySwarm("geometric_center needs at least one vehicle")
    return (
        sum(p[0] for p in positions) / n,
        sum(p[1] for p in positions) / n,
        sum(p[2] for p in positions) / n,
    )


def initial_heading(vehicle_id: int, fleet_size: int) -> float:
    """Retained-heading seed used before a vehicle has ever moved.

    Spreads the fleet evenly over the circle (2*pi*k/N) so a fleet that has
    not yet accelerated reads as fully disordered. Derivable from the log
    alone, which keeps offline recomputation self-contained.
    """
    return math.tau * vehicle_id / fleet_size


class MetricsStream:
    """Online per-tick metrics with per-vehicle heading retention.

    Feed complete tick blocks in order; each push returns the sample for
    that tick. Produces exactly the same values as the offline pass over a
    written log, provided the inputs went through the same float printing.
    """

    def __init__(self, fleet_size: int, eps_h: float = DEFAULT_EPS_H):
        if fleet_size < 1:
            raise EmptySwarm("fleet must have at least one vehicle")
        self.fleet_size = fleet_size
        self.eps_h = eps_h
        self._last_headings = [initial_heading(k, fleet_size) for k in range(fleet_size)]

    def push(self, tick: int, time: float, rows: Sequence[StateRow]) -> MetricsSample:
        """Consume one tick block (rows sorted by vehicle_id) and return its sample."""
        headings = []
        for row in rows:
            h = heading_from_velocity(row.velocity, self._last_headings[row.vehicle_id], self.eps_h)
            self._last_headings[row.vehicle_id] = h
            headings.append(h)
        velocities = [row.velocity for row in rows]
        positions = [row.position for row in rows]
        return MetricsSample(
            tick=tick,
            time=time,
            order=order_metric(headings),
            vs_avg_speed=avg_speed(velocities),
            vs_center_norm=center_velocity_norm(velocities),
            center=geometric_center(positions),
        )


def compute_metrics_timeseries(
    rows: Iterable[StateRow], eps_h: float = DEFAULT_EPS_H
) -> list[MetricsSample]:
    """One MetricsSample per tick from an ordered state log.

    Raises:
        MalformedLog: on non-monotone ticks, a fleet that changes between
            ticks, or a missing vehicle row, naming the tick and vehicle.
    """
    blocks: list[tuple[int, float, list[StateRow]]] = []
    for row in rows:
        if blocks and row.tick == blocks[-1][0]:
            blocks[-1][2].append(row)
        elif not blocks or row.tick > blocks[-1][0]:
            blocks.append((row.tick, row.time, [row]))
        else:
            raise MalformedLog(f"non-monotone tick {row.tick} after {blocks[-1][0]}")
    if not blocks:
        return []

    fleet = sorted(r.vehicle_id for r in blocks[0][2])
    if fleet != list(range(len(fleet))):
        raise MalformedLog(f"vehicle ids at tick {blocks[0][0]} are not 0..N-1: {fleet}")
    stream = MetricsStream(len(fleet), eps_h)
    samples = []
    for tick, time, block in blocks:
        ids = [r.vehicle_id for r in block]
        if sorted(ids) != fleet:
            missing = sorted(set(fleet) - set(ids))
            extra = sorted(set(ids) - set(fleet))
            if missing:
                raise MalformedLog(f"vehicle {missing[0]} missing at tick {tick}")
            raise MalformedLog(f"unexpected vehicle {extra[0]} at tick {tick}")
        block = sorted(block, key=lambda r: r.vehicle_id)
        samples.append(stream.push(tick, time, block))
    return samples


def fmt_float(x: float) -> str:
    """Canonical float formatting for all CSV output: 9 significant digits."""
    return "%.9g" % x


def read_state_log(path) -> list[StateRow]:
    """Parse a state-log CSV, validating the header and field types."""
    rows = []
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != STATE_LOG_HEADER:
            raise MalformedLog(f"bad state log header: {header}")
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != len(STATE_LOG_HEADER):
                raise MalformedLog(f"line {lineno}: expected {len(STATE_LOG_HEADER)} fields")
            try:
                rows.append(
                    StateRow(
                        tick=int(rec[0]),
                        time=float(rec[1]),
                        vehicle_id=int(rec[2]),
                        position=(float(rec[3]), float(rec[4]), float(rec[5])),
                        velocity=(float(rec[6]), float(rec[7]), float(rec[8])),
                    )
                )
            except ValueError as exc:
                raise MalformedLog(f"line {lineno}: {exc}") from exc
    return rows


def write_metrics_csv(samples: Sequence[MetricsSample], path) -> None:
    """Write the metrics CSV: one row per tick, floats at 9 significant digits."""
    with open(path, "w", newline="") as fh:
        fh.write(",".join(METRICS_HEADER) + "\n")
        for s in samples:
            fields = [
                str(s.tick),
                fmt_float(s.time),
                fmt_float(s.order),
                fmt_float(s.vs_avg_speed),
                fmt_float(s.vs_center_norm),
                fmt_float(s.center[0]),
                fmt_float(s.center[1]),
                fmt_float(s.center[2]),
            ]
            fh.write(",".join(fields) + "\n")


def read_metrics_csv(path) -> list[MetricsSample]:
    """Parse a metrics CSV written by write_metrics_csv."""
    samples = []
    with open(path, "r", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != METRICS_HEADER:
            raise MalformedLog(f"bad metrics header: {header}")
        for lineno, rec in enumerate(reader, start=2):
            if len(rec) != len(METRICS_HEADER):
                raise MalformedLog(f"line {lineno}: expected {len(METRICS_HEADER)} fields")
            try:
                samples.append(
                    MetricsSample(
                        tick=int(rec[0]),
                        time=float(rec[1]),
                        order=float(rec[2]),
                        vs_avg_speed=float(rec[3]),
                        vs_center_norm=float(rec[4]),
                        center=(float(rec[5]), float(rec[6]), float(rec[7])),
                    )
                )
            except ValueError as exc:
                raise MalformedLog(f"line {lineno}: {exc}") from exc
    return samples


def final_third(samples: Sequence) -> Sequence:
    """The last third of a sample sequence (by count), used for summaries."""
    n = len(samples)
    return samples[(2 * n) // 3 :]
