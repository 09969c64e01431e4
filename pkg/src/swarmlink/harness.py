"""End-to-end run orchestration: spawn, simulate, collect, summarize.

The harness owns process lifecycle and artifact layout. One run produces,
inside the configured output directory:

    config.ini     complete parameter snapshot the autopilots re-read
    states.csv     per-tick, per-vehicle position and velocity log
    metrics.csv    per-tick swarm metrics recomputed from states.csv
    summary.json   headline numbers and run bookkeeping
    autopilot_<k>.log   stderr of each autopilot process

Metrics are always recomputed from the written states.csv rather than
from in-memory floats, so an offline pass over the same file reproduces
metrics.csv byte for byte.
"""

from __future__ import annotations

import json
import logging
import math
import re
import subprocess
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .config import ExperimentConfig, write_config
from .errors import PortBindConflict
from .loopback import LoopbackChannelSet
from .metrics import (
    MetricsSample,
    compute_metrics_timeseries,
    final_third,
    read_state_log,
    write_metrics_csv,
)
from .simcore import UdpChannelSet, run_simulation
from .autopilot import AutopilotController

log = logging.getLogger(__name__)

_FLOCK_EVENT = re.compile(r"^EVENT mode=flock tick=(\d+) instance=(\d+)$")


class SpawnFailure(Exception):
    """An autopilot process could not be started."""


class ChildCrashed(Exception):
    """An autopilot process exited while the run still needed it."""

    def __init__(self, vehicle_id: int, exit_code: int):
        self.vehicle_id = vehicle_id
        self.exit_code = exit_code
        super().__init__(
            f"autopilot {vehicle_id} exited with code {exit_code} mid-run"
        )


@dataclass(frozen=True)
class ExperimentReport:
    """Artifact paths and headline numbers for one completed run."""

    output_dir: Path
    states_path: Path
    metrics_path: Path
    summary_path: Path
    summary: dict


def min_pairwise_distance(rows) -> float:
    """Smallest inter-vehicle distance anywhere in a state log."""
    best = math.inf
    block: list = []
    tick = None
    for row in list(rows) + [None]:
        if row is not None and row.tick == tick:
            block.append(row)
            continue
        for i in range(len(block)):
            pi = block[i].position
            for j in range(i + 1, len(block)):
                pj = block[j].position
                d = math.dist(pi, pj)
                if d < best:
                    best = d
        if row is None:
            break
        tick = row.tick
        block = [row]
    return best


def _entry_ticks_from_logs(out_dir: Path, n: int) -> list[int | None]:
    ticks: list[int | None] = [None] * n
    for k in range(n):
        path = out_dir / f"autopilot_{k}.log"
        if not path.exists():
            continue
        for line in path.read_text().splitlines():
            m = _FLOCK_EVENT.match(line.strip())
            if m and int(m.group(2)) == k:
                ticks[k] = int(m.group(1))
                break
    return ticks


def _finalize(
    config: ExperimentConfig,
    out_dir: Path,
    states_path: Path,
    entry_ticks: Sequence[int | None],
    wall_time: float,
) -> ExperimentReport:
    rows = read_state_log(states_path)
    samples = compute_metrics_timeseries(rows, config.eps_h)
    metrics_path = out_dir / "metrics.csv"
    write_metrics_csv(samples, metrics_path)

    tail: Sequence[MetricsSample] = final_third(samples)

    def mean(xs):
        return sum(xs) / len(xs) if xs else float("nan")

    order_mean = mean([s.order for s in tail])
    summary = {
        "n_vehicles": config.n_vehicles,
        "seed": config.seed,
        "duration": config.duration,
        "dt": config.dynamics.dt,
        "ticks": config.total_ticks(),
        "order_final_third_mean": order_mean,
        "vs_avg_speed_final_third_mean": mean([s.vs_avg_speed for s in tail]),
        "vs_center_norm_final_third_mean": mean([s.vs_center_norm for s in tail]),
        "converged": bool(order_mean >= 0.9),
        "min_pairwise_distance": min_pairwise_distance(rows),
        "flock_entry_ticks": list(entry_ticks),
        "wall_time_s": wall_time,
    }
    summary_path = out_dir / "summary.json"
    summary_path.write_text(json.dumps(summary, indent=2) + "\n")
    return ExperimentReport(
        output_dir=out_dir,
        states_path=states_path,
        metrics_path=metrics_path,
        summary_path=summary_path,
        summary=summary,
    )


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Full run with one autopilot OS process per vehicle over datagrams.

    Binds the simulator's ports before spawning anything, so a port
    conflict fails fast. Autopilot stderr is captured per vehicle; a child
    that dies mid-run aborts the run with ChildCrashed (or PortBindConflict
    when the child lost its input port).
    """
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    snapshot = write_config(config, out_dir / "config.ini")

    pairs = [config.port_pair(k) for k in range(config.n_vehicles)]
    channels = UdpChannelSet(pairs)

    children: list[subprocess.Popen] = []
    log_handles = []
    start = time.monotonic()

    def watchdog() -> None:
        for k, child in enumerate(children):
            code = child.poll()
            if code is None:
                continue
            if code == 2:
                raise PortBindConflict(pairs[k].input_port)
            raise ChildCrashed(k, code)

    try:
        for pp in pairs:
            handle = open(out_dir / f"autopilot_{pp.instance}.log", "wb")
            log_handles.append(handle)
            argv = [
                sys.executable, "-m", "swarmlink.autopilot",
                "--instance", str(pp.instance),
                "--input-port", str(pp.input_port),
                "--output-port", str(pp.output_port),
                "--seed", str(config.seed),
                "--config", str(snapshot),
            ]
            try:
                children.append(
                    subprocess.Popen(argv, stdout=subprocess.DEVNULL, stderr=handle)
                )
            except OSError as exc:
                raise SpawnFailure(
                    f"cannot start autopilot {pp.instance}: {exc}"
                ) from exc

        states_path = run_simulation(
            config,
            channels=channels,
            watchdog=watchdog,
            states_path=out_dir / "states.csv",
        )

        deadline = time.monotonic() + 5.0
        for k, child in enumerate(children):
            remain = max(0.0, deadline - time.monotonic())
            try:
                code = child.wait(timeout=remain)
            except subprocess.TimeoutExpired:
                child.terminate()
                try:
                    code = child.wait(timeout=2.0)
                except subprocess.TimeoutExpired:
                    child.kill()
                    code = child.wait()
            if code != 0:
                log.warning("autopilot %d exited with code %d at shutdown", k, code)
    finally:
        for child in children:
            if child.poll() is None:
                child.kill()
                child.wait()
        for handle in log_handles:
            handle.close()
        channels.close()

    wall = time.monotonic() - start
    entry_ticks = _entry_ticks_from_logs(out_dir, config.n_vehicles)
    return _finalize(config, out_dir, states_path, entry_ticks, wall)


def run_experiment_loopback(
    config: ExperimentConfig,
    *,
    reorder=None,
    silent_vehicles: Sequence[int] = (),
) -> ExperimentReport:
    """Same run with in-process controllers instead of child processes.

    Produces identical artifacts for identical parameters; used where
    process startup would dominate, and for delivery-order and silence
    fault injection.
    """
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_config(config, out_dir / "config.ini")

    controllers = [
        AutopilotController(
            k,
            config.seed,
            flocking=config.flocking,
            z_target=config.z_target,
            takeoff_kp=config.takeoff_kp,
            takeoff_kd=config.takeoff_kd,
            a_max=config.dynamics.a_max,
            eps_h=config.eps_h,
        )
        for k in range(config.n_vehicles)
    ]
    channels = LoopbackChannelSet(
        controllers, reorder=reorder, silent_vehicles=silent_vehicles
    )
    start = time.monotonic()
    try:
        states_path = run_simulation(
            config, channels=channels, states_path=out_dir / "states.csv"
        )
    finally:
        channels.close()
    wall = time.monotonic() - start
    entry_ticks = [c.flock_entry_tick for c in controllers]
    return _finalize(config, out_dir, states_path, entry_ticks, wall)
