"""Command line front end.

    swarmlink run      drive a full experiment and write its artifacts
    swarmlink metrics  recompute swarm metrics offline from a state log
    swarmlink ports    print the datagram port assignment for a fleet

SWARMLINK_BASE_PORT, when set, shifts the whole port scheme: it replaces
the input-port base and the output-port base becomes that plus one. This
is the supported way to run several experiments side by side on one host.
"""

from __future__ import annotations

import argparse
import os
import sys

from .config import ConfigError, ExperimentConfig, config_overrides, load_config, validate_config
from .errors import PortBindConflict, ProtocolError
from .harness import ChildCrashed, SpawnFailure, run_experiment, run_experiment_loopback
from .metrics import (
    MalformedLog,
    compute_metrics_timeseries,
    read_state_log,
    write_metrics_csv,
)
from .simcore import TickTimeout
from .wire import PortRangeExceeded, allocate_ports

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_PORT_CONFLICT = 2
EXIT_PROTOCOL_ERROR = 3
EXIT_TIMEOUT = 4

ENV_BASE_PORT = "SWARMLINK_BASE_PORT"


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swarmlink",
        description="Deterministic lockstep multi-vehicle flocking simulator.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment")
    run.add_argument("--config", help="INI config file; defaults apply without it")
    run.add_argument("--seed", type=int, help="override the experiment seed")
    run.add_argument("--n-vehicles", type=int, help="override the fleet size")
    run.add_argument("--duration", type=float, help="override simulated seconds")
    run.add_argument("--output-dir", help="override the artifact directory")
    run.add_argument("--hold-last", action="store_true",
                     help="reuse a silent vehicle's last command instead of aborting")
    run.add_argument("--loopback", action="store_true",
                     help="run autopilots in-process instead of as child processes")

    met = sub.add_parser("metrics", help="recompute metrics from a state log")
    met.add_argument("states", help="path to a states.csv")
    met.add_argument("-o", "--output", default="-",
                     help="metrics CSV destination; - for stdout (default)")

    ports = sub.add_parser("ports", help="print the port assignment")
    ports.add_argument("n", type=int, help="fleet size")
    ports.add_argument("--base-in", type=int, default=9002)
    ports.add_argument("--base-out", type=int, default=9003)
    ports.add_argument("--stride", type=int, default=10)
    return parser


def _apply_env_base_port(config: ExperimentConfig) -> ExperimentConfig:
    raw = os.environ.get(ENV_BASE_PORT)
    if raw is None:
        return config
    try:
        base = int(raw)
    except ValueError:
        raise ConfigError(f"{ENV_BASE_PORT} must be an integer, got {raw!r}")
    return config_overrides(config, base_in=base, base_out=base + 1)


def _cmd_run(args) -> int:
    if args.config is not None:
        config = load_config(args.config)
    else:
        config = validate_config(ExperimentConfig())
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.n_vehicles is not None:
        overrides["n_vehicles"] = args.n_vehicles
    if args.duration is not None:
        overrides["duration"] = args.duration
    if args.output_dir is not None:
        overrides["output_dir"] = args.output_dir
    if args.hold_last:
        overrides["hold_last"] = True
    if overrides:
        config = config_overrides(config, **overrides)
    config = _apply_env_base_port(config)

    runner = run_experiment_loopback if args.loopback else run_experiment
    report = runner(config)
    s = report.summary
    print(
        f"run complete: {s['n_vehicles']} vehicles, seed {s['seed']}, "
        f"{s['ticks']} ticks in {s['wall_time_s']:.2f}s wall; "
        f"final-third order {s['order_final_third_mean']:.4f} "
        f"({'converged' if s['converged'] else 'not converged'})"
    )
    print(f"artifacts in {report.output_dir}")
    return EXIT_OK


def _cmd_metrics(args) -> int:
    rows = read_state_log(args.states)
    samples = compute_metrics_timeseries(rows)
    if args.output == "-":
        from .metrics import METRICS_HEADER, fmt_float

        sys.stdout.write(",".join(METRICS_HEADER) + "\n")
        for s in samples:
            sys.stdout.write(
                ",".join([
                    str(s.tick), fmt_float(s.time), fmt_float(s.order),
                    fmt_float(s.vs_avg_speed), fmt_float(s.vs_center_norm),
                    fmt_float(s.center[0]), fmt_float(s.center[1]), fmt_float(s.center[2]),
                ]) + "\n"
            )
    else:
        write_metrics_csv(samples, args.output)
        print(f"wrote {len(samples)} samples to {args.output}")
    return EXIT_OK


def _cmd_ports(args) -> int:
    base_in, base_out = args.base_in, args.base_out
    raw = os.environ.get(ENV_BASE_PORT)
    if raw is not None:
        base_in = int(raw)
        base_out = base_in + 1
    print("instance,input_port,output_port")
    for k in range(args.n):
        pp = allocate_ports(k, base_in, base_out, args.stride)
        print(f"{pp.instance},{pp.input_port},{pp.output_port}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "metrics":
            return _cmd_metrics(args)
        return _cmd_ports(args)
    except PortBindConflict as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PORT_CONFLICT
    except PortRangeExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except ProtocolError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL_ERROR
    except TickTimeout as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TIMEOUT
    except (ConfigError, MalformedLog, SpawnFailure, ChildCrashed, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
