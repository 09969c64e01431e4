"""Render figures from a swarm metrics CSV.

The input is the metrics file produced by the simulation harness: one row
per tick with the swarm order metric, the two velocity readings, and the
swarm center position.  This package reads that CSV directly and never
imports the simulator.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

# Column names and order of the metrics CSV contract.
METRICS_COLUMNS = (
    "tick",
    "time",
    "order",
    "vs_avg_speed",
    "vs_center_norm",
    "cx",
    "cy",
    "cz",
)

FORMATS = ("png", "svg")

# Fixed render geometry so repeated runs produce byte-identical files.
FIGSIZE = (8.0, 6.0)
DPI = 100

_RC = {
    "figure.figsize": FIGSIZE,
    "figure.dpi": DPI,
    "savefig.dpi": DPI,
    # Stable ids inside SVG output instead of per-process random ones.
    "svg.hashsalt": "swarmlink-plots",
}


class SchemaError(Exception):
    """The metrics CSV does not match the expected column contract."""


class EmptyInput(Exception):
    """The metrics CSV has a header but no data rows."""


@dataclass(frozen=True)
class FigureSpec:
    """What to render: which metrics file, where to, and in which format."""

    metrics_path: Path
    out_dir: Path
    fmt: str = "png"

    def __post_init__(self) -> None:
        if self.fmt not in FORMATS:
            raise ValueError(f"fmt must be one of {FORMATS}, got {self.fmt!r}")
        object.__setattr__(self, "metrics_path", Path(self.metrics_path))
        object.__setattr__(self, "out_dir", Path(self.out_dir))

    @property
    def trajectory_path(self) -> Path:
        return self.out_dir / f"trajectory.{self.fmt}"

    @property
    def order_path(self) -> Path:
        return self.out_dir / f"order.{self.fmt}"

    @property
    def velocity_path(self) -> Path:
        return self.out_dir / f"velocity.{self.fmt}"


def read_metrics(path: Path) -> dict[str, list[float]]:
    """Parse a metrics CSV into per-column value lists.

    Raises SchemaError if the header deviates from the contract (missing
    columns are named in the message) and EmptyInput if no data rows follow.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: no header row") from None
        if header != list(METRICS_COLUMNS):
            missing = [name for name in METRICS_COLUMNS if name not in header]
            if missing:
                raise SchemaError(
                    f"{path}: missing columns: {', '.join(missing)}"
                )
            raise SchemaError(
                f"{path}: expected columns {list(METRICS_COLUMNS)}, got {header}"
            )
        columns: dict[str, list[float]] = {name: [] for name in METRICS_COLUMNS}
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(METRICS_COLUMNS):
                raise SchemaError(
                    f"{path}:{lineno}: expected {len(METRICS_COLUMNS)} fields, "
                    f"got {len(row)}"
                )
            for name, text in zip(METRICS_COLUMNS, row):
                try:
                    columns[name].append(float(text))
                except ValueError:
                    raise SchemaError(
                        f"{path}:{lineno}: bad value for {name}: {text!r}"
                    ) from None
    if not columns["tick"]:
        raise EmptyInput(f"{path}: no data rows")
    return columns


def _series_style(n: int) -> dict:
    # A single-row file has no line segments; draw the lone sample as a dot.
    return {"marker": "o", "markersize": 4} if n == 1 else {}


def build_trajectory_figure(columns: dict[str, list[float]]):
    """3-D curve of the swarm center with the start point marked."""
    fig = plt.figure(figsize=FIGSIZE)
    ax = fig.add_subplot(projection="3d")
    style = _series_style(len(columns["cx"]))
    ax.plot(columns["cx"], columns["cy"], columns["cz"],
            color="tab:blue", linewidth=1.0, **style)
    ax.scatter([columns["cx"][0]], [columns["cy"][0]], [columns["cz"][0]],
               color="tab:red", s=40, depthshade=False, label="start")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_zlabel("z [m]")
    ax.set_title("Swarm center trajectory")
    ax.legend(loc="upper right")
    return fig


def build_order_figure(columns: dict[str, list[float]]):
    """Order metric against time with the full metric range on the y axis."""
    fig, ax = plt.subplots(figsize=FIGSIZE)
    style = _series_style(len(columns["time"]))
    ax.plot(columns["time"], columns["order"], color="tab:blue", **style)
    ax.set_ylim(0.0, 1.05)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("order")
    ax.set_title("Heading order")
    ax.grid(True, alpha=0.3)
    return fig


def build_velocity_figure(columns: dict[str, list[float]]):
    """Both swarm velocity readings against time, with a legend."""
    fig, ax = plt.subplots(figsize=FIGSIZE)
    style = _series_style(len(columns["time"]))
    ax.plot(columns["time"], columns["vs_avg_speed"],
            color="tab:blue", label="vs_avg_speed", **style)
    ax.plot(columns["time"], columns["vs_center_norm"],
            color="tab:orange", label="vs_center_norm", **style)
    ax.set_xlabel("time [s]")
    ax.set_ylabel("speed [m/s]")
    ax.set_title("Swarm velocity")
    ax.legend(loc="best")
    ax.grid(True, alpha=0.3)
    return fig


def _save(fig, path: Path, fmt: str) -> None:
    # SVG embeds a creation date unless suppressed; PNG output is already
    # timestamp free.
    metadata = {"Date": None} if fmt == "svg" else None
    fig.savefig(path, format=fmt, metadata=metadata)
    plt.close(fig)


def render_all(spec: FigureSpec) -> tuple[Path, Path, Path]:
    """Render the trajectory, order, and velocity figures.

    Returns the three output paths.  Output bytes depend only on the input
    CSV and the format, so re-rendering the same file yields identical
    checksums.
    """
    columns = read_metrics(spec.metrics_path)
    spec.out_dir.mkdir(parents=True, exist_ok=True)
    with matplotlib.rc_context(_RC):
        _save(build_trajectory_figure(columns), spec.trajectory_path, spec.fmt)
        _save(build_order_figure(columns), spec.order_path, spec.fmt)
        _save(build_velocity_figure(columns), spec.velocity_path, spec.fmt)
    return spec.trajectory_path, spec.order_path, spec.velocity_path
