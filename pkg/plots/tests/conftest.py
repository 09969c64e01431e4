"""Shared fixtures for the plots package tests.

Each test module starts with pytest.importorskip, so a tree without the
plots package built still runs the simulator's suite cleanly; this module
therefore only imports the package lazily.
"""

import math
from pathlib import Path

import pytest


def write_metrics(path: Path, rows: list[dict[str, float]]) -> Path:
    """Write a metrics CSV with the contract header and the given rows."""
    from swarmplots import METRICS_COLUMNS

    lines = [",".join(METRICS_COLUMNS)]
    for row in rows:
        lines.append(",".join("%.9g" % row[name] for name in METRICS_COLUMNS))
    path.write_text("\n".join(lines) + "\n")
    return path


def synthetic_rows(n: int) -> list[dict[str, float]]:
    """A plausible run: center spirals upward while order climbs toward 1."""
    rows = []
    for k in range(n):
        t = 0.02 * k
        rows.append({
            "tick": float(k),
            "time": t,
            "order": min(1.0, 1.0 - math.exp(-t / 3.0)),
            "vs_avg_speed": 2.0 * (1.0 - math.exp(-t / 2.0)),
            "vs_center_norm": 1.5 * (1.0 - math.exp(-t / 2.5)),
            "cx": 5.0 * math.cos(t / 4.0),
            "cy": 5.0 * math.sin(t / 4.0),
            "cz": min(10.0, 2.0 * t),
        })
    return rows


@pytest.fixture
def metrics_csv(tmp_path):
    return write_metrics(tmp_path / "metrics.csv", synthetic_rows(400))


@pytest.fixture
def make_metrics(tmp_path):
    """Factory for metrics CSVs with a chosen number of synthetic rows."""
    def make(n: int, name: str = "metrics.csv") -> Path:
        return write_metrics(tmp_path / name, synthetic_rows(n))
    return make
