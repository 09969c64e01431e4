"""Unit tests for metrics parsing and figure rendering."""

import hashlib

import pytest

pytest.importorskip("swarmplots", reason="plots package not installed")

from swarmplots import (
    METRICS_COLUMNS,
    EmptyInput,
    FigureSpec,
    SchemaError,
    read_metrics,
    render_all,
)
from swarmplots.render import (
    build_order_figure,
    build_trajectory_figure,
    build_velocity_figure,
)

import matplotlib.pyplot as plt


def sha256(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


class TestFigureSpec:
    def test_output_paths_follow_format(self, tmp_path):
        spec = FigureSpec(tmp_path / "m.csv", tmp_path / "out", fmt="svg")
        assert spec.trajectory_path.name == "trajectory.svg"
        assert spec.order_path.name == "order.svg"
        assert spec.velocity_path.name == "velocity.svg"

    def test_rejects_unknown_format(self, tmp_path):
        with pytest.raises(ValueError, match="fmt"):
            FigureSpec(tmp_path / "m.csv", tmp_path / "out", fmt="pdf")


class TestReadMetrics:
    def test_parses_columns(self, metrics_csv):
        columns = read_metrics(metrics_csv)
        assert set(columns) == set(METRICS_COLUMNS)
        assert len(columns["tick"]) == 400
        assert columns["tick"][0] == 0.0
        assert columns["time"][1] == pytest.approx(0.02)

    def test_missing_column_named(self, tmp_path):
        path = tmp_path / "m.csv"
        header = [c for c in METRICS_COLUMNS if c != "order"]
        path.write_text(",".join(header) + "\n" + "0," * (len(header) - 1) + "0\n")
        with pytest.raises(SchemaError, match="order"):
            read_metrics(path)

    def test_renamed_column_rejected(self, tmp_path):
        path = tmp_path / "m.csv"
        header = [c if c != "order" else "alignment" for c in METRICS_COLUMNS]
        path.write_text(",".join(header) + "\n")
        with pytest.raises(SchemaError, match="order"):
            read_metrics(path)

    def test_reordered_columns_rejected(self, tmp_path):
        path = tmp_path / "m.csv"
        header = list(METRICS_COLUMNS)
        header[0], header[1] = header[1], header[0]
        path.write_text(",".join(header) + "\n0,0,0,0,0,0,0,0\n")
        with pytest.raises(SchemaError):
            read_metrics(path)

    def test_empty_file_is_schema_error(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text("")
        with pytest.raises(SchemaError, match="header"):
            read_metrics(path)

    def test_header_only_is_empty_input(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text(",".join(METRICS_COLUMNS) + "\n")
        with pytest.raises(EmptyInput):
            read_metrics(path)

    def test_short_row_rejected(self, tmp_path):
        path = tmp_path / "m.csv"
        path.write_text(",".join(METRICS_COLUMNS) + "\n1,2,3\n")
        with pytest.raises(SchemaError, match=":2:"):
            read_metrics(path)

    def test_bad_value_names_column_and_line(self, tmp_path):
        path = tmp_path / "m.csv"
        row = ["0"] * len(METRICS_COLUMNS)
        row[2] = "high"
        path.write_text(",".join(METRICS_COLUMNS) + "\n" + ",".join(row) + "\n")
        with pytest.raises(SchemaError, match="order"):
            read_metrics(path)


class TestRenderAll:
    def test_produces_three_nonempty_files(self, metrics_csv, tmp_path):
        spec = FigureSpec(metrics_csv, tmp_path / "out")
        paths = render_all(spec)
        assert len(paths) == 3
        for path in paths:
            assert path.exists()
            assert path.stat().st_size > 0

    @pytest.mark.parametrize("fmt", ["png", "svg"])
    def test_repeated_render_is_byte_identical(self, metrics_csv, tmp_path, fmt):
        first = render_all(FigureSpec(metrics_csv, tmp_path / "a", fmt=fmt))
        second = render_all(FigureSpec(metrics_csv, tmp_path / "b", fmt=fmt))
        for p1, p2 in zip(first, second):
            assert sha256(p1) == sha256(p2), p1.name

    def test_input_not_mutated(self, metrics_csv, tmp_path):
        before = metrics_csv.read_bytes()
        render_all(FigureSpec(metrics_csv, tmp_path / "out"))
        assert metrics_csv.read_bytes() == before

    def test_single_row_renders(self, make_metrics, tmp_path):
        path = make_metrics(1)
        paths = render_all(FigureSpec(path, tmp_path / "out"))
        for p in paths:
            assert p.stat().st_size > 0

    def test_missing_column_propagates(self, tmp_path):
        path = tmp_path / "m.csv"
        header = [c for c in METRICS_COLUMNS if c != "cz"]
        path.write_text(",".join(header) + "\n")
        with pytest.raises(SchemaError, match="cz"):
            render_all(FigureSpec(path, tmp_path / "out"))

    def test_creates_output_directory(self, metrics_csv, tmp_path):
        out = tmp_path / "nested" / "dirs"
        render_all(FigureSpec(metrics_csv, out))
        assert out.is_dir()


class TestFigureContracts:
    def test_order_axis_spans_metric_range(self, metrics_csv):
        fig = build_order_figure(read_metrics(metrics_csv))
        try:
            assert fig.axes[0].get_ylim() == (0.0, 1.05)
        finally:
            plt.close(fig)

    def test_velocity_legend_names_both_series(self, metrics_csv):
        fig = build_velocity_figure(read_metrics(metrics_csv))
        try:
            legend = fig.axes[0].get_legend()
            labels = {t.get_text() for t in legend.get_texts()}
            assert labels == {"vs_avg_speed", "vs_center_norm"}
        finally:
            plt.close(fig)

    def test_trajectory_is_3d_with_start_marker(self, metrics_csv):
        fig = build_trajectory_figure(read_metrics(metrics_csv))
        try:
            ax = fig.axes[0]
            assert ax.name == "3d"
            labels = {t.get_text() for t in ax.get_legend().get_texts()}
            assert "start" in labels
        finally:
            plt.close(fig)
