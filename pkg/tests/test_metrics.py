from __future__ import annotations

import math
import random

import pytest

from swarmlink.metrics import (
    DEFAULT_EPS_H,
    MalformedLog,
    MetricsStream,
    StateRow,
    avg_speed,
    center_velocity_norm,
    compute_metrics_timeseries,
    final_third,
    fmt_float,
    geometric_center,
    heading_from_velocity,
    initial_heading,
    order_metric,
    read_metrics_csv,
    read_state_log,
    write_metrics_csv,
)


class TestOrderMetric:
    def test_identical_headings_give_one(self):
        for h in (0.0, 1.3, -2.0):
            assert order_metric([h] * 7) == pytest.approx(1.0)

    def test_evenly_spread_headings_give_zero(self):
        for n in (2, 3, 5, 8):
            headings = [math.tau * k / n for k in range(n)]
            assert order_metric(headings) == pytest.approx(0.0, abs=1e-12)

    def test_two_headings_formula(self):
        rng = random.Random(2)
        for _ in range(1000):
            a, b = rng.uniform(-10, 10), rng.uniform(-10, 10)
            expect = abs(math.cos((a - b) / 2.0))
            assert order_metric([a, b]) == pytest.approx(expect, abs=1e-12)

    def test_bounds(self):
        rng = random.Random(3)
        for _ in range(1000):
            headings = [rng.uniform(-10, 10) for _ in range(rng.randrange(1, 9))]
            psi = order_metric(headings)
            assert 0.0 <= psi <= 1.0 + 1e-12

    def test_single_vehicle_is_one(self):
        assert order_metric([0.7]) == pytest.approx(1.0)


class TestVelocityMetrics:
    def test_avg_speed_hand_case(self):
        vs = [(3.0, 4.0, 0.0), (0.0, 0.0, 0.0)]
        assert avg_speed(vs) == pytest.approx(2.5)

    def test_opposed_velocities_distinguish_the_readings(self):
        vs = [(1.0, 0.0, 0.0), (-1.0, 0.0, 0.0)]
        assert avg_speed(vs) == pytest.approx(1.0)
        assert center_velocity_norm(vs) == pytest.approx(0.0)

    def test_aligned_velocities_agree(self):
        vs = [(1.0, 2.0, 2.0)] * 4
        assert avg_speed(vs) == pytest.approx(3.0)
        assert center_velocity_norm(vs) == pytest.approx(3.0)

    def test_center_norm_never_exceeds_avg_speed(self):
        rng = random.Random(4)
        for _ in range(1000):
            vs = [tuple(rng.uniform(-5, 5) for _ in range(3))
                  for _ in range(rng.randrange(1, 7))]
            assert center_velocity_norm(vs) <= avg_speed(vs) + 1e-12

    def test_geometric_center(self):
        ps = [(0.0, 0.0, 0.0), (2.0, 4.0, 6.0)]
        assert geometric_center(ps) == pytest.approx((1.0, 2.0, 3.0))


class TestHeadingRetention:
    def test_fast_motion_updates(self):
        h = heading_from_velocity((1.0, 1.0, 0.0), 0.0)
        assert h == pytest.approx(math.pi / 4)

    def test_slow_motion_retains(self):
        v = (0.02, 0.02, 0.0)
        assert math.hypot(v[0], v[1]) < DEFAULT_EPS_H
        assert heading_from_velocity(v, 2.5) == 2.5

    def test_threshold_is_inclusive(self):
        v = (DEFAULT_EPS_H, 0.0, 0.0)
        assert heading_from_velocity(v, 2.5) == pytest.approx(0.0)

    def test_vertical_speed_ignored(self):
        assert heading_from_velocity((0.0, 0.0, 3.0), 1.0) == 1.0

    def test_initial_headings_spread_evenly(self):
        n = 8
        headings = [initial_heading(k, n) for k in range(n)]
        assert order_metric(headings) == pytest.approx(0.0, abs=1e-12)
        assert headings[0] == 0.0


def make_rows(tick, time, states):
    return [StateRow(tick, time, k, p, v) for k, (p, v) in enumerate(states)]


class TestTimeseries:
    def test_stream_matches_offline(self):
        rng = random.Random(5)
        rows = []
        for tick in range(30):
            rows.extend(make_rows(tick, tick * 0.02, [
                (tuple(rng.uniform(-9, 9) for _ in range(3)),
                 tuple(rng.uniform(-3, 3) for _ in range(3)))
                for _ in range(4)
            ]))
        offline = compute_metrics_timeseries(rows)
        stream = MetricsStream(4)
        online = []
        for tick in range(30):
            block = rows[tick * 4:(tick + 1) * 4]
            online.append(stream.push(tick, tick * 0.02, block))
        assert online == offline

    def test_retention_across_ticks(self):
        moving = [((0.0, 0.0, 0.0), (1.0, 0.0, 0.0))]
        hovering = [((0.0, 0.0, 0.0), (0.0, 0.0, 0.0))]
        rows = make_rows(0, 0.0, moving) + make_rows(1, 0.02, hovering)
        samples = compute_metrics_timeseries(rows)
        assert samples[1].order == pytest.approx(1.0)

    def test_non_monotone_tick_rejected(self):
        rows = make_rows(1, 0.02, [((0, 0, 0), (0, 0, 0))]) + \
            make_rows(0, 0.0, [((0, 0, 0), (0, 0, 0))])
        with pytest.raises(MalformedLog):
            compute_metrics_timeseries(rows)

    def test_missing_vehicle_named(self):
        rows = make_rows(0, 0.0, [((0, 0, 0), (0, 0, 0)), ((1, 0, 0), (0, 0, 0))])
        rows += make_rows(1, 0.02, [((0, 0, 0), (0, 0, 0))])
        with pytest.raises(MalformedLog, match="vehicle 1.*tick 1"):
            compute_metrics_timeseries(rows)

    def test_empty_log_gives_no_samples(self):
        assert compute_metrics_timeseries([]) == []


class TestCsv:
    def test_float_format(self):
        assert fmt_float(0.0) == "0"
        assert fmt_float(1.5) == "1.5"
        assert fmt_float(1.0 / 3.0) == "0.333333333"
        assert fmt_float(-2.0) == "-2"

    def test_metrics_roundtrip(self, tmp_path):
        rng = random.Random(6)
        rows = []
        for tick in range(20):
            rows.extend(make_rows(tick, tick * 0.02, [
                (tuple(rng.uniform(-9, 9) for _ in range(3)),
                 tuple(rng.uniform(-3, 3) for _ in range(3)))
                for _ in range(3)
            ]))
        samples = compute_metrics_timeseries(rows)
        path = tmp_path / "metrics.csv"
        write_metrics_csv(samples, path)
        back = read_metrics_csv(path)
        assert len(back) == len(samples)
        for a, b in zip(back, samples):
            assert a.tick == b.tick
            assert a.order == pytest.approx(b.order, abs=1e-8)

    def test_written_bytes_are_stable(self, tmp_path):
        rows = make_rows(0, 0.0, [((1, 2, 3), (0.5, 0, 0))])
        samples = compute_metrics_timeseries(rows)
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_metrics_csv(samples, p1)
        write_metrics_csv(samples, p2)
        assert p1.read_bytes() == p2.read_bytes()
        assert b"\r" not in p1.read_bytes()

    def test_state_log_rejects_bad_header(self, tmp_path):
        path = tmp_path / "states.csv"
        path.write_text("tick,nope\n1,2\n")
        with pytest.raises(MalformedLog):
            read_state_log(path)

    def test_state_log_rejects_bad_float(self, tmp_path):
        path = tmp_path / "states.csv"
        path.write_text(
            "tick,time,vehicle_id,px,py,pz,vx,vy,vz\n0,0,0,1,2,zzz,0,0,0\n"
        )
        with pytest.raises(MalformedLog):
            read_state_log(path)


class TestFinalThird:
    def test_exact_thirds(self):
        xs = list(range(9))
        assert list(final_third(xs)) == [6, 7, 8]

    def test_rounding_up(self):
        assert len(final_third(list(range(10)))) == 4
        assert len(final_third(list(range(11)))) == 4

    def test_single_sample(self):
        assert list(final_third([42])) == [42]
