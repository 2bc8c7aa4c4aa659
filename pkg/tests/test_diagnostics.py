import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netflow.diagnostics import (
    IntersectionSeries,
    Phase,
    SeriesError,
    TestLine,
    area_rate,
    certify_monotone,
    expected_area_rate,
    run_report,
    sample_i,
)
from netflow.flow import Event, SymmetricState
from netflow.geometry import Axis, DiscreteCurve, NetworkType, SymmetricNetwork, count_line_intersections, reconstruct_full
from netflow.presets import build_preset
from netflow.transitions import EventLog, EventRecord


def series(rows, angle=math.pi / 4):
    s = IntersectionSeries(angle)
    for row in rows:
        t, i = row[:2]
        s.append(t, i, row[2] if len(row) > 2 else False)
    return s


def log_with(type0=(), end=None):
    log = EventLog()
    for t in type0:
        log.append(EventRecord(t, Event.TYPE0, NetworkType.THETA, NetworkType.EYEGLASSES))
    if end is not None:
        log.append(EventRecord(end, Event.BLOWUP, NetworkType.EYEGLASSES))
    return log


# -- test line ------------------------------------------------------------------


@pytest.mark.parametrize("angle", [math.pi / 6, math.pi / 3, 0.1, 1.2])
def test_line_angle_range(angle):
    with pytest.raises(ValueError):
        TestLine(angle)


def test_line_avoids_anchor():
    p = np.array([[0.5, 0.0], [0.75, 0.5], [1.0, 1.0]])
    net = SymmetricNetwork(DiscreteCurve(p), NetworkType.TREE, Axis.X1, p[-1])
    with pytest.raises(ValueError, match="anchor"):
        TestLine(math.pi / 4).check_network(net)
    TestLine(math.pi / 3.5).check_network(net)


# -- sampling ---------------------------------------------------------------------


def test_theta_preset_count():
    c = sample_i(SymmetricState(build_preset(NetworkType.THETA)), TestLine())
    assert c.count == 1


def test_curve_above_line():
    p = np.array([[0.0, 0.2], [0.1, 0.5], [0.2, 1.0]])
    net = SymmetricNetwork(DiscreteCurve(p), NetworkType.THETA, Axis.X2)
    assert sample_i(net, TestLine()).count == 0


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0.05, 2.0), min_size=3, max_size=12), st.floats(0.55, 1.0))
def test_reflection_consistency(radii, angle):
    # a wiggly first-quadrant arc; its four mirror images crossed by the line and its mirror
    th = np.linspace(0, math.pi / 2, len(radii))
    p = np.column_stack([np.array(radii) * np.cos(th), np.array(radii) * np.sin(th)])
    p[0, 1] = 0.0
    p[-1, 0] = 0.0
    net = SymmetricNetwork(DiscreteCurve(p, validate=False), NetworkType.THETA, Axis.X1)
    i = count_line_intersections(p, angle, tol=1e-12).count
    total = sum(count_line_intersections(arc.points, a, tol=1e-12).count
                for arc in reconstruct_full(net).arcs for a in (angle, math.pi - angle))
    assert total == 4 * i


# -- series ----------------------------------------------------------------------


def test_series_rules_and_text():
    s = series([(0, 3), (0.5, 2, True), (1.0, 2)])
    with pytest.raises(ValueError):
        s.append(1.0, 1, False)
    with pytest.raises(ValueError):
        s.append(2.0, -1, False)
    back = IntersectionSeries.from_text(s.to_text())
    assert back.angle == s.angle and back.samples == s.samples
    assert s.to_text().splitlines()[1] == "t,i,tangency"


# -- certification ----------------------------------------------------------------


def test_spec_example_passes():
    cert = certify_monotone(series([(0, 3), (1, 3), (2, 2), (3, 2)]), log_with([1.5]))
    assert cert.passed and cert.n_type0 == 1


def test_increase_fails_clause_a():
    cert = certify_monotone(series([(0, 2), (1, 3), (2, 3)]), log_with())
    assert not cert.passed and [v.clause for v in cert.violations] == ["a"]
    assert cert.violations[0].t == 1


def test_constant_across_collision_fails_clause_b():
    cert = certify_monotone(series([(0, 2), (1, 2), (2, 2)]), log_with([1.5]))
    assert [v.clause for v in cert.violations] == ["b"]


def test_drop_without_tangency_fails_clause_c():
    rows = [(k, 3) for k in range(5)] + [(5, 2)] + [(k, 2) for k in range(6, 10)]
    assert [v.clause for v in certify_monotone(series(rows), log_with()).violations] == ["c"]
    rows[3] = (3, 3, True)  # flagged two samples before the drop
    assert certify_monotone(series(rows), log_with()).passed


def test_sample_at_collision_time_belongs_before():
    cert = certify_monotone(series([(0, 2), (1, 2), (2, 1)]), log_with([1.0]))
    assert cert.passed


def test_series_log_mismatch():
    with pytest.raises(SeriesError):
        certify_monotone(series([(0, 2), (1, 1)]), log_with([3.0]))
    with pytest.raises(SeriesError):
        certify_monotone(series([(0, 2), (1, 2)]), log_with(end=0.5))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 2), min_size=2, max_size=40), st.integers(3, 8))
def test_nonincreasing_with_flags_passes(drops, start):
    rows, i = [], start
    for k, d in enumerate(drops):
        d = min(d, i)
        i -= d
        rows.append((float(k), i, d > 0))
    assert certify_monotone(series(rows), log_with()).passed


# -- reports ---------------------------------------------------------------------


def test_expected_rates():
    assert expected_area_rate(NetworkType.THETA) == pytest.approx(4 * math.pi / 3)
    assert expected_area_rate(NetworkType.LENS) == pytest.approx(4 * math.pi / 3)
    assert expected_area_rate(NetworkType.EYEGLASSES) == pytest.approx(5 * math.pi / 3)


def test_area_rate_middle_window():
    t = np.linspace(0, 1, 101)
    a = 3.0 - 2.0 * t
    a[:10] += 0.5  # start and end transients fall outside the window
    a[-10:] -= 0.5
    rate, window, m = area_rate(t, a)
    assert rate == pytest.approx(2.0) and window == pytest.approx((0.2, 0.8)) and m == 61


def test_run_report_aggregates():
    ph0, ph1 = Phase(NetworkType.THETA), Phase(NetworkType.EYEGLASSES, t_singular=1.0, delta0=0.01)
    for t in np.linspace(0, 0.9, 30):
        ph0.add(t, 1 - t, 2.0 - 4 * math.pi / 3 * t)
    for t in np.linspace(1.1, 1.9, 30):
        ph1.add(t, t - 1, 1.0 - 5 * math.pi / 3 * (t - 1.1))
    log = log_with([1.0], end=2.0)
    rep = run_report([ph0, ph1], log, [series([(0, 1), (0.5, 1), (1.5, 0), (2.0, 0)])])
    assert rep.n_type0 == 1 and rep.terminal == "Blowup" and rep.terminal_net_type == "eyeglasses"
    assert rep.T == 2.0 and rep.monotone
    assert [r.net_type for r in rep.area_rates] == ["theta", "eyeglasses"]
    assert all(r.rel_error < 1e-9 for r in rep.area_rates)
    assert '"monotone": true' in rep.to_json()
