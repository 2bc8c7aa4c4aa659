import math

import numpy as np
import pytest

from helpers import TALL, collision
from netflow.flow import Event, SolverConfig, SymmetricState, network_diameter
from netflow.geometry import Axis, DiscreteCurve, NetworkType, SymmetricNetwork
from netflow.presets import build_preset
from netflow.transitions import (
    TYPE_AFTER,
    EventLog,
    EventRecord,
    LimitClass,
    TransitionError,
    classify_limit,
    fit_expander_bound,
    fit_restart,
    hausdorff,
    network_points,
    standard_transition,
    steiner_junction,
)

SQRT3 = math.sqrt(3.0)


def segment_net(junction, anchor, n=80):
    """Straight tree from a junction on the x1-axis to an anchor."""
    p = np.linspace([junction, 0.0], anchor, n)
    return SymmetricNetwork(DiscreteCurve(p), NetworkType.TREE, Axis.X1, anchor)


# -- type map and event log ----------------------------------------------------------


def test_type_map_is_involution():
    for t in (NetworkType.THETA, NetworkType.EYEGLASSES):
        assert TYPE_AFTER[TYPE_AFTER[t]] is t
    assert TYPE_AFTER[NetworkType.TREE] is NetworkType.TREE
    assert NetworkType.LENS not in TYPE_AFTER


def test_event_log_rules_and_roundtrip():
    log = EventLog()
    log.append(EventRecord(0.5, Event.TYPE0, NetworkType.THETA, NetworkType.EYEGLASSES))
    with pytest.raises(ValueError):
        log.append(EventRecord(0.5, Event.TYPE0, NetworkType.EYEGLASSES, NetworkType.THETA))
    log.append(EventRecord(0.9, Event.BLOWUP, NetworkType.EYEGLASSES))
    assert log.T == 0.9 and log.type0_times == [0.5]
    with pytest.raises(ValueError):
        log.append(EventRecord(1.0, Event.TYPE0, NetworkType.EYEGLASSES))
    back = EventLog.from_json(log.to_json())
    assert back.T == log.T and back.events == log.events


# -- standard transition ----------------------------------------------------------


def test_theta_becomes_eyeglasses():
    res, cfg, speed = collision("theta")
    rs = standard_transition(res.state, cfg, junction_speed=speed)
    net = rs.state.net
    assert net.net_type is NetworkType.EYEGLASSES
    assert net.junction_axis is Axis.X2
    # the discrete tangent condition moves the junction by a fraction of a mesh cell
    assert net.junction_distance == pytest.approx(rs.delta0, rel=1e-3)
    assert rs.state.t > rs.t_singular >= res.state.t
    assert hausdorff(network_points(res.state.net), network_points(net)) <= 2 * rs.delta0


def test_tree_stays_tree():
    res, cfg, speed = collision("tree", 200, TALL)
    rs = standard_transition(res.state, cfg, junction_speed=speed)
    assert rs.state.net.net_type is NetworkType.TREE
    assert rs.state.net.junction_axis is Axis.X2
    assert np.array_equal(rs.state.net.points[-1], res.state.net.anchor)
    assert hausdorff(network_points(res.state.net), network_points(rs.state.net)) <= 2 * rs.delta0
    rs.state.net.validate(geom_tol=cfg.geom_tol, angle_tol=1e-6)


def test_smaller_offset_is_closer():
    res, cfg, speed = collision("tree", 200, TALL)
    a = standard_transition(res.state, cfg, junction_speed=speed)
    b = standard_transition(res.state, cfg, junction_speed=speed, delta0=a.delta0 / 2)
    assert b.state.net.junction_distance == pytest.approx(a.delta0 / 2, rel=1e-3)
    ha = hausdorff(network_points(res.state.net), network_points(a.state.net))
    hb = hausdorff(network_points(res.state.net), network_points(b.state.net))
    assert hb < ha


def test_transition_contract():
    net = build_preset(NetworkType.THETA, n_points=100)
    cfg = SolverConfig(n_points=100)
    with pytest.raises(TransitionError, match="no collision"):
        standard_transition(SymmetricState(net), cfg)
    with pytest.raises(TransitionError, match="lens"):
        standard_transition(SymmetricState(build_preset(NetworkType.LENS, n_points=100)), cfg)


# -- expander fit ----------------------------------------------------------------------


def test_exact_square_root():
    t = np.linspace(0.01, 1.0, 50)
    f = fit_expander_bound(1.0 + t, 0.3 * np.sqrt(t), 1.0)
    assert f.exponent == pytest.approx(0.5, abs=1e-12)
    assert f.c == pytest.approx(0.3, rel=1e-12)
    assert f.passed


def test_perturbed_square_root():
    t = np.linspace(0.001, 1.0, 200)
    d = 0.3 * np.sqrt(t) * (1 + 0.01 * np.sin(50 * t))
    f = fit_expander_bound(t, d, 0.0)
    assert 0.45 <= f.exponent <= 0.55 and f.passed


def test_linear_law_fails():
    t = np.linspace(0.01, 1.0, 40)
    f = fit_expander_bound(t, t, 0.0)
    assert f.exponent == pytest.approx(1.0) and not f.passed


@pytest.mark.parametrize("d", [np.r_[np.linspace(0.1, 0.2, 20), 0.15], -np.linspace(0.1, 0.2, 21)])
def test_fit_rejects(d):
    with pytest.raises(ValueError):
        fit_expander_bound(np.linspace(0.01, 1, len(d)), d, 0.0)


def test_fit_restart_window():
    t = np.linspace(1e-4, 1.0, 400)
    d = 0.5 * np.sqrt(t)
    d[t > 0.3] = 0.5 * np.sqrt(0.3) + (t[t > 0.3] - 0.3)  # a different law later on
    f = fit_restart(t, d, 0.0, delta0=0.02, span=10.0)
    assert f.exponent == pytest.approx(0.5, abs=1e-9)
    assert f.window[1] <= 0.3


# -- long-time limits --------------------------------------------------------------------


def test_steiner_junction_closed_form():
    assert steiner_junction((1.0, 1.0), Axis.X1) == pytest.approx(1 - 1 / SQRT3)
    assert steiner_junction((1.0, math.tan(math.pi / 6)), Axis.X1) == pytest.approx(2 / 3)
    assert steiner_junction((0.5, 1.5), Axis.X1) is None
    assert steiner_junction((0.5, 1.5), Axis.X2) == pytest.approx(1.5 - 0.5 / SQRT3)


def test_classify_steiner():
    # anchors (+-1, +-tan 30deg): the Steiner junction is at 2/3 and the arc is straight at 60 degrees
    anchor = np.array([1.0, math.tan(math.pi / 6)])
    net = segment_net(2 / 3, anchor)
    cfg = SolverConfig(n_points=80).resolved(network_diameter(net))
    assert classify_limit(SymmetricState(net), cfg) is LimitClass.STEINER_TREE


def test_classify_cross():
    net = segment_net(0.0, np.array([0.5, 0.5 * SQRT3]))
    cfg = SolverConfig(n_points=80).resolved(network_diameter(net))
    assert classify_limit(SymmetricState(net), cfg) is LimitClass.STANDARD_CROSS


def test_classify_undecided_and_contract():
    net = build_preset(NetworkType.TREE, n_points=80)  # curved initial arc
    cfg = SolverConfig(n_points=80)
    assert classify_limit(SymmetricState(net), cfg) is LimitClass.UNDECIDED
    with pytest.raises(TransitionError):
        classify_limit(SymmetricState(build_preset(NetworkType.THETA, n_points=80)), cfg)
