"""Shared, cached extended runs for the test modules.

Full runs take seconds each, so every (preset, resolution) pair is run
once per session and reused by the unit tests and the acceptance suite.
"""

from __future__ import annotations

import inspect
import math
import time
from functools import lru_cache, wraps

import numpy as np

from netflow.flow import Event, SolverConfig, SymmetricState, network_diameter, prepare, run_until_event
from netflow.geometry import NetworkType
from netflow.presets import build_preset
from netflow.runner import RunSpec, run_extended

ANGLES = (math.pi / 4, math.pi / 3.5)
RESOLUTIONS = (200, 400)

# anchors (first quadrant) of the tree runs; None is the preset default
TALL = (0.5, 1.5)
STEINER_ANCHORS = (None, (1.2, 1.0))


# seconds spent computing each cached result, and their running total
COST: dict = {}
COMPUTED = [0.0]


def costed(fn):
    """``lru_cache`` that also records how long each miss took."""

    @lru_cache(maxsize=None)
    def inner(*args):
        t0 = time.perf_counter()
        out = fn(*args)
        dt = time.perf_counter() - t0
        COST[(fn.__name__,) + args] = dt
        COMPUTED[0] += dt
        return out

    sig = inspect.signature(fn)

    def normal(*args, **kw):
        b = sig.bind(*args, **kw)
        b.apply_defaults()
        return tuple(b.arguments.values())

    @wraps(fn)
    def outer(*args, **kw):
        return inner(*normal(*args, **kw))

    outer.key = lambda *args, **kw: (fn.__name__,) + normal(*args, **kw)
    return outer


@costed
def extended(preset: str, n: int = 200, anchor=None, delta0: float | None = None):
    """Extended run sampled at both test angles."""
    spec = RunSpec(
        preset=NetworkType(preset),
        anchor=anchor,
        solver=SolverConfig(n_points=n, delta0=delta0),
        line_angle=ANGLES[0],
        extra_angles=ANGLES[1:],
    )
    return run_extended(spec)


@costed
def collision(preset: str, n: int = 200, anchor=None):
    """First Type0 state of a preset and the junction speed just before it."""
    net = build_preset(NetworkType(preset), anchor=anchor, junction=0.3 if anchor == TALL else None, n_points=n)
    cfg = SolverConfig(n_points=n).resolved(network_diameter(net))
    hist = []
    res = run_until_event(prepare(SymmetricState(net), cfg), cfg, lambda s, k: hist.append((s.t, s.net.junction_distance)))
    assert res.event is Event.TYPE0, res.event
    (t1, d1), (t2, d2) = hist[-2:]
    return res, cfg, (d1 - d2) / (t2 - t1)


def circle(n: int, r: float = 1.0, jitter: float = 0.0, seed: int = 0) -> np.ndarray:
    th = np.linspace(0.0, 2.0 * np.pi, n, endpoint=False)
    if jitter:
        th = th + jitter * (2 * np.pi / n) * np.sin(3 * th + seed)
    return r * np.column_stack([np.cos(th), np.sin(th)])
