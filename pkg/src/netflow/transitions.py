"""Junction collisions: restart past them and classify long-time limits.

When the two junctions meet at the origin the network is a standard cross
(four rays at 60 and 120 degrees).  The flow continues with the unique
expanding self-similar network emanating from that cross.  The new edge
lies on the other axis, so the junction axis swaps and the network type
changes theta <-> eyeglasses (trees stay trees).

The expander is computed here by shooting: in the frame where the new
junction sits at ``(0, c)`` on the x2-axis, the profile ``eta`` solves
``k = <eta, nu> / 2`` and must leave the junction at 30 degrees and be
asymptotic to the 60-degree ray.  At time ``tau`` after the collision the
expanding network is ``sqrt(tau) * eta``, so the junction distance grows
like ``c * sqrt(tau)``.
"""

from __future__ import annotations

import enum
import functools
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .flow import (
    Event,
    FlowError,
    SolverConfig,
    SymmetricState,
    _resolved,
    apply_boundary_conditions,
    grading_length,
    max_curvature,
    respace,
)
from .geometry import (
    Axis,
    GeometryError,
    NetworkType,
    SymmetricNetwork,
    angle_between,
    arclength,
    derived_quantities,
    junction_tangent,
    reconstruct_full,
    swap_xy,
)

TYPE_AFTER = {
    NetworkType.TREE: NetworkType.TREE,
    NetworkType.THETA: NetworkType.EYEGLASSES,
    NetworkType.EYEGLASSES: NetworkType.THETA,
}


class TransitionError(ValueError):
    """A transition or classification was requested on the wrong kind of state."""


# --------------------------------------------------------------------------
# event log
# --------------------------------------------------------------------------


@dataclass
class EventRecord:
    t: float
    kind: Event
    net_type_before: NetworkType
    net_type_after: NetworkType | None = None

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "kind": self.kind.value,
            "net_type_before": self.net_type_before.value,
            "net_type_after": None if self.net_type_after is None else self.net_type_after.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EventRecord":
        after = d.get("net_type_after")
        return cls(float(d["t"]), Event(d["kind"]), NetworkType(d["net_type_before"]),
                   None if after is None else NetworkType(after))


TERMINAL = (Event.BLOWUP, Event.CONVERGED, Event.TIMECAP)


@dataclass
class EventLog:
    """Singular times of an extended flow, in order, and the terminal time."""

    events: list = field(default_factory=list)
    T: float | None = None

    def append(self, rec: EventRecord) -> None:
        if self.events and not rec.t > self.events[-1].t:
            raise ValueError("event times must increase strictly")
        if self.events and self.events[-1].kind in TERMINAL:
            raise ValueError("no event may follow a terminal event")
        self.events.append(rec)
        if rec.kind in TERMINAL:
            self.T = rec.t

    @property
    def type0_times(self) -> list[float]:
        return [e.t for e in self.events if e.kind is Event.TYPE0]

    @property
    def terminal(self) -> EventRecord | None:
        if self.events and self.events[-1].kind in TERMINAL:
            return self.events[-1]
        return None

    def to_json(self) -> str:
        return json.dumps({"T": self.T, "events": [e.to_dict() for e in self.events]}, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "EventLog":
        d = json.loads(text)
        log = cls()
        for e in d["events"]:
            log.append(EventRecord.from_dict(e))
        log.T = d.get("T")
        return log


# --------------------------------------------------------------------------
# the expander
# --------------------------------------------------------------------------


def _shoot(c: float, s_end: float = 14.0, dense: bool = False):
    def rhs(s, z):
        x, y, th = z
        return [math.cos(th), math.sin(th), 0.5 * (-x * math.sin(th) + y * math.cos(th))]

    return solve_ivp(rhs, (0.0, s_end), [0.0, c, math.pi / 6], rtol=1e-11, atol=1e-13, dense_output=dense)


@functools.lru_cache(maxsize=None)
def expander_constant() -> float:
    """Junction distance of the standard-cross expander at unit time."""
    return brentq(lambda c: _shoot(c).y[2, -1] - math.pi / 3, 1e-3, 5.0, xtol=1e-14)


@functools.lru_cache(maxsize=None)
def _expander_solution():
    return _shoot(expander_constant(), dense=True)


def expander_profile(radius: float, n: int = 400) -> np.ndarray:
    """Unit-time expander arc from its junction out to distance ``radius``.

    Frame: junction on the x2-axis.  Points are equally spaced in arclength.
    """
    sol = _expander_solution()
    s = np.linspace(0.0, sol.t[-1], 20000)
    xyz = sol.sol(s)
    r = np.hypot(xyz[0], xyz[1])
    if radius >= r[-1]:
        raise ValueError("radius beyond the tabulated expander")
    s_cut = float(np.interp(radius, r, s))
    s = np.linspace(0.0, s_cut, n)
    xyz = sol.sol(s)
    return np.column_stack([xyz[0], xyz[1]])


# --------------------------------------------------------------------------
# standard transition
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Restart:
    """Result of a standard transition."""

    state: SymmetricState
    t_singular: float
    delta0: float


def restart_offset(state: SymmetricState, cfg: SolverConfig, kmax: float | None = None,
                   local_scale: float | None = None) -> float:
    """Junction offset for the restart.

    The configured ``delta0``, reduced to ``local_scale / max|k|`` when the
    network is already small at the collision (as happens for theta
    networks, whose regions shrink together with the bridge).
    """
    cfg = _resolved(state, cfg)
    if kmax is None:
        kmax = max_curvature(state.net)
    if local_scale is None:
        local_scale = cfg.local_scale
    return min(cfg.delta0, local_scale / max(kmax, 1e-300))


def standard_transition(state: SymmetricState, cfg: SolverConfig, junction_speed: float | None = None,
                        delta0: float | None = None, blend_radii: tuple = (2.0, 6.0)) -> Restart:
    """Continue the flow past a junction collision.

    Parameters
    ----------
    state : SymmetricState
        State whose junction is within ``junction_tol`` of the origin.
    cfg : SolverConfig
    junction_speed : float, optional
        Speed at which the junction was approaching the origin.  Used to
        extrapolate the collision time; without it the collision is put
        at ``state.t``.
    delta0 : float, optional
        Junction offset of the restarted network; see :func:`restart_offset`.
    blend_radii : (float, float)
        Inside the first radius (in units of the expander scale
        ``delta0 / c``) the curve is the expander; beyond the second it is
        the old curve; in between the two are blended.

    Returns
    -------
    Restart
        The new state sits on the other axis at distance ``delta0`` from
        the origin, at time ``t_singular + (delta0 / c)**2``, the time at
        which the expander's junction reaches that distance.
    """
    cfg = _resolved(state, cfg)
    net = state.net
    if net.net_type is NetworkType.LENS:
        raise TransitionError("a lens never passes through a junction collision")
    d = net.junction_distance
    if d >= cfg.junction_tol:
        raise TransitionError(f"junction at distance {d:.3g} >= junction_tol; no collision")
    kmax = max_curvature(net)
    if kmax >= cfg.kappa_blowup:
        raise TransitionError("curvature is blowing up; not a junction collision")
    if delta0 is None:
        delta0 = restart_offset(state, cfg, kmax)

    t_sing = state.t
    if junction_speed is not None and junction_speed > 0:
        t_sing += d / junction_speed

    old_axis = net.junction_axis
    new_axis = old_axis.other
    c = expander_constant()
    lam = delta0 / c
    r_in, r_out = blend_radii[0] * lam, blend_radii[1] * lam

    # slide the old junction into the origin, fading the shift out along the curve
    p = np.array(net.points, dtype=float)
    s = arclength(p)
    fade = np.clip(1.0 - s / (2.0 * r_out + 2.0 * d), 0.0, 1.0)
    p[:, old_axis.index] -= fade * p[0, old_axis.index]
    p[0] = 0.0
    r_old = np.hypot(p[:, 0], p[:, 1])
    n_in = int(np.searchsorted(r_old, r_out))
    if n_in >= len(p) - 3 or np.any(np.diff(r_old[: n_in + 1]) <= 0):
        raise TransitionError("curve near the origin is not a radial graph on the splice disc")
    if np.any(r_old[n_in:] < r_out):
        raise TransitionError("curve returns into the splice disc")

    head = lam * expander_profile(r_out / lam * 1.05, 2000)
    if new_axis is Axis.X1:
        head = swap_xy(head)
    r_new = np.hypot(head[:, 0], head[:, 1])
    # both arcs are graphs over the distance to the origin on [delta0, r_out];
    # blend them with a smooth step so the splice has no corner
    h_tail = float(np.hypot(*(p[n_in + 1] - p[n_in])))
    m = max(16, int(math.ceil((r_out - delta0) / max(h_tail, 1e-300) * 4)))
    rr = np.linspace(r_new[0], r_out, m, endpoint=False)
    e = np.column_stack([np.interp(rr, r_new, head[:, 0]), np.interp(rr, r_new, head[:, 1])])
    o = np.column_stack([np.interp(rr, r_old[: n_in + 1], p[: n_in + 1, 0]),
                         np.interp(rr, r_old[: n_in + 1], p[: n_in + 1, 1])])
    x = np.clip((rr - r_in) / (r_out - r_in), 0.0, 1.0)
    w = 1.0 - x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)
    pts = np.vstack([w[:, None] * e + (1.0 - w[:, None]) * o, p[n_in:]])
    keep = np.concatenate([[True], np.hypot(*np.diff(pts, axis=0).T) > 1e-12 * delta0])
    pts = pts[keep]

    new_net = SymmetricNetwork(net.defining.__class__(pts, validate=False), TYPE_AFTER[net.net_type],
                               new_axis, net.anchor)
    r_grade = grading_length(pts, cfg)
    pts = respace(pts, cfg.n_points, r_grade, cfg.grading_floor, origin_distance=delta0)
    pts = apply_boundary_conditions(pts, new_net)
    new_net = new_net.with_points(pts)
    try:
        new_net.validate(geom_tol=cfg.geom_tol, angle_tol=1e-6)
    except GeometryError as exc:
        raise FlowError(f"restarted network is invalid: {exc}", state) from exc
    return Restart(SymmetricState(new_net, t_sing + lam * lam, state.steps), t_sing, delta0)


def hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    from scipy.spatial import cKDTree

    da, _ = cKDTree(b).query(a)
    db, _ = cKDTree(a).query(b)
    return float(max(da.max(), db.max()))


def network_points(net: SymmetricNetwork, edge_samples: int = 50) -> np.ndarray:
    """Dense point cloud of the reconstructed network, for distance checks."""
    full = reconstruct_full(net)
    pts = [c.points for c in full.arcs]
    for e in full.edges:
        a, b = e.points
        w = np.linspace(0.0, 1.0, edge_samples)[:, None]
        pts.append(a + w * (b - a))
    return np.vstack(pts)


# --------------------------------------------------------------------------
# expander scaling of the junction distance
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ExpanderFit:
    """Power law ``d = c * (t - t_k)**exponent`` fitted after a restart."""

    c: float
    exponent: float
    window: tuple
    residual: float
    n_samples: int = 0

    @property
    def passed(self) -> bool:
        return 0.4 <= self.exponent <= 0.6 and self.c > 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["window"] = list(self.window)
        d["passed"] = self.passed
        return d


def fit_expander_bound(t, d, t_k: float, min_samples: int = 20) -> ExpanderFit:
    """Least-squares fit of ``log d`` against ``log(t - t_k)``.

    Raises ``ValueError`` when the series is too short, not positive or not
    nondecreasing.
    """
    t = np.asarray(t, dtype=float)
    d = np.asarray(d, dtype=float)
    if len(t) != len(d) or len(t) < min_samples:
        raise ValueError(f"need at least {min_samples} samples")
    if np.any(t <= t_k) or np.any(np.diff(t) <= 0):
        raise ValueError("sample times must increase and follow t_k")
    if np.any(d <= 0):
        raise ValueError("junction distances must be positive")
    if np.any(np.diff(d) < 0):
        raise ValueError("junction distance is not monotone after the restart")
    x = np.log(t - t_k)
    y = np.log(d)
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    return ExpanderFit(float(np.exp(coef[1])), float(coef[0]), (float(t[0]), float(t[-1])), res, len(t))


def fit_restart(t, d, t_k: float, delta0: float, span: float = 10.0, min_samples: int = 20) -> ExpanderFit:
    """Expander fit over the early part of a restarted phase.

    Uses the samples taken while the junction is within ``span * delta0``
    of the origin, where the expander still dominates the shape of the
    curve near the junction.
    """
    t = np.asarray(t, dtype=float)
    d = np.asarray(d, dtype=float)
    sel = (t > t_k) & (d <= span * delta0)
    # keep only the initial run of the selection
    stop = int(np.argmin(sel)) if not sel.all() else len(sel)
    return fit_expander_bound(t[:stop], d[:stop], t_k, min_samples)


# --------------------------------------------------------------------------
# long-time limits of trees
# --------------------------------------------------------------------------


class LimitClass(enum.Enum):
    STEINER_TREE = "SteinerTree"
    STANDARD_CROSS = "StandardCross"
    UNDECIDED = "Undecided"


def steiner_junction(anchor, axis: Axis) -> float | None:
    """Closed-form junction distance of the symmetric Steiner tree, if any.

    For anchors ``(+-A, +-B)`` and bridge on the x1-axis the junction sits
    at ``A - B / sqrt(3)``; on the x2-axis at ``B - A / sqrt(3)``.
    """
    a, b = (float(anchor[0]), float(anchor[1]))
    if axis is Axis.X2:
        a, b = b, a
    x = a - b / math.sqrt(3.0)
    return x if x > 0 else None


def classify_limit(state: SymmetricState, cfg: SolverConfig, rest_curvature: float | None = None,
                   straight_tol: float = 1e-3, angle_tol: float = 1e-3) -> LimitClass:
    """Classify the configuration reached by a converged tree.

    ``StandardCross`` when the junction is within ``junction_tol`` of the
    origin and the defining curve is a straight segment at 60 degrees to
    the axis; ``SteinerTree`` when the junction stays away from the origin,
    the curvature is at rest and the junction angles are 120 degrees.
    """
    cfg = _resolved(state, cfg)
    net = state.net
    if net.net_type is not NetworkType.TREE:
        raise TransitionError("only trees have a long-time limit")
    if rest_curvature is None:
        rest_curvature = 100.0 * cfg.rest_speed
    p = net.points
    chord = p[-1] - p[0]
    length = float(np.hypot(*chord))
    offsets = np.abs((p[:, 0] - p[0, 0]) * chord[1] - (p[:, 1] - p[0, 1]) * chord[0]) / length
    straight = offsets.max() <= straight_tol * length
    chord_angle = angle_between(chord, junction_tangent(net.net_type, net.junction_axis))
    d = net.junction_distance
    kmax = float(np.abs(derived_quantities(net.defining).curvature).max())
    if d < cfg.junction_tol and straight and chord_angle <= angle_tol:
        return LimitClass.STANDARD_CROSS
    if d > cfg.junction_tol and kmax < rest_curvature and chord_angle <= angle_tol:
        return LimitClass.STEINER_TREE
    return LimitClass.UNDECIDED
