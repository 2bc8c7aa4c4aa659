"""Curvature flow of the defining curve with its junction and endpoint conditions.

The defining curve is advanced by the semi-implicit scheme

    (X^{n+1} - X^n) / dt = D_ss X^{n+1}

where ``D_ss`` is the three-point second difference with the arclength
weights of ``X^n``.  Its normal part is the curvature vector; its
tangential part only redistributes vertices.  Boundary vertices are not
evolved: they are slaved to the curve through constraint rows,

* junction: on its axis, with the second-order one-sided tangent parallel
  to the prescribed 60-degree direction;
* theta / eyeglasses / lens outer end: on its axis, tangent perpendicular
  to that axis (a mirror condition);
* tree outer end: pinned to the anchor.

The constraints are solved together with the interior rows and then
re-imposed exactly with the updated spacings.
"""

from __future__ import annotations

import dataclasses
import enum
import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.linalg import solve_banded

from .geometry import (
    Axis,
    DiscreteCurve,
    NetworkType,
    SymmetricNetwork,
    arclength,
    derived_quantities,
    diameter,
    end_axis,
    end_tangent,
    junction_tangent,
    one_sided_weights,
    reconstruct_full,
    rot90,
    segment_lengths,
    self_intersections,
)

log = logging.getLogger(__name__)


class FlowError(RuntimeError):
    """Raised when a step cannot keep the state valid.

    The offending (pre-step) state is attached as ``state``.
    """

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


@dataclass(frozen=True)
class SolverConfig:
    """Numerical parameters.

    Length-dependent entries left as ``None`` are filled in from the
    initial network diameter by :meth:`resolved`.

    Parameters
    ----------
    n_points : int
        Vertices on the defining curve.
    dt_max : float
        Upper bound on the time step.
    cfl : float
        Step factor in (0, 1).  The semi-implicit scheme moves no vertex by
        more than ``cfl`` times the smallest spacing per step; the explicit
        scheme uses ``cfl * h_min**2 / (1 + max|k| h_min)`` and needs
        ``cfl <= 0.5``.
    respacing_interval : int
        Steps between redistributions of the vertices.
    geom_tol : float
        Distance below which points count as coincident or on a line.
    junction_tol : float
        Junction-to-origin distance that declares a junction collision.
    kappa_blowup : float
        Curvature magnitude that declares blow-up.
    t_max : float
        Cap on flow time.
    scheme : {"semi-implicit", "explicit"}
    grading_radius : float
        Radius of the zone around the origin in which respacing refines
        the mesh towards the junction, in units of the mean spacing
        ``length / n_points``.  Near the junction the spacing is then about
        ``d / grading_radius``.  0 gives uniform arclength spacing.
    grading_floor : float
        Smallest local spacing relative to the far-field spacing.
    respace_tol : float
        A scheduled respacing is skipped while every vertex lies within
        this fraction of the local target spacing of its target position.
        Interpolation noise otherwise keeps a resting curve from settling.
    rest_speed : float
        Normal speed below which the flow counts as at rest.
    rest_steps : int
        Consecutive resting steps required for convergence.
    delta0 : float
        Junction offset used when restarting past a collision.
    local_scale : float
        Collisions are declared once the junction is within
        ``min(junction_tol, local_scale / max|k|)`` of the origin, and
        restarts use an offset no larger than that.  Networks that have
        shrunk far below their initial size are thereby treated at their
        own scale.
    diameter : float
        Diameter of the initial network; set by :meth:`resolved`.
    """

    n_points: int = 200
    dt_max: float | None = None
    cfl: float = 0.5
    respacing_interval: int = 10
    geom_tol: float | None = None
    junction_tol: float | None = None
    kappa_blowup: float | None = None
    t_max: float | None = None
    scheme: str = "semi-implicit"
    grading_radius: float = 20.0
    grading_floor: float = 0.02
    respace_tol: float = 0.25
    rest_speed: float | None = None
    rest_steps: int = 100
    delta0: float | None = None
    local_scale: float = 0.05
    diameter: float | None = None

    def __post_init__(self):
        if self.n_points < 5:
            raise ValueError("n_points must be at least 5")
        if not 0.0 < self.cfl < 1.0:
            raise ValueError("cfl must lie in (0, 1)")
        if self.scheme not in ("semi-implicit", "explicit"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.scheme == "explicit" and self.cfl > 0.5:
            raise ValueError("the explicit scheme is unstable for cfl > 0.5")
        if self.respacing_interval < 1:
            raise ValueError("respacing_interval must be positive")
        if self.respace_tol < 0:
            raise ValueError("respace_tol must be nonnegative")
        if not self.local_scale > 0:
            raise ValueError("local_scale must be positive")
        for name in ("dt_max", "geom_tol", "junction_tol", "kappa_blowup", "t_max", "rest_speed", "delta0"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"{name} must be positive")
        if self.geom_tol is not None and self.junction_tol is not None:
            if not self.junction_tol > 100 * self.geom_tol:
                raise ValueError("junction_tol must be much larger than geom_tol")

    def resolved(self, diam: float) -> "SolverConfig":
        """Fill unset length scales from the network diameter ``diam``."""
        d = self.diameter or diam
        jt = self.junction_tol or 1e-3 * d
        return dataclasses.replace(
            self,
            diameter=d,
            dt_max=self.dt_max or 1e-2 * d * d,
            geom_tol=self.geom_tol or 1e-9 * d,
            junction_tol=jt,
            kappa_blowup=self.kappa_blowup or 1e4 / d,
            t_max=self.t_max or 50.0 * d * d,
            rest_speed=self.rest_speed or 1e-6 / d,
            delta0=self.delta0 or 5.0 * jt,
        )


@dataclass(frozen=True)
class SymmetricState:
    """A symmetric network at flow time ``t``; ``steps`` counts solver steps."""

    net: SymmetricNetwork
    t: float = 0.0
    steps: int = 0

    def replace(self, **kw) -> "SymmetricState":
        return dataclasses.replace(self, **kw)


def network_diameter(net: SymmetricNetwork) -> float:
    full = reconstruct_full(net)
    pts = np.vstack([c.points for c in full.curves])
    return diameter(pts)


# --------------------------------------------------------------------------
# boundary conditions
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class _Slide:
    """Vertex on an axis through the origin with a prescribed tangent line."""

    axis: Axis
    tangent: np.ndarray


@dataclass(frozen=True)
class _Pin:
    point: np.ndarray


def boundary_conditions(net: SymmetricNetwork):
    """(junction condition, outer-end condition) for ``net``."""
    first = _Slide(net.junction_axis, junction_tangent(net.net_type, net.junction_axis))
    eax = end_axis(net.net_type, net.junction_axis)
    if eax is None:
        last = _Pin(np.asarray(net.anchor, dtype=float))
    else:
        last = _Slide(eax, end_tangent(eax))
    return first, last


def _project_slide(p: np.ndarray, end: int, bc: _Slide, iters: int = 30) -> None:
    """Place boundary vertex ``end`` (0 or -1) on its axis with exact tangent.

    Solves the one-sided tangent constraint for the position along the
    axis; the stencil weights depend weakly on that position, hence the
    fixed-point loop.
    """
    i1, i2 = (1, 2) if end == 0 else (-2, -3)
    e = bc.axis.unit
    nrm = rot90(bc.tangent)
    k = bc.axis.index
    p[end, bc.axis.other.index] = 0.0
    a = p[end, k]
    for _ in range(iters):
        h0 = math.hypot(*(p[i1] - p[end]))
        h1 = math.hypot(*(p[i2] - p[i1]))
        c0, c1, c2 = one_sided_weights(h0, h1)
        a_new = -(c1 * np.dot(p[i1], nrm) + c2 * np.dot(p[i2], nrm)) / (c0 * np.dot(e, nrm))
        p[end, k] = a_new
        if abs(a_new - a) <= 1e-15 * (abs(a_new) + h0):
            break
        a = a_new


def apply_boundary_conditions(points: np.ndarray, net: SymmetricNetwork) -> np.ndarray:
    p = np.array(points, dtype=float)
    first, last = boundary_conditions(net)
    _project_slide(p, 0, first)
    if isinstance(last, _Slide):
        _project_slide(p, -1, last)
    else:
        p[-1] = last.point
    return p


# --------------------------------------------------------------------------
# respacing
# --------------------------------------------------------------------------


def respace(
    points: np.ndarray,
    n: int,
    grading_radius: float = 0.0,
    grading_floor: float = 0.02,
    origin_distance: float | None = None,
    tol: float = 0.0,
) -> np.ndarray:
    """Redistribute ``n`` vertices along an open polyline.

    With ``grading_radius`` zero the new vertices are equally spaced in
    arclength.  Otherwise the local spacing is proportional to
    ``clip((s + d) / grading_radius, grading_floor, 1)``, where ``s`` is
    arclength from the first vertex and ``d`` its distance to the origin,
    so the mesh refines towards a junction that approaches the origin.
    Coordinates are interpolated with monotone cubics in arclength.

    With ``tol`` positive the polyline is returned unchanged (as a copy)
    when every vertex already lies within ``tol`` times the local target
    spacing of its target arclength.
    """
    p = np.asarray(points, dtype=float)
    s = arclength(p)
    total = s[-1]
    if grading_radius > 0.0:
        d = float(np.hypot(*p[0])) if origin_distance is None else origin_distance
        if d < grading_radius:
            m = max(20 * n, 2000)
            grid = np.linspace(0.0, total, m)
            phi = np.clip((grid + d) / grading_radius, grading_floor, 1.0)
            g = np.concatenate([[0.0], np.cumsum(0.5 * (1 / phi[1:] + 1 / phi[:-1]) * np.diff(grid))])
            targets = np.interp(np.linspace(0.0, g[-1], n), g, grid)
        else:
            targets = np.linspace(0.0, total, n)
    else:
        targets = np.linspace(0.0, total, n)
    targets[0], targets[-1] = 0.0, total
    if tol > 0.0 and len(s) == n:
        gap = np.diff(targets)
        local = np.minimum(np.concatenate([gap[:1], gap]), np.concatenate([gap, gap[-1:]]))
        if np.all(np.abs(s - targets) <= tol * local):
            return p.copy()
    out = PchipInterpolator(s, p, axis=0)(targets)
    out[0], out[-1] = p[0], p[-1]
    return out


# --------------------------------------------------------------------------
# the linear step
# --------------------------------------------------------------------------

# curvature at the junction of the unit-time standard-cross expander,
# c * sqrt(3) / 4 with c its junction distance (checked in the tests)
EXPANDER_PEAK_CURVATURE = 0.937801710365251 * math.sqrt(3.0) / 4.0

_BAND = 5


def _laplacian_weights(p: np.ndarray):
    h = segment_lengths(p)
    hm, hp = h[:-1], h[1:]
    w = hm + hp
    a = 2.0 / (hm * w)
    c = 2.0 / (hp * w)
    return a, c, h


def _constraint_row(ab, rhs, node: int, bc: _Slide, h0: float, h1: float, backward: bool, m: int):
    """Write the two rows of a sliding boundary vertex into the band matrix."""
    kk = bc.axis.index
    r_perp = 2 * node + bc.axis.other.index
    ab[_BAND, r_perp] = 1.0
    rhs[r_perp] = 0.0
    r = 2 * node + kk
    nrm = rot90(bc.tangent)
    c = one_sided_weights(h0, h1)
    nodes = (node, node + 1, node + 2) if not backward else (node, node - 1, node - 2)
    for ck, nd in zip(c, nodes):
        for comp in (0, 1):
            col = 2 * nd + comp
            ab[_BAND + r - col, col] += ck * nrm[comp] * h0
    rhs[r] = 0.0


def _assemble(p: np.ndarray, dt: float, first, last):
    n = len(p)
    m = 2 * n
    ab = np.zeros((2 * _BAND + 1, m))
    rhs = p.reshape(-1).copy()
    a, c, h = _laplacian_weights(p)
    for comp in (0, 1):
        rows = 2 * np.arange(1, n - 1) + comp
        ab[_BAND, rows] = 1.0 + dt * (a + c)
        ab[_BAND + 2, rows - 2] = -dt * a  # sub-diagonal entry (row r, col r-2)
        ab[_BAND - 2, rows + 2] = -dt * c  # super-diagonal entry (row r, col r+2)
    _constraint_row(ab, rhs, 0, first, h[0], h[1], False, m)
    if isinstance(last, _Slide):
        _constraint_row(ab, rhs, n - 1, last, h[-1], h[-2], True, m)
    else:
        for comp in (0, 1):
            r = 2 * (n - 1) + comp
            ab[_BAND, r] = 1.0
            rhs[r] = last.point[comp]
    return ab, rhs


def advance(points: np.ndarray, net: SymmetricNetwork, dt: float, scheme: str = "semi-implicit") -> np.ndarray:
    """One time step of the defining curve, boundary conditions included."""
    first, last = boundary_conditions(net)
    p = np.asarray(points, dtype=float)
    if scheme == "semi-implicit":
        ab, rhs = _assemble(p, dt, first, last)
        new = solve_banded((_BAND, _BAND), ab, rhs, check_finite=False).reshape(-1, 2)
    else:
        a, c, _ = _laplacian_weights(p)
        new = p.copy()
        new[1:-1] += dt * (a[:, None] * (p[:-2] - p[1:-1]) + c[:, None] * (p[2:] - p[1:-1]))
    _project_slide(new, 0, first)
    if isinstance(last, _Slide):
        _project_slide(new, -1, last)
    else:
        new[-1] = last.point
    return new


def _solve_periodic(diag, lower, upper, rhs):
    """Solve a cyclic tridiagonal system by Sherman-Morrison.

    Row ``i`` reads ``lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]``
    with indices taken modulo ``n``.
    """
    n = len(diag)
    gamma = -diag[0]
    d = diag.copy()
    d[0] -= gamma
    d[-1] -= lower[0] * upper[-1] / gamma
    ab = np.zeros((3, n))
    ab[0, 1:] = upper[:-1]
    ab[1] = d
    ab[2, :-1] = lower[1:]
    u = np.zeros(n)
    u[0], u[-1] = gamma, upper[-1]
    rhs2 = np.column_stack([rhs, u])
    sol = solve_banded((1, 1), ab, rhs2)
    x, z = sol[:, :-1], sol[:, -1]
    vx = x[0] + lower[0] / gamma * x[-1]
    vz = z[0] + lower[0] / gamma * z[-1]
    return x - np.outer(z, vx / (1.0 + vz))


def advance_closed(points: np.ndarray, dt: float, scheme: str = "semi-implicit") -> np.ndarray:
    """One step for a closed curve (no boundary conditions)."""
    p = np.asarray(points, dtype=float)
    h = segment_lengths(p, closed=True)  # h[i] = |p[i+1] - p[i]|
    hm = np.roll(h, 1)
    w = hm + h
    a = 2.0 / (hm * w)
    c = 2.0 / (h * w)
    if scheme == "explicit":
        return p + dt * (a[:, None] * (np.roll(p, 1, 0) - p) + c[:, None] * (np.roll(p, -1, 0) - p))
    return _solve_periodic(1.0 + dt * (a + c), -dt * a, -dt * c, p)


def shrink_closed_curve(curve: DiscreteCurve, t_end: float, dt_max: float, cfl: float = 0.5,
                        scheme: str = "semi-implicit") -> tuple[DiscreteCurve, float]:
    """Evolve a closed curve by curve shortening until ``t_end``.

    Test harness for the interior scheme: uses the same stencil and time
    step rule as :func:`step`, without boundary conditions.
    """
    p = np.array(curve.points, dtype=float)
    t = 0.0
    scale = diameter(p)  # the curve only shrinks
    while t < t_end - 1e-15:
        dq = derived_quantities(DiscreteCurve(p, closed=True, validate=False))
        h_min = segment_lengths(p, closed=True).min()
        kmax = float(np.abs(dq.curvature).max())
        dt = _choose_dt(h_min, kmax, dt_max, cfl, scheme, scale)
        dt = min(dt, t_end - t)
        p = advance_closed(p, dt, scheme)
        t += dt
    return DiscreteCurve(p, closed=True), t


def _choose_dt(h_min: float, kmax: float, dt_max: float, cfl: float, scheme: str, length_scale: float) -> float:
    if scheme == "explicit":
        return min(dt_max, cfl * h_min * h_min / (1.0 + kmax * h_min))
    return min(dt_max, cfl * h_min / max(kmax, 1.0 / length_scale))


# --------------------------------------------------------------------------
# stepping a symmetric state
# --------------------------------------------------------------------------


def prepare(state: SymmetricState, cfg: SolverConfig) -> SymmetricState:
    """Resample to ``cfg.n_points`` vertices and impose the boundary conditions."""
    cfg = _resolved(state, cfg)
    pts = _respace_state(state.net.points, state.net, cfg)
    return state.replace(net=state.net.with_points(pts))


def grading_length(points: np.ndarray, cfg: SolverConfig) -> float:
    """Radius of the refinement zone around the origin, in length units."""
    return cfg.grading_radius * float(arclength(points)[-1]) / cfg.n_points


def _respace_state(points, net: SymmetricNetwork, cfg: SolverConfig, tol: float = 0.0) -> np.ndarray:
    r = grading_length(points, cfg)
    d = float(abs(points[0, net.junction_axis.index]))
    pts = respace(points, cfg.n_points, r, cfg.grading_floor, origin_distance=d, tol=tol)
    return apply_boundary_conditions(pts, net)


def _resolved(state: SymmetricState, cfg: SolverConfig) -> SolverConfig:
    if cfg.diameter is None:
        cfg = cfg.resolved(network_diameter(state.net))
    return cfg


def max_curvature(net: SymmetricNetwork) -> float:
    return float(np.abs(derived_quantities(net.defining).curvature).max())


def choose_dt(state: SymmetricState, cfg: SolverConfig, kmax: float | None = None) -> float:
    cfg = _resolved(state, cfg)
    if kmax is None:
        kmax = max_curvature(state.net)
    h_min = float(segment_lengths(state.net.points).min())
    return _choose_dt(h_min, kmax, cfg.dt_max, cfg.cfl, cfg.scheme, cfg.diameter)


def check_state(net: SymmetricNetwork, cfg: SolverConfig, simple: bool = False) -> str | None:
    """Describe the first violated invariant, or return None."""
    p = net.points
    if not np.all(np.isfinite(p)):
        return "non-finite coordinates"
    if np.any(p < -cfg.geom_tol):
        return "defining curve left the first quadrant"
    if segment_lengths(p).min() <= 1e-14 * cfg.diameter:
        return "vertices collapsed"
    if simple and len(self_intersections(p, False, 0.0)):
        return "defining curve self-intersects"
    return None


def step(state: SymmetricState, cfg: SolverConfig, dt: float | None = None, max_halvings: int = 30) -> SymmetricState:
    """Advance ``state`` by one step of the curvature flow.

    The step is ``dt`` if given, otherwise the adaptive step of
    :func:`choose_dt`.  A step that would leave the first quadrant is
    retried with half the step; :class:`FlowError` is raised when halving
    does not help.
    """
    cfg = _resolved(state, cfg)
    if dt is None:
        dt = choose_dt(state, cfg)
    net = state.net
    k = state.steps + 1
    for _ in range(max_halvings):
        pts = advance(net.points, net, dt, cfg.scheme)
        if k % cfg.respacing_interval == 0:
            pts = _respace_state(pts, net, cfg, cfg.respace_tol)
        new = net.with_points(pts)
        problem = check_state(new, cfg, simple=(k % cfg.respacing_interval == 0))
        if problem is None:
            return SymmetricState(new, state.t + dt, k)
        if problem == "defining curve self-intersects":
            break
        dt *= 0.5
    raise FlowError(f"step at t={state.t:.6g} failed: {problem}", state)


# --------------------------------------------------------------------------
# running to the next event
# --------------------------------------------------------------------------


class Event(enum.Enum):
    TYPE0 = "Type0"
    BLOWUP = "Blowup"
    CONVERGED = "Converged"
    TIMECAP = "TimeCap"


@dataclass
class RunResult:
    state: SymmetricState
    event: Event
    steps: int
    max_kappa: float


Observer = Callable[[SymmetricState, float], None]


def run_until_event(state: SymmetricState, cfg: SolverConfig, observer: Observer | None = None,
                    max_steps: int = 2_000_000, restarted_at: float | None = None) -> RunResult:
    """Step until a junction collision, blow-up, rest or the time cap.

    A collision needs the junction within ``junction_tol`` of the origin
    and also within ``local_scale / max|k|``.

    ``observer(state, max_kappa)`` is called on the initial state and after
    every step.  Lenses never report a junction collision: their junctions
    meet only when the enclosed region disappears, which is a blow-up.

    Parameters
    ----------
    restarted_at : float, optional
        Singular time of the collision this state was restarted from.  The
        expander then carries curvature of order ``1 / sqrt(t - t_k)`` near
        the new junction; that transient is not a blow-up, so blow-up is
        only declared once ``max|k|`` also exceeds twice the expander's
        own curvature.  A collision is only declared while the junction
        moves towards the origin.
    """
    cfg = _resolved(state, cfg)
    resting = 0
    steps = 0
    prev_d = None
    prev_t = None
    speed = math.inf
    while True:
        net = state.net
        dq = derived_quantities(net.defining)
        kmax = float(np.abs(dq.curvature).max())
        if observer is not None:
            observer(state, kmax)
        d = net.junction_distance
        k_floor = 0.0
        if restarted_at is not None:
            k_floor = 2.0 * EXPANDER_PEAK_CURVATURE / math.sqrt(max(state.t - restarted_at, 1e-300))
        if kmax >= max(cfg.kappa_blowup, k_floor):
            return RunResult(state, Event.BLOWUP, steps, kmax)
        approaching = restarted_at is None or (prev_d is not None and d < prev_d)
        near = d < min(cfg.junction_tol, cfg.local_scale / max(kmax, 1e-300))
        if net.net_type is not NetworkType.LENS and near and approaching:
            return RunResult(state, Event.TYPE0, steps, kmax)
        if state.t >= cfg.t_max:
            return RunResult(state, Event.TIMECAP, steps, kmax)
        resting = resting + 1 if speed < cfg.rest_speed else 0
        if resting >= cfg.rest_steps:
            return RunResult(state, Event.CONVERGED, steps, kmax)
        if steps >= max_steps:
            raise FlowError("step budget exhausted", state)
        dt = choose_dt(state, cfg, kmax)
        if prev_d is not None and d < prev_d and net.net_type is not NetworkType.LENS:
            # do not jump past the origin: at most halve the gap per step
            v = (prev_d - d) / (state.t - prev_t)
            dt = min(dt, 0.5 * d / v)
        prev_d, prev_t = d, state.t
        new = step(state, cfg, dt)
        # measured rather than |k|: the discrete junction condition leaves
        # a curvature residue near the junction that does not move anything
        disp = new.net.points - net.points
        speed = float(np.abs((disp * dq.normal).sum(axis=1)).max()) / (new.t - state.t)
        state = new
        steps += 1


# --------------------------------------------------------------------------
# graph patch near the junction
# --------------------------------------------------------------------------


class GraphPatchError(FlowError):
    """The curve stopped being a graph with bounded slope over the patch."""


@dataclass(frozen=True)
class GraphPatch:
    """Graph ``u(x)`` of the curve near a junction on the x2-axis.

    In that frame the junction is ``(0, u(0))`` and the fixed tangent makes
    ``u_x(0) = 1/sqrt(3)``.  Nodes are equally spaced on ``[0, eps]``; the
    last value is Dirichlet data.  A junction on the x1-axis is handled by
    swapping the coordinates first.

    The equation ``u_t = u_xx / (1 + u_x**2)`` is written in conservative
    form ``u_t = (arctan u_x)_x`` so that the discrete mass changes only by
    the boundary fluxes.
    """

    u: np.ndarray
    eps: float
    m: float
    t: float = 0.0
    slope_bc: float = 1.0 / math.sqrt(3.0)
    max_slope: float = 10.0

    def __post_init__(self):
        u = np.array(self.u, dtype=float)
        u.setflags(write=False)
        object.__setattr__(self, "u", u)
        if u.ndim != 1 or len(u) < 3:
            raise ValueError("a graph patch needs at least three nodes")
        if not np.all(np.isfinite(u)):
            raise GraphPatchError("graph values are not finite")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if not 1.0 / math.sqrt(3.0) < self.m < math.sqrt(3.0):
            raise ValueError("m must lie strictly between 1/sqrt(3) and sqrt(3)")
        if np.max(np.abs(np.diff(u))) / self.h > self.max_slope:
            raise GraphPatchError("slope bound exceeded; the graph representation is lost")

    @property
    def h(self) -> float:
        return self.eps / (len(self.u) - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, self.eps, len(self.u))

    @property
    def w(self) -> np.ndarray:
        """Height above the test line, ``u - m x``."""
        return self.u - self.m * self.x

    @property
    def mass(self) -> float:
        """Trapezoid-weighted integral of ``u`` over the free nodes."""
        return float(self.h * (0.5 * self.u[0] + self.u[1:-1].sum()))

    def boundary_flux(self, u: np.ndarray | None = None) -> float:
        """Net flux into the free nodes: ``arctan`` slope at the right face minus the Neumann flux."""
        u = self.u if u is None else u
        return math.atan((u[-1] - u[-2]) / self.h) - math.atan(self.slope_bc)


def _patch_residual(u, old, cell, h, dt, g0):
    q = np.diff(u) / h
    flux = np.arctan(q)
    div = np.empty(len(u) - 1)
    div[0] = flux[0] - g0
    div[1:] = flux[1:] - flux[:-1]
    return cell * (u[:-1] - old[:-1]) - dt * div, q


def graph_patch_step(patch: GraphPatch, dt: float, right: float | None = None,
                     tol: float = 1e-13, max_iter: int = 60) -> GraphPatch:
    """Backward Euler step of the graph equation, solved by Newton's method.

    Parameters
    ----------
    patch : GraphPatch
    dt : float
    right : float, optional
        Dirichlet value at ``x = eps`` at the new time; unchanged when omitted.

    Notes
    -----
    The fluxes ``arctan`` of the difference quotients are increasing in
    each difference, so the Jacobian is an M-matrix and the step obeys a
    discrete comparison principle.  With the line ``u = m x`` as a
    subsolution this keeps ``w = u - m x`` positive when it starts so.
    Newton steps are damped by halving until the residual decreases; if
    that still fails the step is split in two.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    target = patch.u[-1] if right is None else float(right)
    # a large jump of the boundary value puts a kink into the last cell
    # that Newton handles badly; move it by at most h / 4 per substep
    parts = int(math.ceil(abs(target - patch.u[-1]) / (0.25 * patch.h)))
    if parts > 1:
        start = patch.u[-1]
        for k in range(1, parts + 1):
            patch = graph_patch_step(patch, dt / parts, start + (target - start) * k / parts, tol, max_iter)
        return patch
    try:
        u = _backward_euler(patch, dt, target, tol, max_iter)
    except GraphPatchError:
        if dt < 1e-12 * patch.h**2:
            raise
        mid = graph_patch_step(patch, 0.5 * dt, 0.5 * (patch.u[-1] + target), tol, max_iter)
        return graph_patch_step(mid, 0.5 * dt, target, tol, max_iter)
    return dataclasses.replace(patch, u=u, t=patch.t + dt)


def _backward_euler(patch: GraphPatch, dt: float, right: float, tol: float, max_iter: int) -> np.ndarray:
    h = patch.h
    old = np.asarray(patch.u)
    n = len(old)
    cell = np.full(n - 1, h)
    cell[0] = 0.5 * h
    g0 = math.atan(patch.slope_bc)
    u = old.copy()
    u[-1] = right
    # start Newton from one Picard step, fluxes c(q_old) * q with c = arctan(q) / q
    q = np.diff(old) / h
    c = np.where(np.abs(q) > 1e-8, np.arctan(q) / np.where(q == 0.0, 1.0, q), 1.0) / h
    ab = np.zeros((3, n - 1))
    ab[1] = cell + dt * c
    ab[1, 1:] += dt * c[:-1]
    ab[0, 1:] = -dt * c[:-1]
    ab[2, :-1] = -dt * c[:-1]
    rhs = cell * old[:-1] - dt * np.concatenate([[g0], np.zeros(n - 2)])
    rhs[-1] += dt * c[-1] * right
    u[:-1] = solve_banded((1, 1), ab, rhs)
    res, q = _patch_residual(u, old, cell, h, dt, g0)
    rnorm = float(np.linalg.norm(res))
    # residual level that rounding alone can produce
    floor = 64.0 * np.finfo(float).eps * (h * np.max(np.abs(u)) + dt) * math.sqrt(n)
    for _ in range(max_iter):
        if rnorm <= floor:
            return u
        dflux = 1.0 / (1.0 + q * q) / h
        # tridiagonal Jacobian of the residual in the free nodes 0 .. n-2
        ab = np.zeros((3, n - 1))
        ab[1] = cell + dt * dflux
        ab[1, 1:] += dt * dflux[:-1]
        ab[0, 1:] = -dt * dflux[:-1]
        ab[2, :-1] = -dt * dflux[:-1]
        du = solve_banded((1, 1), ab, -res)
        lam = 1.0
        while True:
            trial = u.copy()
            trial[:-1] += lam * du
            tres, tq = _patch_residual(trial, old, cell, h, dt, g0)
            tnorm = float(np.linalg.norm(tres))
            if tnorm < rnorm or lam < 1e-3 or rnorm == 0.0:
                break
            lam *= 0.5
        if tnorm >= rnorm and lam < 1e-3:
            raise GraphPatchError("Newton iteration stalled")
        u, res, q, rnorm = trial, tres, tq, tnorm
        if lam == 1.0 and np.max(np.abs(du)) <= tol * max(1.0, np.max(np.abs(u))):
            return u
    raise GraphPatchError("Newton iteration did not converge")


def _graph_frame(net: SymmetricNetwork) -> np.ndarray:
    p = np.asarray(net.points)
    return p if net.junction_axis is Axis.X2 else p[:, ::-1]


def graph_values(net: SymmetricNetwork, x) -> np.ndarray:
    """Height of the defining curve above abscissa ``x`` in the graph frame.

    Only the initial stretch on which the abscissa increases is used; ``x``
    beyond it raises :class:`GraphPatchError`.
    """
    p = _graph_frame(net)
    dx = np.diff(p[:, 0])
    stop = int(np.argmax(dx <= 0)) if np.any(dx <= 0) else len(dx)
    xs, ys = p[: stop + 1, 0], p[: stop + 1, 1]
    x = np.asarray(x, dtype=float)
    if np.any(x < xs[0] - 1e-12) or np.any(x > xs[-1]):
        raise GraphPatchError("abscissa outside the graph part of the curve")
    return np.interp(x, xs, ys)


def patch_from_network(net: SymmetricNetwork, eps: float, nodes: int, m: float, t: float = 0.0) -> GraphPatch:
    """Graph patch sampled from the defining curve of a tree, theta or eyeglasses network."""
    x = np.linspace(0.0, eps, nodes)
    return GraphPatch(graph_values(net, x), eps, m, t)


@dataclass(frozen=True)
class CrossValidation:
    """Outcome of running the parametric and the graph solver side by side."""

    max_error: float
    min_w: float
    steps: int
    t_start: float
    t_end: float
    patch: GraphPatch


def cross_validate(state: SymmetricState, cfg: SolverConfig, eps: float, nodes: int = 41,
                   m: float = 1.0, steps: int = 1000, dt: float | None = None) -> CrossValidation:
    """Evolve ``state`` and a graph patch over ``[0, eps]`` together.

    The patch starts from the defining curve and gets its right Dirichlet
    value from the parametric solution after each step.  ``max_error`` is
    the largest nodal gap between the two over all steps, ``min_w`` the
    smallest interior value of ``u - m x``.
    """
    cfg = _resolved(state, cfg)
    patch = patch_from_network(state.net, eps, nodes, m, state.t)
    t0 = state.t
    err = 0.0
    w_min = math.inf
    for _ in range(steps):
        new = step(state, cfg, dt)
        right = float(graph_values(new.net, [eps])[0])
        patch = graph_patch_step(patch, new.t - state.t, right=right)
        state = new
        err = max(err, float(np.max(np.abs(patch.u - graph_values(state.net, patch.x)))))
        w_min = min(w_min, float(patch.w[1:-1].min()))
    return CrossValidation(err, w_min, steps, t0, state.t, patch)
