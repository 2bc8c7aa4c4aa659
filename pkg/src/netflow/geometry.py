"""Discrete planar curves and doubly symmetric two-junction networks.

A symmetric network is stored through its defining curve, the single arc
living in the closed first quadrant.  The full network is recovered by
reflecting that arc across both coordinate axes and adding the straight
edges that lie on an axis.

Conventions
-----------
* Points are ``(n, 2)`` float arrays ``[[x1, x2], ...]``.
* The defining curve runs junction first, outer endpoint last.
* Normals are tangents rotated by +90 degrees, so ``{tangent, normal}`` is
  a positive basis and curvature is positive when the curve turns
  counterclockwise.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.spatial import ConvexHull, QhullError

SQRT3 = math.sqrt(3.0)


class GeometryError(ValueError):
    """Raised when a curve or network violates its invariants."""


class NetworkType(enum.Enum):
    TREE = "tree"
    LENS = "lens"
    THETA = "theta"
    EYEGLASSES = "eyeglasses"


class Axis(enum.Enum):
    X1 = "x1"
    X2 = "x2"

    @property
    def unit(self) -> np.ndarray:
        return np.array([1.0, 0.0]) if self is Axis.X1 else np.array([0.0, 1.0])

    @property
    def other(self) -> "Axis":
        return Axis.X2 if self is Axis.X1 else Axis.X1

    @property
    def index(self) -> int:
        return 0 if self is Axis.X1 else 1


def rot90(v: np.ndarray) -> np.ndarray:
    """Rotate vectors (last axis of length 2) by +90 degrees."""
    v = np.asarray(v, dtype=float)
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


def cross2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def swap_xy(v: np.ndarray) -> np.ndarray:
    """Reflection across the diagonal x1 = x2."""
    return np.asarray(v, dtype=float)[..., ::-1].copy()


# --------------------------------------------------------------------------
# curves
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DiscreteCurve:
    """Ordered polyline in the plane.

    Parameters
    ----------
    points : array_like, shape (n, 2)
        Vertices in order.  ``n >= 3``.
    closed : bool
        Whether the last vertex connects back to the first.
    validate : bool
        Check finiteness and distinct consecutive vertices on construction.
        Simplicity is checked separately with :func:`is_simple`, since it
        is the expensive part.
    """

    points: np.ndarray
    closed: bool = False
    validate: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise GeometryError("points must have shape (n, 2)")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        if self.validate:
            if len(pts) < 3:
                raise GeometryError("a curve needs at least 3 points")
            if not np.all(np.isfinite(pts)):
                raise GeometryError("non-finite coordinates")
            seg = segment_lengths(pts, self.closed)
            scale = max(diameter(pts), 1.0e-300)
            if seg.min() <= 1e-14 * scale:
                raise GeometryError("degenerate segment (coincident consecutive points)")

    def __len__(self) -> int:
        return len(self.points)

    @property
    def length(self) -> float:
        return float(segment_lengths(self.points, self.closed).sum())

    def reflected(self, sx: float, sy: float) -> "DiscreteCurve":
        return DiscreteCurve(self.points * np.array([sx, sy]), self.closed, validate=False)


def segment_lengths(points: np.ndarray, closed: bool = False) -> np.ndarray:
    d = np.diff(points, axis=0)
    if closed:
        d = np.vstack([d, points[:1] - points[-1:]])
    return np.hypot(d[:, 0], d[:, 1])


def arclength(points: np.ndarray) -> np.ndarray:
    """Cumulative chord length of an open polyline, starting at 0."""
    return np.concatenate([[0.0], np.cumsum(segment_lengths(points))])


def diameter(points: np.ndarray) -> float:
    pts = np.asarray(points, dtype=float)
    if len(pts) > 64:
        # the diameter is attained on the convex hull
        try:
            pts = pts[ConvexHull(pts).vertices]
        except QhullError:  # degenerate (collinear) input
            lo, hi = pts.min(axis=0), pts.max(axis=0)
            return float(np.hypot(*(hi - lo)))
    d = pts[:, None, :] - pts[None, :, :]
    return float(np.sqrt((d**2).sum(-1)).max())


class DerivedQuantities(NamedTuple):
    tangent: np.ndarray
    normal: np.ndarray
    curvature: np.ndarray


def one_sided_weights(h0: float, h1: float) -> tuple[float, float, float]:
    """Second-order weights for the derivative at the first of three nodes.

    The nodes sit at arclength 0, ``h0`` and ``h0 + h1``.
    """
    c0 = -(2.0 * h0 + h1) / (h0 * (h0 + h1))
    c1 = (h0 + h1) / (h0 * h1)
    c2 = -h0 / (h1 * (h0 + h1))
    return c0, c1, c2


def derived_quantities(curve: DiscreteCurve) -> DerivedQuantities:
    """Unit tangent, unit normal and signed curvature at every vertex.

    Interior vertices use centred three-point differences with arclength
    weights (second order on smooth curves).  Endpoints of open curves use
    one-sided second-order stencils for the tangent; their curvature comes
    from the quadratic through the three nearest vertices.
    """
    x = curve.points
    n = len(x)
    if curve.closed:
        xm, xp = np.roll(x, 1, axis=0), np.roll(x, -1, axis=0)
    else:
        xm, xp = x[:-2], x[2:]
        x = x[1:-1]
    hm = np.hypot(*(x - xm).T)
    hp = np.hypot(*(xp - x).T)
    scale = max(hm.max(), hp.max())
    if min(hm.min(), hp.min()) <= 1e-14 * scale:
        raise GeometryError("degenerate segment")
    w = (hp + hm)[:, None]
    d1 = (hm[:, None] ** 2 * xp - hp[:, None] ** 2 * xm + (hp**2 - hm**2)[:, None] * x) / (
        (hm * hp)[:, None] * w
    )
    d2 = 2.0 * ((xp - x) / hp[:, None] - (x - xm) / hm[:, None]) / w
    speed = np.hypot(d1[:, 0], d1[:, 1])
    kappa = cross2(d1, d2) / speed**3
    tau = d1 / speed[:, None]

    if not curve.closed:
        p = curve.points
        h = segment_lengths(p)
        c = one_sided_weights(h[0], h[1])
        t0 = c[0] * p[0] + c[1] * p[1] + c[2] * p[2]
        c = one_sided_weights(h[-1], h[-2])
        t1 = -(c[0] * p[-1] + c[1] * p[-2] + c[2] * p[-3])
        t0 /= np.hypot(*t0)
        t1 /= np.hypot(*t1)
        tau = np.vstack([t0, tau, t1])
        # the quadratic through three nodes has constant second derivative;
        # reuse the neighbour's stencil with the endpoint's own tangent
        k0 = cross2(t0, d2[0])
        k1 = cross2(t1, d2[-1])
        kappa = np.concatenate([[k0], kappa, [k1]])
    assert len(tau) == n
    return DerivedQuantities(tau, rot90(tau), kappa)


def turning_angles(points: np.ndarray) -> np.ndarray:
    """Signed exterior angle at each interior vertex of an open polyline."""
    d = np.diff(points, axis=0)
    return np.arctan2(cross2(d[:-1], d[1:]), (d[:-1] * d[1:]).sum(-1))


# --------------------------------------------------------------------------
# simplicity
# --------------------------------------------------------------------------


def _orient(a, b, c):
    return (b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1]) - (b[..., 1] - a[..., 1]) * (
        c[..., 0] - a[..., 0]
    )


def self_intersections(points: np.ndarray, closed: bool = False, tol: float = 0.0) -> np.ndarray:
    """Index pairs ``(i, j)`` of non-adjacent segments that cross.

    Segments are sorted by their left end; a segment is only tested
    against the ones whose x-extent overlaps it, so typical polylines cost
    ``O(n log n)``.  Orientation values within ``tol`` (scaled by the
    segment lengths) count as touching.
    """
    p = np.asarray(points, dtype=float)
    q = np.roll(p, -1, axis=0) if closed else p[1:]
    a = p if closed else p[:-1]
    m = len(a)
    lo = np.minimum(a[:, 0], q[:, 0])
    hi = np.maximum(a[:, 0], q[:, 0])
    order = np.argsort(lo, kind="stable")
    lo_s = lo[order]
    stop = np.searchsorted(lo_s, hi[order] + tol, side="right")
    counts = stop - np.arange(m) - 1
    counts = np.maximum(counts, 0)
    if counts.sum() == 0:
        return np.empty((0, 2), dtype=int)
    ii = np.repeat(np.arange(m), counts)
    offs = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
    jj = ii + 1 + offs
    si, sj = order[ii], order[jj]
    gap = np.abs(si - sj)
    adjacent = gap == 1
    if closed:
        adjacent |= gap == m - 1
    si, sj = si[~adjacent], sj[~adjacent]
    if len(si) == 0:
        return np.empty((0, 2), dtype=int)
    a1, b1, a2, b2 = a[si], q[si], a[sj], q[sj]
    # y-extent rejection
    ok = (np.minimum(a1[:, 1], b1[:, 1]) <= np.maximum(a2[:, 1], b2[:, 1]) + tol) & (
        np.minimum(a2[:, 1], b2[:, 1]) <= np.maximum(a1[:, 1], b1[:, 1]) + tol
    )
    a1, b1, a2, b2, si, sj = a1[ok], b1[ok], a2[ok], b2[ok], si[ok], sj[ok]
    l1 = np.hypot(*(b1 - a1).T)
    l2 = np.hypot(*(b2 - a2).T)
    o1 = _orient(a1, b1, a2) / l1
    o2 = _orient(a1, b1, b2) / l1
    o3 = _orient(a2, b2, a1) / l2
    o4 = _orient(a2, b2, b1) / l2
    hit = (o1 * o2 <= tol * tol) & (o3 * o4 <= tol * tol)
    # collinear but disjoint pairs pass the sign test; drop them
    par = (np.abs(o1) <= tol) & (np.abs(o2) <= tol)
    if np.any(par & hit):
        d = (b1 - a1) / l1[:, None]
        t = lambda v: ((v - a1) * d).sum(-1)
        s0, s1 = np.minimum(t(a2), t(b2)), np.maximum(t(a2), t(b2))
        overlap = (s1 >= -tol) & (s0 <= l1 + tol)
        hit &= ~par | overlap
    pairs = np.stack([np.minimum(si, sj)[hit], np.maximum(si, sj)[hit]], axis=1)
    return pairs


def is_simple(curve: DiscreteCurve, tol: float = 0.0) -> bool:
    return len(self_intersections(curve.points, curve.closed, tol)) == 0


# --------------------------------------------------------------------------
# symmetric networks
# --------------------------------------------------------------------------


def junction_tangent(net_type: NetworkType, axis: Axis) -> np.ndarray:
    """Prescribed unit tangent of the defining curve at the junction.

    Every type except the lens leaves the junction at 60 degrees from the
    axis, away from the origin; the lens arc heads back towards the other
    axis because its straight edges point outwards.
    """
    if net_type is NetworkType.LENS:
        t = np.array([-0.5, SQRT3 / 2])
    else:
        t = np.array([0.5, SQRT3 / 2])
    return t if axis is Axis.X1 else swap_xy(t)


def end_axis(net_type: NetworkType, axis: Axis) -> Axis | None:
    """Axis carrying the free outer endpoint, or None for a pinned end."""
    if net_type is NetworkType.TREE:
        return None
    if net_type is NetworkType.EYEGLASSES:
        return axis
    return axis.other


def end_tangent(end_ax: Axis) -> np.ndarray:
    """Tangent at a free endpoint: perpendicular to its axis, pointing at it."""
    return -end_ax.other.unit


N_REGIONS = {NetworkType.TREE: 0, NetworkType.LENS: 1, NetworkType.THETA: 2, NetworkType.EYEGLASSES: 2}
# triple junctions on the boundary of each bounded region
JUNCTIONS_PER_REGION = {NetworkType.LENS: 2, NetworkType.THETA: 2, NetworkType.EYEGLASSES: 1}


def angle_between(u: np.ndarray, v: np.ndarray) -> float:
    return float(abs(math.atan2(cross2(u, v), float(np.dot(u, v)))))


@dataclass(frozen=True, eq=False)
class SymmetricNetwork:
    """A network symmetric under both axis reflections.

    Parameters
    ----------
    defining : DiscreteCurve
        Open arc in the closed first quadrant, junction first.
    net_type : NetworkType
    junction_axis : Axis
        Axis on which the junction ``defining.points[0]`` lies.
    anchor : array_like or None
        Fixed outer endpoint for trees.  For lenses it is optional and
        marks the far end of the straight edge on the junction axis; it
        takes no part in the evolution.
    """

    defining: DiscreteCurve
    net_type: NetworkType
    junction_axis: Axis
    anchor: np.ndarray | None = None

    def __post_init__(self):
        if self.anchor is not None:
            a = np.array(self.anchor, dtype=float).reshape(2)
            a.setflags(write=False)
            object.__setattr__(self, "anchor", a)

    @property
    def points(self) -> np.ndarray:
        return self.defining.points

    @property
    def junction(self) -> np.ndarray:
        return self.defining.points[0]

    @property
    def junction_distance(self) -> float:
        return float(abs(self.junction[self.junction_axis.index]))

    def with_points(self, points: np.ndarray, **changes) -> "SymmetricNetwork":
        kw = dict(net_type=self.net_type, junction_axis=self.junction_axis, anchor=self.anchor)
        kw.update(changes)
        return SymmetricNetwork(DiscreteCurve(points, validate=False), **kw)

    def validate(self, geom_tol: float = 1e-9, angle_tol: float = 1e-6, check_simple: bool = True):
        """Raise :class:`GeometryError` unless every invariant holds."""
        p = self.points
        if p.ndim != 2 or len(p) < 3 or not np.all(np.isfinite(p)):
            raise GeometryError("defining curve must be finite with at least 3 points")
        seg = segment_lengths(p)
        if seg.min() <= 1e-14 * max(seg.sum(), 1e-300):
            raise GeometryError("degenerate segment in defining curve")
        ax = self.junction_axis
        if abs(p[0, ax.other.index]) > geom_tol:
            raise GeometryError(f"junction off the {ax.value}-axis by {abs(p[0, ax.other.index]):.3g}")
        if np.any(p < -geom_tol):
            raise GeometryError("defining curve leaves the closed first quadrant")
        dq = derived_quantities(self.defining)
        err = angle_between(dq.tangent[0], junction_tangent(self.net_type, ax))
        if err > angle_tol:
            raise GeometryError(f"junction tangent off by {err:.3g} rad")
        if self.net_type is NetworkType.TREE:
            if self.anchor is None:
                raise GeometryError("a tree needs an anchor")
            if np.hypot(*(p[-1] - self.anchor)) > geom_tol:
                raise GeometryError("outer endpoint is not the anchor")
        else:
            eax = end_axis(self.net_type, ax)
            if abs(p[-1, eax.other.index]) > geom_tol:
                raise GeometryError(f"outer endpoint off the {eax.value}-axis")
            err = angle_between(dq.tangent[-1], end_tangent(eax))
            if err > angle_tol:
                raise GeometryError(f"outer tangent off by {err:.3g} rad")
        if check_simple and not is_simple(self.defining, tol=geom_tol):
            raise GeometryError("defining curve self-intersects")
        return self


REFLECTIONS = ((1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0))


@dataclass(frozen=True)
class FullNetwork:
    """Reconstructed network: curved arcs plus straight axis edges."""

    arcs: list
    edges: list
    degenerate_bridge: bool = False

    @property
    def curves(self) -> list:
        return list(self.arcs) + list(self.edges)

    @property
    def length(self) -> float:
        return sum(float(segment_lengths(c.points).sum()) for c in self.curves)


def reconstruct_full(net: SymmetricNetwork, geom_tol: float = 1e-12) -> FullNetwork:
    """Reflect the defining curve into all four quadrants and add axis edges.

    Tree, theta and eyeglasses gain the bridge joining the two junctions
    through the origin; a lens gains its two outer edges when an anchor is
    set.  A bridge shorter than ``geom_tol`` is flagged as degenerate.
    """
    arcs = [net.defining.reflected(sx, sy) for sx, sy in REFLECTIONS]
    j = net.junction
    edges = []
    degenerate = False
    if net.net_type is NetworkType.LENS:
        if net.anchor is not None:
            for s in (1.0, -1.0):
                edges.append(DiscreteCurve(np.array([s * j, s * net.anchor]), validate=False))
    else:
        degenerate = bool(np.hypot(*j) <= geom_tol)
        edges.append(DiscreteCurve(np.array([-j, j]), validate=False))
    return FullNetwork(arcs, edges, degenerate)


def _polygon_area(points: np.ndarray) -> float:
    x, y = points[:, 0], points[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def quadrant_area(net: SymmetricNetwork) -> float:
    """Area between the defining curve and the axes in the first quadrant."""
    p = net.points
    if net.net_type is NetworkType.EYEGLASSES:
        poly = p  # both ends lie on the same axis
    else:
        poly = np.vstack([p, [[0.0, 0.0]]])
    return abs(_polygon_area(poly))


def enclosed_area(net: SymmetricNetwork) -> list[float]:
    """Areas of the bounded regions of the reconstructed network.

    Theta and eyeglasses networks have two congruent regions, each made of
    two quadrant pieces; the lens has one region made of four.
    """
    if net.net_type is NetworkType.TREE:
        raise GeometryError("a tree encloses no regions")
    a = quadrant_area(net)
    if net.net_type is NetworkType.LENS:
        return [4.0 * a]
    return [2.0 * a, 2.0 * a]


def region_boundary_turning(net: SymmetricNetwork) -> float:
    """Total turning of a region boundary away from its triple junctions.

    Sums the signed curvature over the defining curve (discretely, as
    vertex turning angles plus the angles at its endpoints) and scales by
    the number of quadrant pieces per region.  By Gauss-Bonnet this is
    ``2*pi - k*pi/3`` for a region with ``k`` triple junctions.
    """
    p = net.points
    t = derived_quantities(net.defining).tangent
    d0 = p[1] - p[0]
    d1 = p[-1] - p[-2]
    total = float(turning_angles(p).sum())
    total += math.atan2(cross2(t[0], d0), float(np.dot(t[0], d0)))
    total += math.atan2(cross2(d1, t[-1]), float(np.dot(d1, t[-1])))
    pieces = 4 if net.net_type is NetworkType.LENS else 2
    return abs(total) * pieces


# --------------------------------------------------------------------------
# intersections with a line through the origin
# --------------------------------------------------------------------------


class LineCount(NamedTuple):
    count: int
    tangency: bool


def signed_distance(points: np.ndarray, angle: float) -> np.ndarray:
    """Signed distance to the line through the origin at ``angle``; positive above."""
    return -math.sin(angle) * points[:, 0] + math.cos(angle) * points[:, 1]


def count_line_intersections(
    curve: DiscreteCurve | np.ndarray,
    angle: float,
    tol: float | None = None,
    tangency_tol: float | None = None,
) -> LineCount:
    """Count transversal crossings of a polyline with a line through the origin.

    Crossings are sign changes of the signed distance along the polyline.
    Vertices within ``tol`` of the line carry no sign and are skipped.  The
    tangency flag is raised when a vertex lies on the line, when two
    successive crossings are closer than ``tangency_tol`` in arclength, or
    when the distance has an interior local extremum closer to the line
    than ``tangency_tol`` (a touching pair that has just annihilated or is
    about to form).

    ``tol`` defaults to ``1e-9`` times the curve diameter and
    ``tangency_tol`` to ``tol``.
    """
    pts = curve.points if isinstance(curve, DiscreteCurve) else np.asarray(curve, dtype=float)
    if tol is None:
        tol = 1e-9 * diameter(pts)
    if tangency_tol is None:
        tangency_tol = tol
    s = signed_distance(pts, angle)
    sign = np.where(s > tol, 1, np.where(s < -tol, -1, 0))
    on_line = sign == 0
    nz = np.flatnonzero(~on_line)
    tangency = bool(on_line.any())
    if len(nz) < 2:
        return LineCount(0, tangency)
    flips = np.flatnonzero(sign[nz][1:] != sign[nz][:-1])
    count = len(flips)
    if count >= 2 or len(s) >= 3:
        sa = arclength(pts)
        # crossing location by linear interpolation between the straddling vertices
        i0, i1 = nz[flips], nz[flips + 1]
        frac = s[i0] / (s[i0] - s[i1])
        sc = sa[i0] + frac * (sa[i1] - sa[i0])
        if count >= 2 and np.min(np.diff(sc)) < tangency_tol:
            tangency = True
        ds = np.diff(s)
        ext = np.flatnonzero(ds[:-1] * ds[1:] < 0) + 1
        if len(ext) and np.min(np.abs(s[ext])) < tangency_tol:
            tangency = True
    return LineCount(int(count), tangency)


# --------------------------------------------------------------------------
# text formats
# --------------------------------------------------------------------------


def format_curve(curve: DiscreteCurve) -> str:
    lines = ["closed" if curve.closed else "open"]
    lines += [f"{x!r} {y!r}" for x, y in curve.points.tolist()]
    return "\n".join(lines) + "\n"


def parse_curve(text: str) -> DiscreteCurve:
    rows = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    if not rows or rows[0] not in ("open", "closed"):
        raise GeometryError("curve text must start with 'open' or 'closed'")
    pts = np.array([[float(v) for v in r.split()] for r in rows[1:]], dtype=float)
    return DiscreteCurve(pts, closed=rows[0] == "closed")


def network_to_record(net: SymmetricNetwork) -> dict:
    return {
        "type": net.net_type.value,
        "junction_axis": net.junction_axis.value,
        "anchor": None if net.anchor is None else net.anchor.tolist(),
        "defining": format_curve(net.defining),
    }


def network_from_record(rec: dict, validate: bool = True) -> SymmetricNetwork:
    net = SymmetricNetwork(
        parse_curve(rec["defining"]),
        NetworkType(rec["type"]),
        Axis(rec["junction_axis"]),
        rec.get("anchor"),
    )
    if validate:
        net.validate(geom_tol=1e-9 * diameter(net.points), angle_tol=1e-3)
    return net


def dump_network(net: SymmetricNetwork) -> str:
    return json.dumps(network_to_record(net), indent=2)


def load_network(text: str, validate: bool = True) -> SymmetricNetwork:
    return network_from_record(json.loads(text), validate)
