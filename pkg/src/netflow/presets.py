"""Initial networks for the four symmetric two-junction types.

The shapes follow the classic textbook pictures of the tree, lens, theta
and eyeglasses networks, normalised so that the junction lies on the
x1-axis.
"""

from __future__ import annotations

import math

import numpy as np

from .flow import apply_boundary_conditions, respace
from .geometry import SQRT3, Axis, DiscreteCurve, NetworkType, SymmetricNetwork, diameter

# profile coefficient that makes the theta arc leave its junction at 60 degrees
_THETA_K = 1.0 / (SQRT3 * (math.sqrt(2.0) - 1.0 / (2.0 * math.sqrt(2.0))))


def _tree_curve(anchor: np.ndarray, junction: float, m: int) -> np.ndarray:
    """Cubic Hermite arc from the junction at 60 degrees to the anchor."""
    p0 = np.array([junction, 0.0])
    chord = anchor - p0
    L = float(np.hypot(*chord))
    t0 = np.array([0.5, SQRT3 / 2]) * L
    t1 = chord.copy()
    s = np.linspace(0.0, 1.0, m)[:, None]
    h00 = 2 * s**3 - 3 * s**2 + 1
    h10 = s**3 - 2 * s**2 + s
    h01 = -2 * s**3 + 3 * s**2
    h11 = s**3 - s**2
    return h00 * p0 + h10 * t0 + h01 * anchor + h11 * t1


def default_anchor(scale: float = 1.0) -> np.ndarray:
    x = 1.5
    return scale * np.array([2.0, SQRT3 * x * (x**3 - 1.75 * x**2 + 1.0)])


def build_preset(net_type: NetworkType | str, scale: float = 1.0, anchor=None,
                 junction: float | None = None, n_points: int = 200) -> SymmetricNetwork:
    """Smooth initial network of the given type.

    Parameters
    ----------
    net_type : NetworkType or str
    scale : float
        Overall size; the unscaled shapes fit in a box about 4 units wide.
    anchor : (float, float), optional
        Fixed outer endpoint of a tree; defaults to ``(2, 1.135) * scale``.
    junction : float, optional
        Junction abscissa of a tree with a custom anchor.  Defaults to half
        the Steiner abscissa ``x - y / sqrt(3)`` of the anchor when that is
        positive and to ``0.2 * x`` otherwise.
    n_points : int
        Vertices of the returned defining curve.
    """
    net_type = NetworkType(net_type)
    if not scale > 0:
        raise ValueError("scale must be positive")
    m = 4000
    anchor_arr = None
    if net_type is NetworkType.TREE:
        if anchor is None:
            x = np.linspace(0.5, 2.0, m) - 0.5
            pts = np.column_stack([x + 0.5, SQRT3 * x * (x**3 - 1.75 * x**2 + 1.0)]) * scale
            anchor_arr = pts[-1].copy()
        else:
            anchor_arr = np.asarray(anchor, dtype=float).reshape(2)
            if np.any(anchor_arr <= 0):
                raise ValueError("the anchor must lie in the open first quadrant")
            if junction is None:
                steiner = anchor_arr[0] - anchor_arr[1] / SQRT3
                junction = 0.5 * steiner if steiner > 0 else 0.2 * anchor_arr[0]
            pts = _tree_curve(anchor_arr, junction, m)
    elif net_type is NetworkType.LENS:
        x = np.linspace(1.0, 0.0, m)
        pts = np.column_stack([x, SQRT3 / 2 * (1.0 - x**2)]) * scale
        anchor_arr = np.array([2.0 * scale, 0.0]) if anchor is None else np.asarray(anchor, float)
    elif net_type is NetworkType.THETA:
        # uniform in sqrt(2 - y) so the square-root end is resolved
        u = np.linspace(math.sqrt(2.0), 0.0, m)
        y = 2.0 - u**2
        pts = np.column_stack([_THETA_K * (y + 1.0) * u, y]) * scale
    else:
        # parametrised by v = sqrt(4 - 2x) for the same reason
        v = np.linspace(math.sqrt(3.0), 0.0, m)
        x = 2.0 - v**2 / 2.0
        pts = np.column_stack([x, (x - 0.5) * v]) * scale
    pts[:, 0] = np.maximum(pts[:, 0], 0.0)
    pts[:, 1] = np.maximum(pts[:, 1], 0.0)
    net = SymmetricNetwork(DiscreteCurve(pts, validate=False), net_type, Axis.X1, anchor_arr)
    pts = apply_boundary_conditions(respace(pts, n_points), net)
    net = net.with_points(pts)
    net.validate(geom_tol=1e-9 * diameter(pts), angle_tol=1e-9)
    return net


def tall_tree(n_points: int = 200) -> SymmetricNetwork:
    """Tree whose anchors sit above the 60-degree rays.

    No Steiner tree with the bridge on the x1-axis spans these anchors, so
    the junctions collide and the flow continues with the bridge on the
    x2-axis.
    """
    return build_preset(NetworkType.TREE, anchor=(0.5, 1.5), junction=0.3, n_points=n_points)
