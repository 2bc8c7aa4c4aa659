"""Standalone SVG line drawings of reconstructed networks."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

from .geometry import SymmetricNetwork, reconstruct_full


def _path(points: np.ndarray, tf) -> str:
    xy = tf(points)
    head = f"M{xy[0, 0]:.2f},{xy[0, 1]:.2f}"
    return head + "".join(f" L{x:.2f},{y:.2f}" for x, y in xy[1:])


def render_network(net: SymmetricNetwork, line_angles=(), size: int = 480, title: str = "") -> str:
    """Drawing of the full network with both axes and the test lines.

    Test lines are drawn with their mirror images, since the count they
    monitor is the same in every quadrant.
    """
    full = reconstruct_full(net)
    pts = np.vstack([c.points for c in full.curves])
    r = 1.1 * float(np.max(np.abs(pts))) or 1.0
    half = size / 2.0
    scale = (half - 10) / r

    def tf(p):
        p = np.atleast_2d(p)
        return np.column_stack([half + scale * p[:, 0], half - scale * p[:, 1]])

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
        f'<line x1="0" y1="{half}" x2="{size}" y2="{half}" stroke="#bbb" stroke-width="1"/>',
        f'<line x1="{half}" y1="0" x2="{half}" y2="{size}" stroke="#bbb" stroke-width="1"/>',
    ]
    for a in line_angles:
        for sgn in (1, -1):
            d = np.array([math.cos(a), sgn * math.sin(a)]) * r * 2
            (x0, y0), (x1, y1) = tf(np.vstack([-d, d]))
            out.append(f'<line x1="{x0:.2f}" y1="{y0:.2f}" x2="{x1:.2f}" y2="{y1:.2f}" '
                       'stroke="#d62728" stroke-width="0.8" stroke-dasharray="4 3"/>')
    for c in full.curves:
        out.append(f'<path d="{_path(c.points, tf)}" fill="none" stroke="black" stroke-width="1.5"/>')
    if title:
        out.append(f'<text x="8" y="18" font-family="monospace" font-size="13">{escape(title)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
