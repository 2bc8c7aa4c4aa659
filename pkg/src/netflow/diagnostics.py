"""Intersection counts with a test line, their certification, run reports.

The test line passes through the origin at an angle strictly between 30
and 60 degrees from the x1-axis.  Along a smooth flow the number of
transversal crossings of the defining curve with the line can only drop,
and it drops exactly when the curve becomes tangent to the line.  Through
a junction collision it drops by at least one.  :func:`certify_monotone`
checks these three statements on a sampled series.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .flow import Event, SymmetricState
from .geometry import (
    JUNCTIONS_PER_REGION,
    LineCount,
    NetworkType,
    SymmetricNetwork,
    count_line_intersections,
    segment_lengths,
)
from .transitions import EventLog, ExpanderFit

ANGLE_MIN = math.pi / 6
ANGLE_MAX = math.pi / 3


class SeriesError(ValueError):
    """Series and event log do not describe the same run."""


@dataclass(frozen=True)
class TestLine:
    """Line through the origin at ``angle`` radians from the x1-axis."""

    __test__ = False  # not a pytest class

    angle: float = math.pi / 4

    def __post_init__(self):
        if not ANGLE_MIN < self.angle < ANGLE_MAX:
            raise ValueError("the test line angle must lie strictly between pi/6 and pi/3")

    @property
    def slope(self) -> float:
        return math.tan(self.angle)

    def check_network(self, net: SymmetricNetwork, tol: float = 1e-9) -> None:
        """Raise if the line passes through the fixed endpoint of a tree."""
        if net.net_type is NetworkType.TREE and net.anchor is not None:
            a = np.asarray(net.anchor, dtype=float)
            dist = abs(-math.sin(self.angle) * a[0] + math.cos(self.angle) * a[1])
            if dist <= tol * max(1.0, float(np.hypot(*a))):
                raise ValueError("the test line passes through the anchor")


def default_tangency_tol(points: np.ndarray) -> float:
    """Three times the largest vertex spacing.

    A touching pair of crossings is only visible at the resolution of the
    polyline, so the tangency test works at that scale.
    """
    return 3.0 * float(np.max(segment_lengths(points)))


def sample_i(state: SymmetricState | SymmetricNetwork, line: TestLine, tangency_tol: float | None = None) -> LineCount:
    """Crossings of the defining curve with the test line."""
    net = state.net if isinstance(state, SymmetricState) else state
    pts = net.points
    if tangency_tol is None:
        tangency_tol = default_tangency_tol(pts)
    scale = float(np.max(np.abs(pts)))
    return count_line_intersections(pts, line.angle, tol=1e-9 * scale, tangency_tol=tangency_tol)


# --------------------------------------------------------------------------
# the series
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Sample:
    t: float
    i: int
    tangency: bool


@dataclass
class IntersectionSeries:
    """Samples ``(t, i, tangency)`` with strictly increasing times."""

    angle: float = math.pi / 4
    samples: list = field(default_factory=list)

    def append(self, t: float, i: int, tangency: bool) -> None:
        if self.samples and not t > self.samples[-1].t:
            raise ValueError("sample times must increase strictly")
        if i < 0:
            raise ValueError("an intersection count cannot be negative")
        self.samples.append(Sample(float(t), int(i), bool(tangency)))

    def __len__(self):
        return len(self.samples)

    @property
    def t(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])

    @property
    def i(self) -> np.ndarray:
        return np.array([s.i for s in self.samples], dtype=int)

    def to_text(self) -> str:
        out = io.StringIO()
        out.write(f"# angle={self.angle!r}\n")
        out.write("t,i,tangency\n")
        for s in self.samples:
            out.write(f"{s.t!r},{s.i},{int(s.tangency)}\n")
        return out.getvalue()

    @classmethod
    def from_text(cls, text: str) -> "IntersectionSeries":
        angle = math.pi / 4
        series = None
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                if key.strip() == "angle":
                    angle = float(val)
                continue
            if line == "t,i,tangency":
                series = cls(angle)
                continue
            if series is None:
                raise ValueError("missing header line 't,i,tangency'")
            t, i, tan = line.split(",")
            series.append(float(t), int(i), tan.strip() not in ("0", "false", "False"))
        if series is None:
            raise ValueError("missing header line 't,i,tangency'")
        return series


# --------------------------------------------------------------------------
# certification
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    t: float
    clause: str
    detail: str


@dataclass
class Certificate:
    passed: bool
    violations: list
    angle: float
    n_samples: int
    n_type0: int

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "angle": self.angle,
            "n_samples": self.n_samples,
            "n_type0": self.n_type0,
            "violations": [vars(v) for v in self.violations],
        }


def certify_monotone(series: IntersectionSeries, log: EventLog, lag: int = 2) -> Certificate:
    """Check a sampled count against the three monotonicity clauses.

    (a) ``i`` never increases between samples of one regular interval;
    (b) across every junction collision ``i`` drops by at least one;
    (c) every drop inside a regular interval has a tangency flag within
    ``lag`` samples of it.

    Samples at or before a collision time belong to the interval ending
    there.
    """
    if len(series) == 0:
        raise SeriesError("empty series")
    t = series.t
    i = series.i
    flags = np.array([s.tangency for s in series.samples])
    collisions = log.type0_times
    for tk in collisions:
        if not t[0] <= tk < t[-1]:
            raise SeriesError(f"collision at t={tk} lies outside the sampled span")
    if log.T is not None and log.T < t[-1] - 1e-12 * max(1.0, abs(t[-1])):
        raise SeriesError("samples extend past the terminal time")
    # interval index of each sample
    part = np.searchsorted(np.asarray(collisions, dtype=float), t, side="left")
    bad: list[Violation] = []
    for k in range(1, len(t)):
        if part[k] != part[k - 1]:
            continue
        if i[k] > i[k - 1]:
            bad.append(Violation(float(t[k]), "a", f"i increased {i[k - 1]} -> {i[k]} inside a regular interval"))
        elif i[k] < i[k - 1]:
            lo, hi = max(0, k - 1 - lag), min(len(t), k + lag + 1)
            if not flags[lo:hi].any():
                bad.append(Violation(float(t[k]), "c", f"i dropped {i[k - 1]} -> {i[k]} with no tangency nearby"))
    for j, tk in enumerate(collisions):
        before = np.flatnonzero(part == j)
        after = np.flatnonzero(part == j + 1)
        if len(before) == 0 or len(after) == 0:
            raise SeriesError(f"no samples on both sides of the collision at t={tk}")
        a, b = i[before[-1]], i[after[0]]
        if not b <= a - 1:
            bad.append(Violation(float(tk), "b", f"i went {a} -> {b} across the collision"))
    return Certificate(not bad, bad, series.angle, len(series), len(collisions))


# --------------------------------------------------------------------------
# reports
# --------------------------------------------------------------------------


@dataclass
class Phase:
    """Samples of one regular interval of an extended run."""

    net_type: NetworkType
    t: list = field(default_factory=list)
    junction_distance: list = field(default_factory=list)
    area: list = field(default_factory=list)
    t_singular: float | None = None  # collision this phase restarted from
    delta0: float | None = None
    kappa_collision: float | None = None

    def add(self, t: float, d: float, area: float | None) -> None:
        self.t.append(float(t))
        self.junction_distance.append(float(d))
        self.area.append(float("nan") if area is None else float(area))


@dataclass(frozen=True)
class AreaRate:
    phase: int
    net_type: str
    rate: float
    expected: float
    window: tuple
    n_samples: int

    @property
    def rel_error(self) -> float:
        return abs(self.rate - self.expected) / self.expected

    def to_dict(self) -> dict:
        d = dict(vars(self))
        d["window"] = list(self.window)
        d["rel_error"] = self.rel_error
        return d


def expected_area_rate(net_type: NetworkType) -> float:
    """Area loss rate ``2 pi - k pi / 3`` of a region with ``k`` triple junctions."""
    return 2.0 * math.pi - JUNCTIONS_PER_REGION[net_type] * math.pi / 3.0


def area_rate(t, area, middle: float = 0.6, min_samples: int = 5) -> tuple[float, tuple, int]:
    """Minus the slope of a least-squares line through the middle part of a series."""
    t = np.asarray(t, dtype=float)
    a = np.asarray(area, dtype=float)
    lo = t[0] + 0.5 * (1.0 - middle) * (t[-1] - t[0])
    hi = t[-1] - 0.5 * (1.0 - middle) * (t[-1] - t[0])
    sel = (t >= lo) & (t <= hi)
    if sel.sum() < min_samples:
        raise ValueError("too few samples in the fitting window")
    slope = np.polyfit(t[sel] - t[sel][0], a[sel], 1)[0]
    return -float(slope), (float(lo), float(hi)), int(sel.sum())


@dataclass
class RunReport:
    n_type0: int
    terminal: str | None
    terminal_net_type: str | None
    T: float | None
    area_rates: list
    expander_fits: list
    certificates: list
    limit: str | None = None
    junction: float | None = None
    steiner_junction: float | None = None

    @property
    def monotone(self) -> bool:
        return all(c.passed for c in self.certificates)

    def to_dict(self) -> dict:
        return {
            "n_type0": self.n_type0,
            "terminal": self.terminal,
            "terminal_net_type": self.terminal_net_type,
            "T": self.T,
            "area_rates": [r.to_dict() for r in self.area_rates],
            "expander_fits": [f.to_dict() if f is not None else None for f in self.expander_fits],
            "certificates": [c.to_dict() for c in self.certificates],
            "monotone": self.monotone,
            "limit": self.limit,
            "junction": self.junction,
            "steiner_junction": self.steiner_junction,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def run_report(phases: list, log: EventLog, series: list, fits: list | None = None,
               limit: str | None = None, junction: float | None = None,
               steiner: float | None = None) -> RunReport:
    """Collect the outcome of an extended run.

    Parameters
    ----------
    phases : list of Phase
        One entry per regular interval, in order.
    log : EventLog
    series : list of IntersectionSeries
        One per test line; each is certified against ``log``.
    fits : list of ExpanderFit or None, optional
        Junction growth fits, one per restart.
    """
    rates = []
    for k, ph in enumerate(phases):
        if ph.net_type is NetworkType.TREE or len(ph.t) < 10:
            continue
        try:
            rate, window, m = area_rate(ph.t, ph.area)
        except ValueError:
            continue
        rates.append(AreaRate(k, ph.net_type.value, rate, expected_area_rate(ph.net_type), window, m))
    term = log.terminal
    return RunReport(
        n_type0=len(log.type0_times),
        terminal=None if term is None else term.kind.value,
        terminal_net_type=None if term is None else term.net_type_before.value,
        T=log.T,
        area_rates=rates,
        expander_fits=list(fits or []),
        certificates=[certify_monotone(s, log) for s in series],
        limit=limit,
        junction=junction,
        steiner_junction=steiner,
    )


__all__ = [
    "ANGLE_MAX",
    "ANGLE_MIN",
    "AreaRate",
    "Certificate",
    "Event",
    "ExpanderFit",
    "IntersectionSeries",
    "Phase",
    "RunReport",
    "Sample",
    "SeriesError",
    "TestLine",
    "Violation",
    "area_rate",
    "certify_monotone",
    "default_tangency_tol",
    "expected_area_rate",
    "run_report",
    "sample_i",
]
