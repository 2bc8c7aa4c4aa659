"""Extended runs: flow, restart at collisions, sample, report, write artifacts.

An extended run alternates :func:`~netflow.flow.run_until_event` with
:func:`~netflow.transitions.standard_transition` until a terminal event.
Along the way the intersection count with each test line is sampled
(every step while the junction is near the origin, every tenth step
otherwise) and per-phase series of the junction distance and the region
area are kept for the report.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path


from . import svg
from .diagnostics import (
    IntersectionSeries,
    Phase,
    RunReport,
    SeriesError,
    TestLine,
    certify_monotone,
    run_report,
    sample_i,
)
from .flow import Event, FlowError, SolverConfig, SymmetricState, network_diameter, prepare, run_until_event
from .geometry import NetworkType, SymmetricNetwork, dump_network, enclosed_area, load_network
from .presets import build_preset
from .transitions import (
    EventLog,
    EventRecord,
    classify_limit,
    fit_restart,
    standard_transition,
    steiner_junction,
)

log = logging.getLogger(__name__)

SAMPLE_EVERY = 10
NEAR_FACTOR = 10.0


@dataclass(frozen=True)
class RunSpec:
    """Everything that determines a run.

    Exactly one of ``preset`` and ``network_file`` is set.  ``anchor``
    applies to tree presets only.
    """

    preset: NetworkType | None = NetworkType.THETA
    network_file: str | None = None
    anchor: tuple | None = None
    scale: float = 1.0
    solver: SolverConfig = field(default_factory=SolverConfig)
    line_angle: float = math.pi / 4
    extra_angles: tuple = ()
    snapshots_every: int = 0
    out_dir: str | None = None
    max_events: int = 50

    def __post_init__(self):
        if (self.preset is None) == (self.network_file is None):
            raise ValueError("give exactly one of preset and network_file")
        if self.preset is not None:
            object.__setattr__(self, "preset", NetworkType(self.preset))
        for a in self.angles:
            TestLine(a)
        if self.anchor is not None and self.preset is not NetworkType.TREE:
            raise ValueError("anchors only apply to the tree preset")
        if self.snapshots_every < 0:
            raise ValueError("snapshots_every must be nonnegative")

    @property
    def angles(self) -> tuple:
        return (self.line_angle,) + tuple(a for a in self.extra_angles if a != self.line_angle)

    def initial_network(self) -> SymmetricNetwork:
        if self.network_file is not None:
            return load_network(Path(self.network_file).read_text())
        return build_preset(self.preset, scale=self.scale, anchor=self.anchor, n_points=self.solver.n_points)


@dataclass
class RunOutcome:
    spec: RunSpec
    config: SolverConfig
    initial: SymmetricNetwork
    final: SymmetricState
    log: EventLog
    phases: list
    series: list
    report: RunReport
    error: str | None = None

    @property
    def expected(self) -> bool:
        return terminal_as_expected(self.initial.net_type, self.report)

    @property
    def exit_status(self) -> int:
        if self.error is not None:
            return 2
        return 0 if self.report.monotone and self.expected else 1


def terminal_as_expected(net_type: NetworkType, report: RunReport) -> bool:
    """Terminal event each network type should end in.

    Trees converge to a Steiner tree or a standard cross; lenses blow up
    without collisions; theta and eyeglasses networks blow up as
    eyeglasses.
    """
    if net_type is NetworkType.TREE:
        return report.terminal == Event.CONVERGED.value and report.limit in ("SteinerTree", "StandardCross")
    if net_type is NetworkType.LENS:
        return report.terminal == Event.BLOWUP.value and report.n_type0 == 0
    return report.terminal == Event.BLOWUP.value and report.terminal_net_type == NetworkType.EYEGLASSES.value


class _Recorder:
    """Observer that samples counts, phase series and snapshots."""

    def __init__(self, spec: RunSpec, cfg: SolverConfig, lines, snap_dir: Path | None):
        self.cfg = cfg
        self.lines = lines
        self.series = [IntersectionSeries(ln.angle) for ln in lines]
        self.phases: list[Phase] = []
        self.snap_dir = snap_dir
        self.snap_every = spec.snapshots_every
        self.snapshots: list[dict] = []
        self.count = 0

    def new_phase(self, net_type, **kw):
        self.phases.append(Phase(net_type, **kw))
        self._first = True

    def sample(self, state: SymmetricState) -> None:
        for ln, ser in zip(self.lines, self.series):
            if ser.samples and state.t <= ser.samples[-1].t:
                continue
            c = sample_i(state, ln)
            ser.append(state.t, c.count, c.tangency)

    def snapshot(self, state: SymmetricState, tag: str = "") -> None:
        if self.snap_dir is None:
            return
        name = f"snap_{len(self.snapshots):05d}.svg"
        text = svg.render_network(state.net, [ln.angle for ln in self.lines], title=f"t = {state.t:.6g} {tag}".strip())
        (self.snap_dir / name).write_text(text)
        self.snapshots.append({"file": name, "t": state.t, "steps": state.steps, "net_type": state.net.net_type.value,
                               "tag": tag})

    def __call__(self, state: SymmetricState, kmax: float) -> None:
        net = state.net
        area = None if net.net_type is NetworkType.TREE else enclosed_area(net)[0]
        ph = self.phases[-1]
        ph.add(state.t, net.junction_distance, area)
        near = net.junction_distance < NEAR_FACTOR * self.cfg.junction_tol
        if self._first or near or self.count % SAMPLE_EVERY == 0:
            self.sample(state)
        if self.snap_every and self.count % self.snap_every == 0:
            self.snapshot(state)
        self._first = False
        self.count += 1


def _junction_speed(ph: Phase) -> float | None:
    if len(ph.t) < 2:
        return None
    dt = ph.t[-1] - ph.t[-2]
    dd = ph.junction_distance[-2] - ph.junction_distance[-1]
    return dd / dt if dt > 0 and dd > 0 else None


def run_extended(spec: RunSpec, observer=None) -> RunOutcome:
    """Run the extended flow described by ``spec`` (no files are written unless ``out_dir`` is set)."""
    net0 = spec.initial_network()
    cfg = spec.solver.resolved(network_diameter(net0))
    lines = [TestLine(a) for a in spec.angles]
    for ln in lines:
        ln.check_network(net0)
    out = Path(spec.out_dir) if spec.out_dir else None
    snap_dir = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        snap_dir = out / "snapshots"
        snap_dir.mkdir(exist_ok=True)
    rec = _Recorder(spec, cfg, lines, snap_dir)
    obs = rec if observer is None else (lambda s, k: (rec(s, k), observer(s, k)))
    state = prepare(SymmetricState(net0), cfg)
    events = EventLog()
    rec.new_phase(state.net.net_type)
    fits = []
    t_sing = None
    error = None
    result = None
    try:
        while True:
            result = run_until_event(state, cfg, obs, restarted_at=t_sing)
            rec.sample(result.state)
            if result.event is not Event.TYPE0 or len(events.events) >= spec.max_events:
                events.append(EventRecord(result.state.t, result.event, result.state.net.net_type))
                rec.snapshot(result.state, result.event.value)
                break
            rec.snapshot(result.state, "Type0")
            ph = rec.phases[-1]
            rs = standard_transition(result.state, cfg, junction_speed=_junction_speed(ph))
            before, after = result.state.net.net_type, rs.state.net.net_type
            log.info("collision at t=%.9g: %s -> %s, delta0=%.3g", rs.t_singular, before.value, after.value, rs.delta0)
            events.append(EventRecord(rs.t_singular, Event.TYPE0, before, after))
            t_sing = rs.t_singular
            state = rs.state
            rec.new_phase(after, t_singular=rs.t_singular, delta0=rs.delta0, kappa_collision=result.max_kappa)
            rec.snapshot(state, "restart")
    except FlowError as exc:
        error = str(exc)
        log.error("solver abort: %s", exc)
        bad = exc.state if exc.state is not None else state
        if out is not None and bad is not None:
            (out / "abort_state.json").write_text(dump_network(bad.net))
        if result is None or result.event is Event.TYPE0:
            final = bad
        else:
            final = result.state
    else:
        final = result.state

    for ph in rec.phases:
        if ph.t_singular is None:
            continue
        try:
            fits.append(fit_restart(ph.t, ph.junction_distance, ph.t_singular, ph.delta0))
        except ValueError as exc:
            log.warning("expander fit rejected: %s", exc)
            fits.append(None)

    limit = junction = steiner = None
    if final.net.net_type is NetworkType.TREE and events.terminal is not None and \
            events.terminal.kind is Event.CONVERGED:
        limit = classify_limit(final, cfg).value
        junction = final.net.junction_distance
        steiner = steiner_junction(final.net.anchor, final.net.junction_axis)
    if error is None:
        report = run_report(rec.phases, events, rec.series, fits, limit, junction, steiner)
    else:
        report = RunReport(len(events.type0_times), None, None, None, [], fits, [], limit, junction, steiner)
    outcome = RunOutcome(spec, cfg, net0, final, events, rec.phases, rec.series, report, error)
    if out is not None:
        write_artifacts(outcome, out, rec.snapshots)
    return outcome


# --------------------------------------------------------------------------
# artifacts
# --------------------------------------------------------------------------


def _series_name(angle: float) -> str:
    return f"series_{math.degrees(angle):.4f}.csv"


def write_artifacts(outcome: RunOutcome, out: Path, snapshots: list) -> None:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "events.json").write_text(outcome.log.to_json())
    names = []
    for ser in outcome.series:
        name = _series_name(ser.angle)
        (out / name).write_text(ser.to_text())
        names.append(name)
    (out / "initial.json").write_text(dump_network(outcome.initial))
    (out / "final.json").write_text(dump_network(outcome.final.net))
    rep = outcome.report.to_dict()
    rep["exit_status"] = outcome.exit_status
    rep["expected_terminal"] = outcome.expected
    rep["error"] = outcome.error
    rep["series_files"] = names
    rep["config"] = {k: v for k, v in dataclasses.asdict(outcome.config).items()}
    (out / "report.json").write_text(json.dumps(rep, indent=2))
    (out / "snapshots.json").write_text(json.dumps(snapshots, indent=2))


@dataclass
class Verification:
    ok: bool
    messages: list

    @property
    def exit_status(self) -> int:
        return 0 if self.ok else 1


def verify_artifacts(directory: str | os.PathLike) -> Verification:
    """Re-read the artifacts of a run and re-certify them.

    Checks that every declared file exists and parses, that the stored
    certificates agree with a fresh certification of the stored series,
    and that the stored verdict still holds.
    """
    d = Path(directory)
    msgs = []
    try:
        rep = json.loads((d / "report.json").read_text())
        events = EventLog.from_json((d / "events.json").read_text())
        load_network((d / "initial.json").read_text())
        load_network((d / "final.json").read_text(), validate=False)
        snaps = json.loads((d / "snapshots.json").read_text())
    except (OSError, ValueError, KeyError) as exc:
        return Verification(False, [f"unreadable artifacts: {exc}"])
    for s in snaps:
        if not (d / "snapshots" / s["file"]).is_file():
            msgs.append(f"missing snapshot {s['file']}")
    stored = {round(c["angle"], 12): c["passed"] for c in rep.get("certificates", [])}
    ok = not msgs
    for name in rep.get("series_files", []):
        try:
            ser = IntersectionSeries.from_text((d / name).read_text())
        except (OSError, ValueError) as exc:
            msgs.append(f"{name}: {exc}")
            ok = False
            continue
        try:
            cert = certify_monotone(ser, events)
        except SeriesError as exc:
            msgs.append(f"{name}: {exc}")
            ok = False
            continue
        prev = stored.get(round(ser.angle, 12))
        if prev is None or prev != cert.passed:
            msgs.append(f"{name}: stored verdict {prev} but re-certification gives {cert.passed}")
            ok = False
        for v in cert.violations:
            msgs.append(f"{name}: clause {v.clause} at t={v.t:.9g}: {v.detail}")
        ok = ok and cert.passed
    if rep.get("exit_status") != 0:
        ok = False
        msgs.append(f"run finished with exit status {rep.get('exit_status')}")
    return Verification(ok, msgs)
