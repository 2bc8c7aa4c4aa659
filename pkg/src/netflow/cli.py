"""Command line: ``netflow run``, ``netflow sweep`` and ``netflow verify``.

Exit status of ``run`` is 0 when the intersection count certifies and the
run ends in the event expected for its network type, 1 when either check
fails and 2 when the solver aborts.  ``sweep`` exits with the largest
status of its runs, ``verify`` with 0 when the stored artifacts still
certify.
"""

from __future__ import annotations

import argparse
import ast
import configparser
import dataclasses
import logging
import math
import operator
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .flow import SolverConfig
from .geometry import NetworkType
from .runner import RunOutcome, RunSpec, run_extended, verify_artifacts

_OPS = {ast.Mult: operator.mul, ast.Div: operator.truediv, ast.Add: operator.add,
        ast.Sub: operator.sub, ast.USub: operator.neg}


def parse_angle(text: str) -> float:
    """A number of radians, optionally written with ``pi`` (``pi/3.5``, ``0.25*pi``)."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _OPS:
            return _OPS[type(node.op)](ev(node.operand))
        raise ValueError(f"cannot read {text!r} as an angle")

    try:
        return ev(ast.parse(text.strip(), mode="eval"))
    except SyntaxError as exc:
        raise ValueError(f"cannot read {text!r} as an angle") from exc


def parse_point(text: str) -> tuple:
    parts = [p for p in text.replace(" ", "").split(",") if p]
    if len(parts) != 2:
        raise ValueError(f"expected X,Y but got {text!r}")
    return float(parts[0]), float(parts[1])


# --------------------------------------------------------------------------
# spec from key=value pairs
# --------------------------------------------------------------------------

_SOLVER_FIELDS = {f.name: f.type for f in dataclasses.fields(SolverConfig) if f.name != "diameter"}
_ALIASES = {"n": "n_points", "anchors": "anchor", "angle": "line_angle", "out": "out_dir", "network": "network_file"}


def _solver_value(name: str, text: str):
    if name in ("n_points", "respacing_interval", "rest_steps"):
        return int(text)
    if name == "scheme":
        return text
    return float(text)


def spec_from_mapping(items: dict) -> RunSpec:
    """Build a :class:`RunSpec` from string keys and values.

    Keys mirror the fields of RunSpec (``preset``, ``network_file``,
    ``anchor``, ``scale``, ``line_angle``, ``extra_angles``,
    ``snapshots_every``, ``out_dir``, ``max_events``) and of SolverConfig.
    ``n``, ``anchors``, ``angle``, ``out`` and ``network`` are accepted as
    short forms.
    """
    kw: dict = {}
    solver: dict = {}
    for key, val in items.items():
        key = _ALIASES.get(key.strip(), key.strip())
        val = val.strip()
        if key in _SOLVER_FIELDS:
            solver[key] = _solver_value(key, val)
        elif key == "preset":
            kw["preset"] = NetworkType(val.lower()) if val else None
        elif key == "network_file":
            kw["network_file"] = val
        elif key == "anchor":
            kw["anchor"] = parse_point(val)
        elif key == "scale":
            kw["scale"] = float(val)
        elif key == "line_angle":
            kw["line_angle"] = parse_angle(val)
        elif key == "extra_angles":
            kw["extra_angles"] = tuple(parse_angle(a) for a in val.split(",") if a.strip())
        elif key in ("snapshots_every", "max_events"):
            kw[key] = int(val)
        elif key == "out_dir":
            kw["out_dir"] = val
        else:
            raise ValueError(f"unknown key {key!r}")
    if "network_file" in kw and "preset" not in kw:
        kw["preset"] = None
    kw["solver"] = SolverConfig(**solver)
    return RunSpec(**kw)


def read_sweep(path: str | Path, out_root: str | Path | None = None) -> dict:
    """Runs of a sweep file, keyed by name.

    The file is flat ``key = value`` text.  Without section headers it
    describes one run.  With ``[name]`` sections each section is a run;
    keys before the first section are shared.  A run without ``out_dir``
    writes to ``<out_root>/<name>``.
    """
    text = Path(path).read_text()
    has_sections = any(ln.strip().startswith("[") for ln in text.splitlines())
    # keys before the first section land in DEFAULT
    text = ("[DEFAULT]\n" if has_sections else "[run]\n") + text
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",), comment_prefixes=("#", ";"))
    cp.optionxform = str
    cp.read_string(text)
    root = Path(out_root) if out_root is not None else Path(path).with_suffix("")
    runs = {}
    for name in cp.sections():
        items = dict(cp[name])
        items.setdefault("out_dir", str(root / name))
        runs[name] = spec_from_mapping(items)
    if not runs:
        raise ValueError(f"{path}: no runs")
    return runs


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def summary(outcome: RunOutcome) -> str:
    r = outcome.report
    parts = [f"terminal={r.terminal or 'none'}"]
    if r.terminal_net_type:
        parts.append(f"as={r.terminal_net_type}")
    parts.append(f"T={r.T:.6g}" if r.T is not None else "T=none")
    parts.append(f"type0={r.n_type0}")
    parts.append(f"monotone={'PASS' if r.monotone else 'FAIL'}")
    if r.limit:
        parts.append(f"limit={r.limit}")
    if outcome.error:
        parts.append(f"error={outcome.error!r}")
    parts.append(f"exit={outcome.exit_status}")
    return " ".join(parts)


def _run_one(spec: RunSpec) -> tuple[int, str]:
    out = run_extended(spec)
    return out.exit_status, summary(out)


def cmd_run(args) -> int:
    items = {"preset": args.preset or ""}
    if args.network:
        items = {"network_file": args.network}
    if args.anchors:
        items["anchor"] = args.anchors
    for key in ("scale", "angle", "n", "snapshots_every", "t_max", "max_events"):
        val = getattr(args, key)
        if val is not None:
            items[key] = str(val)
    if args.extra_angle:
        items["extra_angles"] = ",".join(args.extra_angle)
    items["out_dir"] = args.out or f"netflow_{(args.preset or Path(args.network).stem).lower()}"
    spec = spec_from_mapping(items)
    status, line = _run_one(spec)
    print(f"{line} artifacts={spec.out_dir}")
    return status


def cmd_sweep(args) -> int:
    runs = read_sweep(args.config, args.out)
    worst = 0
    with ProcessPoolExecutor(max_workers=args.jobs) as pool:
        futures = {name: pool.submit(_run_one, spec) for name, spec in runs.items()}
        for name, fut in futures.items():
            try:
                status, line = fut.result()
            except Exception as exc:  # a crashed worker counts as an abort
                status, line = 2, f"crashed: {exc!r}"
            worst = max(worst, status)
            print(f"{name}: {line}")
    return worst


def cmd_verify(args) -> int:
    v = verify_artifacts(args.dir)
    for m in v.messages:
        print(m)
    print("verified" if v.ok else "verification FAILED")
    return v.exit_status


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="netflow", description="Curvature flow of symmetric two-junction networks.")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one extended flow and write its artifacts")
    src = r.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=[t.value.lower() for t in NetworkType])
    src.add_argument("--network", metavar="FILE", help="initial network record (JSON)")
    r.add_argument("--anchors", metavar="X,Y", help="tree anchor in the first quadrant")
    r.add_argument("--scale", type=float)
    r.add_argument("--angle", help="test line angle in radians, e.g. pi/4")
    r.add_argument("--extra-angle", action="append", metavar="A", help="further test line (repeatable)")
    r.add_argument("--n", type=int, help="vertices on the defining curve")
    r.add_argument("--t-max", type=float)
    r.add_argument("--max-events", type=int)
    r.add_argument("--snapshots-every", type=int, metavar="STEPS")
    r.add_argument("--out", metavar="DIR")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep", help="run the runs of a key=value file in parallel")
    s.add_argument("--config", required=True, metavar="FILE")
    s.add_argument("--out", metavar="DIR", help="root for runs without out_dir")
    s.add_argument("--jobs", type=int, default=None)
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify", help="re-certify the artifacts of a finished run")
    v.add_argument("dir")
    v.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"netflow: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
