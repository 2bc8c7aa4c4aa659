import json
import math
import subprocess
import sys
import xml.etree.ElementTree as ET

import pytest

from netflow import cli
from netflow.diagnostics import IntersectionSeries
from netflow.flow import FlowError, SolverConfig
from netflow.geometry import NetworkType, dump_network, load_network
from netflow.presets import build_preset
from netflow.runner import RunSpec, run_extended, verify_artifacts

FILES = ("events.json", "report.json", "initial.json", "final.json", "snapshots.json")


def test_parse_angle():
    assert cli.parse_angle("pi/4") == pytest.approx(math.pi / 4)
    assert cli.parse_angle("0.25*pi") == pytest.approx(math.pi / 4)
    assert cli.parse_angle("0.7") == 0.7
    for bad in ("pi/", "__import__('os')", "e"):
        with pytest.raises(ValueError):
            cli.parse_angle(bad)


def test_spec_validation():
    with pytest.raises(ValueError):
        RunSpec(preset=None)
    with pytest.raises(ValueError):
        RunSpec(preset=NetworkType.THETA, network_file="x.json")
    with pytest.raises(ValueError):
        RunSpec(preset=NetworkType.THETA, line_angle=0.3)
    with pytest.raises(ValueError):
        RunSpec(preset=NetworkType.LENS, anchor=(1.0, 1.0))


def test_spec_from_mapping():
    spec = cli.spec_from_mapping({"preset": "tree", "anchors": "1.2, 1.0", "n": "150", "angle": "pi/3.5",
                                  "extra_angles": "pi/4", "cfl": "0.4", "out": "somewhere"})
    assert spec.preset is NetworkType.TREE and spec.anchor == (1.2, 1.0)
    assert spec.solver.n_points == 150 and spec.solver.cfl == 0.4
    assert spec.angles == pytest.approx((math.pi / 3.5, math.pi / 4))
    with pytest.raises(ValueError, match="unknown key"):
        cli.spec_from_mapping({"preset": "tree", "colour": "red"})


def test_run_tree_writes_complete_artifacts(tmp_path):
    out = tmp_path / "tree"
    code = cli.main(["run", "--preset", "tree", "--anchors", "1.2,1.0", "--out", str(out),
                     "--snapshots-every", "300", "--extra-angle", "pi/3.5"])
    assert code == 0
    for name in FILES:
        assert (out / name).is_file()
    rep = json.loads((out / "report.json").read_text())
    assert rep["terminal"] == "Converged" and rep["limit"] == "SteinerTree" and rep["exit_status"] == 0
    assert len(rep["series_files"]) == 2
    for name in rep["series_files"]:
        IntersectionSeries.from_text((out / name).read_text())
    snaps = json.loads((out / "snapshots.json").read_text())
    assert len(snaps) >= 2
    for s in snaps:
        root = ET.parse(out / "snapshots" / s["file"]).getroot()
        assert root.tag.endswith("svg")
    load_network((out / "final.json").read_text())
    assert cli.main(["verify", str(out)]) == 0


def test_runs_are_deterministic(tmp_path):
    for d in ("a", "b"):
        assert cli.main(["run", "--preset", "tree", "--anchors", "1.2,1.0", "--n", "100",
                         "--out", str(tmp_path / d), "--snapshots-every", "500"]) == 0
    files = sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file())
    assert files
    for f in files:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes(), f


def test_verify_detects_tampering(tmp_path):
    out = tmp_path / "t"
    assert cli.main(["run", "--preset", "tree", "--anchors", "1.2,1.0", "--n", "100", "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    f = out / rep["series_files"][0]
    lines = f.read_text().splitlines()
    t_last = lines[-1].split(",")[0]
    lines[-1] = f"{t_last},5,0"  # the count jumps up at the end
    f.write_text("\n".join(lines) + "\n")
    v = verify_artifacts(out)
    assert not v.ok and any("clause a" in m for m in v.messages)
    assert cli.main(["verify", str(out)]) == 1
    assert cli.main(["verify", str(tmp_path / "missing")]) == 1


def test_run_from_network_file(tmp_path):
    f = tmp_path / "net.json"
    f.write_text(dump_network(build_preset(NetworkType.LENS, n_points=120)))
    assert cli.main(["run", "--network", str(f), "--out", str(tmp_path / "lens")]) == 0
    rep = json.loads((tmp_path / "lens" / "report.json").read_text())
    assert rep["terminal"] == "Blowup" and rep["n_type0"] == 0


def test_bad_arguments_exit_two(tmp_path, capsys):
    assert cli.main(["run", "--preset", "theta", "--angle", "0.2", "--out", str(tmp_path / "x")]) == 2
    assert "angle" in capsys.readouterr().err


def test_solver_abort_dumps_state(tmp_path, monkeypatch):
    import netflow.runner as runner

    def boom(state, cfg, *a, **k):
        raise FlowError("forced", state)

    monkeypatch.setattr(runner, "run_until_event", boom)
    spec = RunSpec(preset=NetworkType.TREE, anchor=(1.2, 1.0), solver=SolverConfig(n_points=80), out_dir=str(tmp_path))
    out = run_extended(spec)
    assert out.exit_status == 2 and out.error == "forced"
    load_network((tmp_path / "abort_state.json").read_text())
    assert not verify_artifacts(tmp_path).ok


def test_sweep(tmp_path):
    cfg = tmp_path / "sweep.cfg"
    cfg.write_text("n = 100\n\n[steiner]\npreset = tree\nanchor = 1.2,1.0\n\n[square]\npreset = tree\nanchors = 1,1\n# the pi/4 line would pass through this anchor\nangle = pi/3.5\n")
    runs = cli.read_sweep(cfg, tmp_path / "runs")
    assert set(runs) == {"steiner", "square"}
    assert all(r.solver.n_points == 100 for r in runs.values())
    assert cli.main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "runs"), "--jobs", "2"]) == 0
    for name in runs:
        assert verify_artifacts(tmp_path / "runs" / name).ok


def test_single_run_sweep_file(tmp_path):
    cfg = tmp_path / "one.cfg"
    cfg.write_text("# one run\npreset = tree\nanchor = 1.2,1.0\nn = 80\n")
    runs = cli.read_sweep(cfg)
    assert list(runs) == ["run"] and runs["run"].out_dir == str(tmp_path / "one" / "run")


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "netflow", "verify", str(tmp_path)], capture_output=True, text=True)
    assert r.returncode == 1 and "FAILED" in r.stdout
