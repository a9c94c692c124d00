import csv
import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from deltaflow.cli import main
from deltaflow.config import eval_number, load_config, parse_config
from deltaflow.dispersion import ALUMINIUM_SHELL, SHELL_OMEGA, bending_slowness, hysteretic_damping
from deltaflow.errors import ConfigError
from deltaflow.geometry import write_mesh
from deltaflow.meshes import triangulate_square
from deltaflow.oracle import analytic_parallel_wall

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

BASE = """
[geometry]
kind = square
[physics]
model = helmholtz
mu = pi/2
[discretization]
L = 4
target_h = 1
[source]
kind = line
edges = x=0
"""


def test_eval_number():
    assert eval_number("pi/2") == math.pi / 2
    assert eval_number("2*sqrt(2) - 1e-3") == pytest.approx(2 * math.sqrt(2) - 1e-3)
    assert eval_number("-exp(1)") == -math.e
    for bad in ("__import__('os')", "pi +", "1/0", "x"):
        with pytest.raises(ValueError):
            eval_number(bad)


@given(st.floats(-1e6, 1e6, allow_nan=False))
def test_eval_number_roundtrips_literals(x):
    assert eval_number(repr(x)) == x


def test_angles_are_in_units_of_pi():
    cfg = parse_config(BASE + "theta0 = 0.25\n[shell]\nthreshold_angle = 0.4\n")
    assert cfg.source.theta0 == pytest.approx(math.pi / 4)
    assert cfg.shell.threshold_angle == pytest.approx(0.4 * math.pi)
    cfg = parse_config(BASE.replace("L = 4", "angles = 0, 0.5, 1, 1.5"))
    np.testing.assert_allclose(cfg.discretization.angles, [0, math.pi / 2, math.pi, 1.5 * math.pi])


@pytest.mark.parametrize(
    "patch",
    [
        ("[geometry]", "[geometry]\nbogus = 1"),
        ("[source]", "[sources]"),
        ("kind = square", "kind = hexagon"),
        ("kind = square", "kind = mesh"),
        ("kind = square", "kind = mesh\nmesh = nowhere.msh"),
        ("mu = pi/2", "mu = -1"),
        ("mu = pi/2", "mu = pi/2\ndamping_fraction = 0.01"),
        ("mu = pi/2", "mu = 0"),
        ("target_h = 1", "target_h = 0"),
        ("edges = x=0", "edges = x=0\ntheta0 = 0.5"),
        ("kind = line", "kind = acoustic_point"),
        ("model = helmholtz", "model = biharmonic"),
        ("L = 4", "L = four"),
    ],
)
def test_config_errors(patch):
    old, new = patch
    with pytest.raises(ConfigError):
        parse_config(BASE.replace(old, new, 1))


def test_all_shipped_configs_load():
    for path in CONFIGS.glob("*.cfg"):
        load_config(path)
    with pytest.raises(ConfigError):
        load_config(CONFIGS / "missing.cfg")


def test_dispersion_constants():
    assert bending_slowness(7.0e10, 2700.0, 0.33, 2.5e-3) == pytest.approx(ALUMINIUM_SHELL.slowness, rel=1e-15)
    k = ALUMINIUM_SHELL.wavenumber(SHELL_OMEGA)
    assert hysteretic_damping(0.005, k) == pytest.approx(0.30132, abs=1e-5)


# -- CLI ---------------------------------------------------------------------------


def _write(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_cli_run_parallel_wall(tmp_path, capsys):
    (tmp_path / "pts.csv").write_text("0.5,0.5\n0.25,0.3\n")
    cfg = load_config(_write(tmp_path, BASE + "[output]\npoints = pts.csv\nfield = f.csv\n"))
    assert cfg.output.points == "pts.csv"
    cfg = str(tmp_path / "run.cfg")
    assert main(["--out", str(tmp_path / "o"), "run", cfg]) == 0
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["dofs"] == 4 and summary["nnz"] == 4
    rows = list(csv.DictReader(open(tmp_path / "o" / "f.csv")))
    vals = [float(r["value"]) for r in rows]
    np.testing.assert_allclose(vals, analytic_parallel_wall([0.5, 0.25], math.pi / 2), rtol=1e-13)
    assert "dofs" in capsys.readouterr().out


def test_cli_run_is_deterministic(tmp_path):
    outs = []
    for k in range(2):
        d = tmp_path / f"o{k}"
        assert main(["--out", str(d), "--threads", str(k + 1), "run", str(CONFIGS / "square_offset.cfg")]) == 0
        outs.append((d / load_config(CONFIGS / "square_offset.cfg").output.field).read_bytes())
    assert outs[0] == outs[1]


def test_cli_converge_and_oracle(tmp_path):
    out = tmp_path / "c"
    assert main(["--out", str(out), "converge", str(CONFIGS / "square_offset.cfg"), "--sweep", "L=8,16"]) == 0
    rows = list(csv.DictReader(open(out / "convergence.csv")))
    assert len(rows) == 2 and float(rows[1]["error"]) < float(rows[0]["error"])
    assert main(["--out", str(out), "oracle", str(CONFIGS / "square_L4.cfg")]) == 0
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["mre"] < 1e-13
    assert main(["--out", str(out), "converge", str(CONFIGS / "square_offset.cfg"), "--sweep", "q=1"]) == 2


def test_cli_exit_codes(tmp_path, capsys):
    assert main(["run", str(tmp_path / "nope.cfg")]) == 2
    assert "error:" in capsys.readouterr().err
    bad = _write(tmp_path, BASE.replace("target_h = 1", "target_h = -1"))
    assert main(["run", bad]) == 2
    slow = _write(
        tmp_path,
        BASE.replace("L = 4", "L = 64\noffset = yes").replace("target_h = 1", "target_h = 0.05").replace("mu = pi/2", "mu = 0.001")
        + "theta0 = 0.1\n[solver]\nmethod = iterative\ntol = 1e-15\nmax_iter = 2\n",
        "slow.cfg",
    )
    assert main(["--out", str(tmp_path / "s"), "run", slow]) == 3
    assert "numerical failure" in capsys.readouterr().err


def test_cli_mesh_info(tmp_path, capsys):
    nodes, tris = triangulate_square(0.4)
    path = tmp_path / "m.msh"
    write_mesh(path, nodes, tris)
    capsys.readouterr()
    assert main(["mesh-info", str(path)]) == 0
    info = json.loads(capsys.readouterr().out)
    assert info["cells"] == len(tris) == 11
    assert info["shared_edges"] + info["free_edges"] == 3 * len(tris) - info["shared_edges"]
