import csv
import json
import shutil
from pathlib import Path

import pytest

from fbcsf.cli import main
from fbcsf.scenario import CSV_HEADER, SchemaError, parse_scenario

SCEN = Path(__file__).resolve().parent.parent / "scenarios"

SMALL = {
    "name": "small_semicircle",
    "ambient_dim": 2,
    "barrier": {"kind": "flat", "normal": [1.0, 0.0], "offset": 0.0},
    "initial": {"model": "semicircle", "radius": 1.0, "samples": 200, "perturb": {"amplitude": 0.02, "seed": 4}},
    "flow": {"node_count": 32, "cfl": 0.5, "t_end": 0.05, "output_every": 50},
    "analyses": [{"check": "length_monotone", "tol": 1e-10},
                 {"check": "boundary_residual", "max_dist": 1e-8}],
    "entropy": {"centers": "auto", "sigma_hats": [0.5, 0.1]},
}


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return p


def test_chord_scenario(tmp_path, monkeypatch):
    monkeypatch.setenv("FBCSF_OUT", str(tmp_path / "chord"))
    assert main(["run", str(SCEN / "chord.json")]) == 0
    out = tmp_path / "chord"
    with open(out / "timeseries.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == CSV_HEADER
    assert rows[0] == "t,dt,length,max_kappa,max_kappa_sqrt_T_minus_t,boundary_dist,boundary_angle,phi_main".split(",")
    rep = json.loads((out / "report.json").read_text())
    assert rep["max_displacement"] <= 1e-8
    snap = json.loads((out / "states" / "0000.json").read_text())
    assert set(snap) == {"ambient_dim", "t", "nodes"}
    assert len(snap["nodes"]) == 128 * snap["ambient_dim"]


def test_report_is_byte_identical(tmp_path):
    cfg = write(tmp_path, SMALL)
    assert main(["run", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert main(["run", str(cfg), "--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "report.json").read_bytes()
    assert a == (tmp_path / "b" / "report.json").read_bytes()
    rep = json.loads(a)
    assert {"singularity", "checks", "entropy"} <= set(rep)


def test_tolerance_failure_exit_1(tmp_path):
    cfg = dict(SMALL, analyses=[{"check": "T_est", "min": 0.0, "max": 0.01}], entropy=None)
    assert main(["run", str(write(tmp_path, cfg)), "--out", str(tmp_path / "o")]) == 1


def test_malformed_exit_2(tmp_path, capsys):
    assert main(["run", str(SCEN / "malformed_no_barrier.json")]) == 2
    assert "barrier" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["run", str(bad)]) == 2


@pytest.mark.parametrize("patch", [
    {"flow": {"node_count": 8}},
    {"analyses": [{"check": "T_est", "max": -1.0}]},
    {"analyses": [{"check": "no_such_check"}]},
    {"initial": {"model": "spiral"}},
    {"barrier": {"kind": "torus"}},
    {"ambient_dim": 1},
])
def test_schema_violations(patch):
    with pytest.raises(SchemaError):
        parse_scenario(dict(SMALL, **patch))


def test_blowup_exit_3(tmp_path):
    # caps disabled, so the circle is driven through its extinction time
    cfg = {"name": "through_extinction", "ambient_dim": 2, "barrier": None,
           "initial": {"model": "circle", "radius": 0.5, "samples": 32},
           "flow": {"node_count": 32, "cfl": 1.0, "t_end": 1.0, "kappa_cap": 1e300, "len_min": 0.0}}
    assert main(["run", str(write(tmp_path, cfg)), "--out", str(tmp_path / "o")]) == 3


def test_entropy_command(tmp_path, capsys):
    assert main(["entropy", str(write(tmp_path, SMALL)), "--out", str(tmp_path / "e")]) == 0
    rep = json.loads((tmp_path / "e" / "entropy.json").read_text())
    assert rep["entropy_sup"] < 2.0
    assert "entropy_sup=" in capsys.readouterr().out


def test_models_list(capsys):
    assert main(["models", "--list"]) == 0
    out = capsys.readouterr().out.split()
    assert "grim_reaper" in out and "semicircle" in out


def test_verify_filter(capsys):
    assert main(["verify", "--filter", "chord"]) == 0
    out = capsys.readouterr().out
    assert "C1" in out and "C2" not in out
    assert main(["verify", "--filter", "zzz"]) == 2


def test_verify_mutation_names_the_residual(capsys):
    assert main(["verify", "--filter", "C4", "--mutate", "tau-sign"]) == 1
    assert "residual_evolution_kappa" in capsys.readouterr().out
