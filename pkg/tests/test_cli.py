import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from biosocp import presets
from biosocp.cli import main
from biosocp.pipeline import (EXIT_INEXACT, EXIT_INFEASIBLE, EXIT_OK, EXIT_VALIDATION,
                              read_solution_csv, resolve_scenario)
from biosocp.program import read_interchange
from biosocp.scenario import config_text, load_scenario
from scenarios import monod_tank


def write_config(path, cfg):
    path.write_text(config_text(cfg))
    return str(path)


@pytest.fixture(scope="module")
def gradostat_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    code = main(["run", "--preset", "gradostat-transient", "--out", str(out)])
    return code, out


def test_version():
    out = subprocess.run([sys.executable, "-m", "biosocp", "--version"], capture_output=True,
                         text=True, check=True)
    assert out.stdout.strip().endswith("0.1.0")


def test_validate_preset_and_emit(tmp_path, capsys):
    emitted = tmp_path / "w.yaml"
    assert main(["validate", "--preset", "wastewater", "--tau", "8", "--emit", str(emitted)]) \
        == EXIT_OK
    assert "tanks 3, states 4" in capsys.readouterr().out
    assert load_scenario(emitted) == resolve_scenario(preset="wastewater", tau=8)


def test_validate_reports_all_problems(tmp_path, capsys):
    cfg = monod_tank()
    cfg["objective"]["type"] = "profit"
    cfg["horizon"]["delta"] = -1
    path = write_config(tmp_path / "bad.yaml", cfg)
    assert main(["validate", path]) == EXIT_VALIDATION
    err = capsys.readouterr().err
    assert "objective" in err and "horizon" in err


def test_missing_file_is_a_validation_error(tmp_path):
    assert main(["validate", str(tmp_path / "nope.yaml")]) == EXIT_VALIDATION


def test_run_writes_every_artifact(gradostat_run):
    code, out = gradostat_run
    assert code == EXIT_OK
    for name in ("manifest.json", "scenario.yaml", "solution.csv", "report.json", "plot.tsv"):
        assert (out / name).exists(), name
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["exit_code"] == EXIT_OK
    assert manifest["simulation"]["max_abs_error"] <= 1e-6
    report = json.loads((out / "report.json").read_text())
    assert report["summary"].startswith("exact: all steps")
    with open(out / "plot.tsv") as fh:
        header = fh.readline().rstrip("\n").split("\t")
    assert header[:2] == ["step", "time"]
    assert any(h.startswith("influent:") for h in header)
    assert any(h.startswith("effluent:") for h in header)


def test_solution_csv_round_trip(gradostat_run):
    _, out = gradostat_run
    sc = load_scenario(out / "scenario.yaml")
    sol = read_solution_csv(out / "solution.csv", sc)
    assert sol.xi.shape == (sc.grid.tau + 1, 6)
    with open(out / "solution.csv") as fh:
        header = next(csv.reader(fh))
    assert {"xi:0:S", "xin:0:S", "T:0:r0", "lam:0:S", "rho:0:r0"} <= set(header)


def test_replay_is_bit_identical(gradostat_run, tmp_path, capsys):
    _, out = gradostat_run
    assert main(["run", "--replay", str(out / "manifest.json"), "--out", str(tmp_path)]) \
        == EXIT_OK
    assert "replay identical" in capsys.readouterr().out
    a = json.loads((out / "manifest.json").read_text())
    b = json.loads((tmp_path / "manifest.json").read_text())
    assert a["solution_sha256"] == b["solution_sha256"]
    assert a["solver"]["iterations"] == b["solver"]["iterations"]


def test_certify_from_a_solution_file(gradostat_run, tmp_path, capsys):
    _, out = gradostat_run
    report = tmp_path / "r.json"
    assert main(["certify", str(out / "scenario.yaml"), "--solution", str(out / "solution.csv"),
                 "-o", str(report)]) == EXIT_OK
    assert "exact: all steps" in capsys.readouterr().out
    assert json.loads(report.read_text())["certified"]


def test_simulate_from_a_solution_file(gradostat_run, tmp_path, capsys):
    _, out = gradostat_run
    traj = tmp_path / "t.csv"
    assert main(["simulate", str(out / "scenario.yaml"), "--solution", str(out / "solution.csv"),
                 "-o", str(traj)]) == EXIT_OK
    text = capsys.readouterr().out
    err = float(text.rsplit(":", 1)[1])
    assert err <= 1e-6
    assert len(traj.read_text().splitlines()) == 22


def test_simulate_with_influent_csv(tmp_path):
    path = write_config(tmp_path / "m.yaml", monod_tank(tau=3))
    influent = tmp_path / "xin.csv"
    influent.write_text("xin:0:S,xin:0:P\n4,0\n5,0\n6,0\n")
    assert main(["simulate", path, "--influent", str(influent), "-o",
                 str(tmp_path / "t.csv")]) == EXIT_OK
    influent.write_text("xin:0:S,xin:0:P\n4,0\n")
    assert main(["simulate", path, "--influent", str(influent)]) == EXIT_VALIDATION


def test_wastewater_desk_run(tmp_path, capsys):
    assert main(["run", "--preset", "wastewater", "--tau", "64", "--out", str(tmp_path)]) \
        == EXIT_OK
    text = capsys.readouterr().out
    assert "exact: all steps" in text and "advisory" in text


def test_infeasible_limits(tmp_path):
    path = write_config(tmp_path / "w.yaml", presets.wastewater_config(tau=8, bod_limit=0.0))
    assert main(["run", path, "--out", str(tmp_path / "o")]) == EXIT_INFEASIBLE


def test_inexact_solution_exit_code(tmp_path):
    cfg = monod_tank(objective=dict(type="substrate_outflow", eta=[0.0, 1.0]))
    path = write_config(tmp_path / "m.yaml", cfg)
    assert main(["run", path, "--out", str(tmp_path / "o")]) == EXIT_INEXACT
    assert main(["certify", path]) == EXIT_INEXACT


def test_steady_gradostat_run(tmp_path, capsys):
    cfg = presets.gradostat_config(bleed=0.2)
    path = write_config(tmp_path / "g.yaml", cfg)
    assert main(["run", path, "--out", str(tmp_path / "o")]) == EXIT_OK
    assert "steady certificate  exact" in capsys.readouterr().out.replace("   ", "  ")


def test_export_program(tmp_path):
    out = tmp_path / "p.txt"
    assert main(["export-program", "--preset", "gradostat", "-o", str(out)]) == EXIT_OK
    prog = read_interchange(out)
    assert prog.dims.l > 0 and len(prog.dims.q) == 3


def test_synth_influent(tmp_path):
    out = tmp_path / "i.csv"
    assert main(["synth-influent", "--tau", "40", "-o", str(out)]) == EXIT_OK
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 40 and set(rows[0]) == {"step", "BOD", "NH4"}
    bod = np.array([float(r["BOD"]) for r in rows])
    assert int(np.argmax(bod)) + 1 == 30


def test_preset_subcommand(tmp_path):
    out = tmp_path / "g.yaml"
    assert main(["preset", "gradostat-transient", "--tau", "5", "-o", str(out)]) == EXIT_OK
    assert load_scenario(out).grid.tau == 5


def test_batch(tmp_path, capsys):
    a = write_config(tmp_path / "a.yaml", monod_tank(tau=4))
    b = write_config(tmp_path / "b.yaml", presets.gradostat_config(bleed=0.2))
    assert main(["batch", a, b, "--out", str(tmp_path / "runs"), "--jobs", "2"]) == EXIT_OK
    assert (tmp_path / "runs" / "a" / "manifest.json").exists()
    assert (tmp_path / "runs" / "b" / "manifest.json").exists()
