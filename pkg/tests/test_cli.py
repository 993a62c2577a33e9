import json

import pytest

from sweepflow.cli import main
from sweepflow.scenario import load_scenario, packaged_names, validate

DISC_OUTSIDE = """
name = "bad-start"
dimension = 2
horizon = 1.0

[drift]
kind = "constant"
value = [1.0, 0.0]
lipschitz = 1.0

[set]
kind = "ball"
center = [0.0, 0.0]
radius = 1.0
lipschitz = 0.0

[initial]
kind = "atoms"
points = [[0.0, 0.0], [1.5, 0.0]]
weights = [0.5, 0.5]

[schemes.timestepping]
tau = 0.1
"""

HALF_LINE_STIFF = """
name = "stiff"
dimension = 1
horizon = 1.0

[drift]
kind = "constant"
value = [-1.0]
lipschitz = 1.0

[set]
kind = "halfspace"
normal = [-1.0]
offset = 0.0
lipschitz = 0.0

[initial]
kind = "dirac"
point = [0.5]

[schemes.reference]
tau_ref = 1e-3

[schemes.regularized]
lambdas = [0.1]
h_ratio = 1.0
"""


def _tree(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_packaged_names():
    assert packaged_names() == ["moving-square", "oned-regularization", "unit-disc-drift"]


@pytest.mark.parametrize("name", ["moving-square", "oned-regularization", "unit-disc-drift"])
def test_packaged_scenarios_validate(name, capsys):
    assert validate(load_scenario(name)) == []
    assert main(["validate", name]) == 0
    assert "0 failure(s)" in capsys.readouterr().out


@pytest.mark.parametrize("name", ["moving-square", "unit-disc-drift"])
def test_run_is_reproducible(name, tmp_path):
    assert main(["run", name, "--out", str(tmp_path / "a"), "--quiet"]) == 0
    assert main(["run", name, "--out", str(tmp_path / "b"), "--quiet"]) == 0
    a, b = _tree(tmp_path / "a"), _tree(tmp_path / "b")
    assert a and a == b
    summary = json.loads(a[f"{name}/summary.json"])
    assert all(c["passed"] for c in summary["checks"])


def test_run_artifacts(tmp_path):
    assert main(["run", "moving-square", "--out", str(tmp_path), "--quiet"]) == 0
    folder = tmp_path / "moving-square" / "timestepping"
    assert (folder / "index.csv").read_text().startswith("time,filename,mass,support_size\n")
    diag = (folder / "diagnostics.csv").read_text().splitlines()
    assert diag[0] == "step,t,w2_step,step_w2_bound"
    assert len(diag) == 13


def test_disc_run_writes_moment_export(tmp_path):
    assert main(["run", "unit-disc-drift", "--out", str(tmp_path), "--quiet"]) == 0
    moments = tmp_path / "unit-disc-drift" / "moments"
    assert (moments / "moments_k2.dat-s").is_file()
    side = json.loads((moments / "moments_k2.json").read_text())
    assert side["relaxation_order"] == 2 and len(side["variables"]) == 176


def test_oned_run_writes_bounds(tmp_path):
    assert main(["run", "oned-regularization", "--out", str(tmp_path), "--quiet"]) == 0
    lines = (tmp_path / "oned-regularization" / "bounds.csv").read_text().splitlines()
    assert lines[0] == "lambda,t,measured_w1,closed_form,oned_bound,thm_w1_bound"
    assert len(lines) == 1 + 5 * 4


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("SWEEPFLOW_OUT", str(tmp_path / "env"))
    assert main(["run", "moving-square", "--quiet"]) == 0
    assert (tmp_path / "env" / "moving-square" / "summary.json").is_file()


def test_atom_outside_initial_set_is_named(tmp_path, capsys):
    path = tmp_path / "bad.toml"
    path.write_text(DISC_OUTSIDE)
    assert main(["validate", str(path)]) == 1
    assert "initial atom 1 at [1.5, 0.0]" in capsys.readouterr().out
    assert main(["run", str(path), "--out", str(tmp_path), "--quiet"]) == 1


def test_stiffness_guard_reported(tmp_path, capsys):
    path = tmp_path / "stiff.toml"
    path.write_text(HALF_LINE_STIFF)
    assert main(["validate", str(path)]) == 1
    assert "stiffness guard" in capsys.readouterr().out


@pytest.mark.parametrize("text", ["name = ", "name = 'x'\ndimension = 2\n"])
def test_parse_errors_exit_2(tmp_path, capsys, text):
    path = tmp_path / "broken.toml"
    path.write_text(text)
    assert main(["validate", str(path)]) == 2
    assert capsys.readouterr().err.startswith("error:")


def test_unknown_scenario_exit_2(capsys):
    assert main(["run", "no-such-scenario"]) == 2
    assert "packaged" in capsys.readouterr().err
