import csv
import json
import math

import pytest

from hollowvortex import cli
from hollowvortex import point_vortex as pv


def run(tmp_path, *args):
    return cli.main([args[0], "--out", str(tmp_path), *args[1:]])


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


# ----------------------------------------------------------------------
# parsing


@pytest.mark.parametrize(
    "text,want",
    [
        ("0.005:0.02:0.005", [0.005, 0.01, 0.015, 0.02]),
        ("2..4", [2.0, 3.0, 4.0]),
        ("0.02,0.01", [0.02, 0.01]),
        ("1:1:0.5", [1.0]),
    ],
)
def test_parse_grid(text, want):
    assert cli.parse_grid(text) == pytest.approx(want, abs=1e-15)


@pytest.mark.parametrize("text", ["5..2", "1:0:0.1", "0:1:0", "", "1:2"])
def test_parse_grid_rejects(text):
    with pytest.raises(cli.UsageError):
        cli.parse_grid(text)


def test_parse_grid_scaled():
    vals = cli.parse_grid("0:0.5k:0.25k", lambda s: float(s[:-1]) * 4 if s.endswith("k") else float(s))
    assert vals == [0.0, 1.0, 2.0]


def test_parse_sign_and_float():
    assert cli.parse_sign("+") == 1 and cli.parse_sign("-") == -1
    assert cli.parse_float("inf") == math.inf
    with pytest.raises(cli.UsageError):
        cli.parse_sign("x")


# ----------------------------------------------------------------------
# exit codes


def test_empty_m_range_is_usage_error(tmp_path):
    assert run(tmp_path, "dispersion", "--m", "5..2") == cli.EXIT_USAGE


def test_missing_state_is_usage_error(tmp_path):
    assert run(tmp_path, "audit", "--state", str(tmp_path / "nope.json")) == cli.EXIT_USAGE


def test_time_beyond_collapse_is_usage_error(tmp_path):
    assert run(tmp_path, "evolve", "--t", "0:1.2k:0.2k") == cli.EXIT_USAGE


def test_coincident_configuration_is_usage_error(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"kind": "point_vortices", "centers": [[0, 0], [0, 0]], "gammas": [1, 1], "Omega": [0.1, 0.0]}))
    assert run(tmp_path, "pv-solve", "--input", str(p), "--split", "z1,z2") == cli.EXIT_USAGE


def test_degenerate_split_exit(tmp_path):
    c = pv.PointVortexConfig([-1.0, 1.0], [1.0, 1.0], 1 / (4 * math.pi))
    p = tmp_path / "pair.json"
    p.write_text(json.dumps(c.to_json()))
    assert run(tmp_path, "pv-solve", "--input", str(p), "--split", "z1,z2") == cli.EXIT_DEGENERATE
    assert run(tmp_path, "desingularize", "--input", str(p), "--split", "z1,z2") == cli.EXIT_DEGENERATE


def test_branch_failure_exit(tmp_path, capsys):
    code = run(tmp_path, "branch", "--m", "5", "--sign", "+", "--eps", "0.02,0.04")
    assert code == cli.EXIT_SOLVER
    rows = read_csv(tmp_path / "branch_m5p.csv")
    assert len(rows) == 1 and float(rows[0]["eps"]) == 0.02
    data = json.loads((tmp_path / "branch_m5p.json").read_text())
    assert data["status"].startswith("Newton failed")


# ----------------------------------------------------------------------
# commands


def test_dispersion(tmp_path):
    assert run(tmp_path, "dispersion", "--m", "2..3", "--n", "1..2") == 0
    rows = read_csv(tmp_path / "dispersion.csv")
    assert len(rows) == 4
    for r in rows:
        assert float(r["Omega_minus"]) == pytest.approx(float(r["expected_minus"]), abs=1e-12)
        assert float(r["Omega_plus"]) == pytest.approx(float(r["expected_plus"]), abs=1e-12)
    assert (tmp_path / "manifest_dispersion.json").exists()


def test_dispersion_finite_kappa(tmp_path, capsys):
    assert run(tmp_path, "dispersion", "--m", "3", "--n", "1", "--kappa", "2") == 0
    rows = read_csv(tmp_path / "dispersion.csv")
    assert rows[0]["status"] == "no roots"
    assert float(rows[0]["min_abs_d"]) > 0
    assert "no roots" in capsys.readouterr().out


def test_branch_degenerate_direction(tmp_path):
    assert run(tmp_path, "branch", "--m", "9", "--sign", "-", "--eps", "0.005") == 0
    rows = read_csv(tmp_path / "branch_m9m.csv")
    assert rows[0]["direction"] == "degenerate at eps^2"


def test_branch_compare_hstate(tmp_path):
    assert run(tmp_path, "branch", "--m", "3", "--sign", "+", "--eps", "0.01", "--compare", "hstate", "--no-direction") == 0
    rows = read_csv(tmp_path / "branch_m3p.csv")
    assert {"Omega_H", "q_H"} <= set(rows[0])
    assert float(rows[0]["residual"]) <= 1e-12
    # the expansion carries Omega only to first order; c2 eps^2 remains
    assert float(rows[0]["dev_Omega"]) <= 1e-3


def test_branch_config_file(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"branch": {"m": 4, "sign": "-", "eps": "0.01"}}))
    assert cli.main(["branch", "--config", str(cfg), "--out", str(tmp_path), "--no-direction"]) == 0
    assert (tmp_path / "branch_m4m.csv").exists()
    man = json.loads((tmp_path / "manifest_branch.json").read_text())
    assert man["config"]["m"] == 4


def test_pv_solve_quartet(tmp_path):
    assert run(tmp_path, "pv-solve", "--preset", "quartet") == 0
    d = json.loads((tmp_path / "pv_solution.json").read_text())
    assert d["residual"] <= 1e-12
    assert abs(d["det"]) == pytest.approx(1.3974, abs=1e-4)
    assert d["full_rank"]


def test_evolve(tmp_path):
    assert run(tmp_path, "evolve", "--t", "0:0.9k:0.3k") == 0
    rows = read_csv(tmp_path / "trajectory.csv")
    assert len(rows) == 4
    assert max(float(r["impulse_drift_ode"]) for r in rows) <= 1e-9
    assert max(float(r["ode_rel_dev"]) for r in rows) <= 1e-8


def test_desingularize_fields_audit(tmp_path, capsys):
    assert run(tmp_path, "desingularize", "--rho", "0.02,0.01") == 0
    fam = json.loads((tmp_path / "family.json").read_text())
    assert len(fam["states"]) == 2
    state = str(tmp_path / "family.json")
    assert run(tmp_path, "audit", "--state", state) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 3
    assert run(tmp_path, "fields", "--state", state, "--grid", "15") == 0
    rows = read_csv(tmp_path / "fields.csv")
    assert len(rows) == 225


def test_audit_branch_state(tmp_path):
    assert run(tmp_path, "branch", "--m", "3", "--sign", "-", "--eps", "0.01", "--no-direction") == 0
    assert run(tmp_path, "audit", "--state", str(tmp_path / "branch_m3m.json")) == 0
    a = json.loads((tmp_path / "audit.json").read_text())
    assert max(a["kinematic_sup"]) <= 1e-9


def test_rigidity(tmp_path):
    assert run(tmp_path, "rigidity", "--samples", "2", "--m-max", "3", "--n-max", "16") == 0
    rows = read_csv(tmp_path / "rigidity.csv")
    assert all(r["returned_to_circle"] == "1" for r in rows)


def test_outputs_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert cli.main(["branch", "--out", str(d), "--m", "4", "--sign", "+", "--eps", "0.01,0.02", "--no-direction"]) == 0
        assert cli.main(["desingularize", "--out", str(d), "--rho", "0.02,0.01"]) == 0
    for name in ("branch_m4p.csv", "branch_m4p.json", "family.csv", "family.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_help_exits_cleanly(capsys):
    with pytest.raises(SystemExit) as e:
        cli.main(["--help"])
    assert e.value.code == 0
    assert "desingularize" in capsys.readouterr().out


def test_unknown_command():
    with pytest.raises(SystemExit) as e:
        cli.main(["bogus"])
    assert e.value.code == 2
