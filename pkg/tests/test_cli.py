import json

import pytest

from ewbench import cli, verify


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, json.loads(out.out), out.err


def test_check_formulas_default_small(capsys, tmp_path):
    code, rep, err = run(["check-formulas", "--profiles", "1", "--points", "3", "--out", str(tmp_path)], capsys)
    assert code == 0 and rep["passed"]
    assert set(rep["result"]["runs"][0]["max_rel_error"]) == {"lambda0", "lambda1", "lambda2", "eigenvector"}
    assert (tmp_path / "check_formulas_report.json").exists()
    assert "s=0/1" in err


def test_check_formulas_impossible_tolerance(capsys):
    code, rep, _ = run(["check-formulas", "--profiles", "1", "--points", "2", "--tol", "1e-15"], capsys)
    assert code == 1
    assert "exceeds tolerance" in rep["error"]


def test_malformed_config_key(capsys, tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("n = 2\nepsilonn = 1\n")
    code, rep, err = run(["check-formulas", "--config", str(cfg)], capsys)
    assert code == 2
    assert "epsilonn" in rep["error"] and "epsilonn" in err


def test_bad_spec_value(capsys):
    code, rep, _ = run(["solve", "--epsilon", "2"], capsys)
    assert code == 2 and "BadEpsilon" in rep["error"]


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("epsilon = 0\ncells = 7\ntol.killing = 2e-5\n")
    args = cli.build_parser().parse_args(["sweep", "--config", str(cfg), "--epsilon", "1"])
    rc = cli.resolve_config(args)
    assert rc.spec["epsilon"] == "1" and rc.cells == 7 and rc.tolerances == {"killing": 2e-5}


def test_oracle_mode_requires_sphere_base(capsys):
    code, rep, _ = run(["check-formulas", "--n", "3", "--q", "3"], capsys)
    assert code == 2


def test_solve_epsilon_zero(capsys, tmp_path):
    code, rep, _ = run(["solve", "--epsilon", "0", "--out", str(tmp_path)], capsys)
    assert code == 1
    assert rep["error"] == "NoConvergence"
    assert json.loads((tmp_path / "solve_report.json").read_text())["exit_code"] == 1


def test_solve_writes_identical_certificate(capsys, tmp_path, solution64):
    code, rep, err = run(["solve", "--out", str(tmp_path)], capsys)
    assert code == 0 and rep["passed"] and "certified" in err
    assert (tmp_path / "certificate.json").read_text() == solution64.certificate_json()
    assert (tmp_path / "profile.csv").read_text().startswith("t,f,fp,fpp,g,gp,gpp\n")
    assert (tmp_path / "eigenvalues.csv").read_text().startswith("t,lambda0,lambda1,lambda2\n")
    assert rep["config"]["spec"] == {"n": 2, "epsilon": 1, "k": 1, "q": 2, "topology": "SphereBundle"}


def test_solve_rejects_bare_tol(capsys):
    code, rep, _ = run(["solve", "--tol", "1e-3"], capsys)
    assert code == 2


def test_sweep_small(capsys, tmp_path):
    code, rep, _ = run(["sweep", "--cells", "2", "--a-min", "0.5", "--a-max", "2", "--c-min", "0.5",
                        "--c-max", "2", "--workers", "1", "--out", str(tmp_path)], capsys)
    assert code == 0
    assert rep["result"]["cells"] == [2, 2]
    assert (tmp_path / "sweep.csv").read_text().count("\n") == 5


@pytest.mark.parametrize("flags", [["--a-min", "5", "--a-max", "1"], ["--cells", "0"], ["--c-min", "-1"]])
def test_sweep_empty_range(capsys, flags):
    code, rep, _ = run(["sweep", *flags], capsys)
    assert code == 2


def test_verify_commands(capsys, tmp_path, solution64):
    good = tmp_path / "good.json"
    good.write_text(solution64.certificate_json())
    code, rep, _ = run(["verify", str(good)], capsys)
    assert code == 0 and rep["failed"] == []

    cert = json.loads(solution64.certificate_json())
    cert["profile"]["f"][30] += 1e-3
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(cert))
    code, rep, err = run(["verify", str(bad)], capsys)
    assert code == 1
    assert "sec4-gauduchon-G1" in rep["failed"] and "FAILED sec4-gauduchon-G1" in err


def test_verify_unreadable(capsys, tmp_path):
    code, _, _ = run(["verify", str(tmp_path / "missing.json")], capsys)
    assert code == 2
    code, _, _ = run(["verify"], capsys)
    assert code == 2


def test_usage_error():
    assert cli.main(["frobnicate"]) == 2
